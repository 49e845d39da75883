#pragma once

#include <string>

#include "pibwb/term.hpp"

namespace pibwb {

// Surface syntax, round-trips through the parser. Deterministic: prints the
// structure exactly as stored (no reordering).
std::string print_term(const TermPtr& p);
std::string print_store(const BufferStore& b);
std::string print_config(const Config& c);  // "P @ { store }" or just "P"
std::string print_capacity(const Capacity& c);

}  // namespace pibwb
