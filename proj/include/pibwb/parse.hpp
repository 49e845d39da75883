#pragma once

#include <stdexcept>
#include <string>

#include "pibwb/term.hpp"

namespace pibwb {

struct ParseError : std::runtime_error {
  size_t pos;  // byte offset into the input
  ParseError(const std::string& what, size_t p)
      : std::runtime_error(what + " at offset " + std::to_string(p)), pos(p) {}
};

// Process term. `polyadic` additionally accepts multi-name prefixes
// c(x,y).P / c<a,b>.P and buffer-agent literals F[cap; (a,b),...; b1, b2].
TermPtr parse_term(const std::string& text, bool polyadic = false);

// "{ b -> (2, [d, (new a)]), c -> (inf, []) }"
BufferStore parse_store(const std::string& text);

// "P" or "P @ { store }"
Config parse_config(const std::string& text, bool polyadic = false);

}  // namespace pibwb
