// Shared successor engine behind successors(). The polyadic backend drives
// the same machinery with its own input instantiation tuples; buffer agents
// and binary prefixes need no extra switches, they simply occur in the term.
#pragma once

#include <functional>

#include "pibwb/semantics.hpp"

namespace pibwb {

struct EngineCfg {
  std::vector<std::vector<Name>> tuples1;  // instantiations for unary inputs
  std::vector<std::vector<Name>> tuples2;  // instantiations for binary inputs
  NameSet avoid;          // tokens the opened-name series must not collide with
  int unfold_budget = 2;  // replication copies per derived transition
};

std::vector<Transition> engine_successors(const Config& c, const EngineCfg& ec);

// Reachability explorer shared by the buffered and polyadic systems. States
// are expanded cheapest first (unfold count, then depth), truncation is
// marked where a bound suppressed outgoing behaviour.
PibLts explore_lts(const Config& c0, const LtsBounds& bounds,
                   const std::function<std::vector<Transition>(const Config&)>& step);

}  // namespace pibwb
