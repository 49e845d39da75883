#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "pibwb/semantics.hpp"
#include "pibwb/term.hpp"

namespace pibwb {

// The two target names standing for one source name. Processes receive along
// the first component and send along the second; for a buffered name the
// buffer agent sits in between, so the components must differ.
struct NamePair {
  Name input_name;
  Name output_name;
  bool operator==(const NamePair&) const = default;
};

// Unbuffered names keep one token for both roles, buffered names split into
// '!'-suffixed tokens. '!' cannot appear in surface identifiers, which makes
// the scheme injective across distinct sources.
NamePair translate_name(const Name& n, bool buffered);

struct CapacityExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One-step expansion of the buffer agent: receive-only while empty, a
// receive/send choice in the middle, send-only when full. The continuations
// stay folded as agent constants; the transition engine expands them on
// demand, which keeps bounded queues finite-state.
TermPtr buffer_agent(const Capacity& cap, const std::vector<std::pair<Name, Name>>& held,
                     const NamePair& np);

// Structural encoding of a process. Prefixes on names listed in `buffered`
// (plus names bound by their own buffer binder) use the split pair.
TermPtr encode_process(const TermPtr& p, const NameSet& buffered = {});

// Encoding of a whole configuration: store-local names and restricted buffer
// keys are extruded in front, then the process image runs beside one buffer
// agent per store entry.
TermPtr encode_config(const Config& c);

// Action translation. store_domain decides which subjects and objects are
// buffered. Bijective on the labels in use.
Action translate_action(const Action& a, const NameSet& store_domain);

struct PolyTransition {
  Action action;
  TermPtr target;
};

// A subject is used for inputs of one arity and outputs of another, so any
// communication on it would be malformed.
struct ArityMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Early transition steps of a polyadic term (there is no store on this side).
// Environment inputs range over exactly the given pairs.
std::vector<PolyTransition> poly_successors(const TermPtr& p, const std::vector<NamePair>& env);

// Reachable transition system under a fixed environment, bounded the same way
// as the buffered explorer.
PibLts poly_reachable_lts(const TermPtr& p, const LtsBounds& bounds = {},
                          const std::vector<NamePair>& env = {});

// Renames the bound objects of an action to the reserved series %0, %1, ...
// in order of first appearance, rewriting the target the same way. Two bound
// output transitions that opened different tokens for the same name compare
// equal after this.
std::pair<Action, TermPtr> normalize_opened(const Action& a, const TermPtr& target);

}  // namespace pibwb
