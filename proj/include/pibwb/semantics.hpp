// Early labelled transition system over configurations.
#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pibwb/lts.hpp"
#include "pibwb/term.hpp"

namespace pibwb {

enum class ActKind : std::uint8_t { Tau, FreeIn, FreeOut, BoundOut };

// Transition label. Monadic actions carry one object, polyadic ones two, tau
// none. bound[i] marks object positions whose restriction was opened by the
// step; any opened position makes the kind BoundOut.
struct Action {
  ActKind kind = ActKind::Tau;
  Name subject;
  std::vector<Name> objects;
  std::vector<bool> bound;

  bool operator==(const Action&) const = default;
  auto operator<=>(const Action&) const = default;

  NameSet names() const;
  // "tau" | "in c d" | "out c d" | "bout c d"; polyadic objects join with a
  // comma and carry '^' on opened positions.
  std::string label() const;

  static Action mk_tau() { return {}; }
  static Action mk_in(Name subj, Name obj);
  static Action mk_out(Name subj, Name obj);
  static Action mk_bout(Name subj, Name obj);
};

struct Transition {
  Config source;
  Action action;
  Config target;
  int unfolds = 0;  // replication copies materialized by this derivation
  std::vector<std::pair<Mark, Name>> consumed;  // marks of fired prefixes with
                                                // the object transmitted
};

struct InvalidStore : std::runtime_error {
  explicit InvalidStore(const std::string& what) : std::runtime_error(what) {}
};

// Every transition derivable from c, targets canonical and valid, sorted by
// (action, target key) and deduplicated. Free inputs are instantiated from
// env together with all names of c plus one fresh representative. Callers
// comparing two configurations must pass the same env (the union of both
// sides' names) so the instantiation pools coincide.
std::vector<Transition> successors(const Config& c, const NameSet& env = {});

struct ActionPattern {
  ActKind kind = ActKind::Tau;
  std::optional<Name> subject;  // absent matches any
  std::optional<Name> object;

  bool matches(const Action& a) const;

  static ActionPattern any_tau() { return {}; }
};

struct NoMatch : std::runtime_error {
  std::size_t index;
  explicit NoMatch(std::size_t i);
};

// Greedy scripted execution: each pattern takes the first matching successor
// in enumeration order. Throws NoMatch with the index of the first pattern
// that matches nothing.
std::vector<Transition> run_trace(const Config& c,
                                  const std::vector<ActionPattern>& script,
                                  const NameSet& env = {});

struct LtsBounds {
  std::size_t max_states = 2000;
  std::size_t max_depth = 64;
  int repl_unfold = 3;  // replication copies along any single path
};

// reachable_lts keeps the configs behind the opaque state keys around for
// printing and replay.
struct PibLts {
  Lts lts;
  std::vector<Config> configs;  // aligned with lts.states
};

PibLts reachable_lts(const Config& c, const LtsBounds& bounds = {},
                     const NameSet& env = {});

}  // namespace pibwb
