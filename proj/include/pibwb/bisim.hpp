#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pibwb/lts.hpp"

namespace pibwb {

// Result of a bisimulation check. NotBisimilar carries a label sequence that,
// replayed on both systems, reaches a pair of states where some label is
// enabled on exactly one side. BoundedOnly means exploration was cut (the
// input had truncated states close enough to matter) and reports the depth up
// to which behaviour was verified.
enum class VerdictKind { Bisimilar, NotBisimilar, BoundedOnly };

struct Verdict {
  VerdictKind kind = VerdictKind::Bisimilar;
  std::vector<std::string> witness;  // NotBisimilar
  size_t depth = 0;                  // BoundedOnly

  static Verdict bisimilar() { return {}; }
  static Verdict not_bisimilar(std::vector<std::string> w) {
    return {VerdictKind::NotBisimilar, std::move(w), 0};
  }
  static Verdict bounded(size_t d) { return {VerdictKind::BoundedOnly, {}, d}; }
};

// Thrown when the two label alphabets cannot describe the same system: a
// label head appears on both sides with different shapes. Disjoint alphabets
// are fine (that is just non-bisimilarity); "in c" versus "in c d" is not.
struct LabelMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Strong bisimilarity of the two initial states, by partition refinement on
// the disjoint union of the state sets.
Verdict strong_bisim(const Lts& a, const Lts& b);

// Weak bisimilarity: both systems are saturated with tau-closed edges and the
// saturated systems are compared strongly. "tau" is the silent label.
Verdict weak_bisim(const Lts& a, const Lts& b);

// The saturation step of weak_bisim, exposed so tests can replay witnesses on
// the same systems the comparison actually ran on. Every state gets a
// reflexive tau edge, and s --l--> t whenever s ==tau*==> . --l--> . ==tau*==> t.
Lts saturate(const Lts& l);

}  // namespace pibwb
