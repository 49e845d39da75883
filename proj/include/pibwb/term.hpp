// Term representation for the buffered pi calculus and its polyadic target.
//
// One AST serves both calculi: prefixes carry a vector of names (binders for
// inputs, objects for outputs). Monadic terms keep the vector at length 1;
// the polyadic backend uses length 2 throughout. Terms are immutable and
// shared; all operations build new nodes.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace pibwb {

using Name = std::string;
using NameSet = std::set<Name>;

// Simulation markers for encoded programs (Go / Erlang frontends). SimIfTrue
// marks the receive-commit input: the induced transition counts as simulating
// only when the transmitted object is the atom 'true'.
enum class Mark : uint8_t { None, Sim, SimIfTrue };

enum class PrefixKind : uint8_t { Input, Output, Tau };

struct Prefix {
  PrefixKind kind = PrefixKind::Tau;
  Name subject;             // empty for Tau
  std::vector<Name> names;  // Input: binders; Output: objects; Tau: empty
  Mark mark = Mark::None;

  bool operator==(const Prefix&) const = default;
};

// Buffer capacity; inf is needed by the Erlang encoding's (nu b':inf).
struct Capacity {
  bool infinite = false;
  long long n = 0;  // meaningful when !infinite; always >= 1 then

  static Capacity inf() { return Capacity{true, 0}; }
  static Capacity of(long long k) { return Capacity{false, k}; }
  // one more entry fits a queue currently holding len elements
  bool allows(size_t len) const { return infinite || (long long)len < n; }
  bool operator==(const Capacity&) const = default;
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Branch {
  Prefix pre;
  TermPtr cont;
};

// Nil is Choice with no branches.
struct ChoiceT {
  std::vector<Branch> branches;
};
struct ParT {
  std::vector<TermPtr> parts;
};
struct NewT {
  Name name;
  TermPtr body;
};
struct NewBufT {
  Name name;
  Capacity cap;
  TermPtr body;
  Mark mark = Mark::None;
};
struct ReplT {
  TermPtr body;
};
// Internal conditional used by the Erlang encoding (ground-name test fired as
// a tau step). Not part of the surface pi_b fragment.
enum class TestOp : uint8_t { Eq, Lt };
struct TestT {
  TestOp op;
  Name lhs, rhs;
  TermPtr then_b, else_b;
};
// Parametric buffer agent of the polyadic backend, expanded on demand.
struct FAgentT {
  Capacity cap;
  std::vector<std::pair<Name, Name>> queue;  // name pairs, oldest first
  Name in_name, out_name;                    // (b1, b2): output on b1, input on b2
};

using TermV = std::variant<ChoiceT, ParT, NewT, NewBufT, ReplT, TestT, FAgentT>;

struct Term {
  TermV v;
  explicit Term(TermV val) : v(std::move(val)) {}
};

inline TermPtr mk(TermV v) { return std::make_shared<const Term>(std::move(v)); }

inline TermPtr nil() { return mk(ChoiceT{}); }
inline bool is_nil(const TermPtr& t) {
  auto* c = std::get_if<ChoiceT>(&t->v);
  return c && c->branches.empty();
}

inline TermPtr choice(std::vector<Branch> bs) { return mk(ChoiceT{std::move(bs)}); }
inline TermPtr seq(Prefix p, TermPtr cont) {
  return choice({Branch{std::move(p), std::move(cont)}});
}
inline TermPtr par(std::vector<TermPtr> ps) { return mk(ParT{std::move(ps)}); }
inline TermPtr par2(TermPtr a, TermPtr b) { return mk(ParT{{std::move(a), std::move(b)}}); }
inline TermPtr nu(Name n, TermPtr body) { return mk(NewT{std::move(n), std::move(body)}); }
inline TermPtr nubuf(Name n, Capacity c, TermPtr body, Mark m = Mark::None) {
  return mk(NewBufT{std::move(n), c, std::move(body), m});
}
inline TermPtr repl(TermPtr body) { return mk(ReplT{std::move(body)}); }

inline Prefix in1(Name subj, Name binder, Mark m = Mark::None) {
  return Prefix{PrefixKind::Input, std::move(subj), {std::move(binder)}, m};
}
inline Prefix out1(Name subj, Name obj, Mark m = Mark::None) {
  return Prefix{PrefixKind::Output, std::move(subj), {std::move(obj)}, m};
}
inline Prefix tau(Mark m = Mark::None) { return Prefix{PrefixKind::Tau, "", {}, m}; }

// ---------------------------------------------------------------------------
// Buffer stores

struct BufferEntry {
  Name name;
  bool local = false;  // local entries render as (new c)
  bool operator==(const BufferEntry&) const = default;
};

struct Buffer {
  Capacity cap;
  std::vector<BufferEntry> queue;  // index 0 is the oldest element
  bool operator==(const Buffer&) const = default;
};

using BufferStore = std::map<Name, Buffer>;

struct Config {
  TermPtr process;
  BufferStore store;
};

}  // namespace pibwb
