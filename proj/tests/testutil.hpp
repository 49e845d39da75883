// Shared helpers for the test binaries: a deterministic RNG (we avoid the
// std distributions on purpose, their sequences differ across libstdc++
// versions) and a tiny random term generator.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pibwb/canon.hpp"
#include "pibwb/print.hpp"
#include "pibwb/term.hpp"

namespace tu {

struct Rng {
  uint64_t s;
  explicit Rng(uint64_t seed) : s(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  uint64_t next() {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return s;
  }
  // uniform-ish in [0, n)
  uint64_t below(uint64_t n) { return n ? next() % n : 0; }
  int irange(int lo, int hi) { return lo + (int)below((uint64_t)(hi - lo + 1)); }
  bool chance(int pct) { return (int)below(100) < pct; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }
};

inline pibwb::TermPtr rnd_term(Rng& r, int depth, const std::vector<pibwb::Name>& names) {
  using namespace pibwb;
  if (depth <= 0) return nil();
  switch (r.below(8)) {
    case 0:
      return nil();
    case 1:
    case 2: {  // prefix
      Prefix p;
      int k = r.irange(0, 2);
      if (k == 0) {
        p = in1(r.pick(names), r.pick(names));
      } else if (k == 1) {
        p = out1(r.pick(names), r.pick(names));
      } else {
        p = tau();
      }
      return seq(p, rnd_term(r, depth - 1, names));
    }
    case 3: {  // binary choice of prefixed branches
      auto mk_branch = [&]() -> Branch {
        Prefix p = r.chance(50) ? in1(r.pick(names), r.pick(names))
                                : out1(r.pick(names), r.pick(names));
        return {p, rnd_term(r, depth - 1, names)};
      };
      return choice({mk_branch(), mk_branch()});
    }
    case 4:
    case 5:
      return par2(rnd_term(r, depth - 1, names), rnd_term(r, depth - 1, names));
    case 6:
      return nu(r.pick(names), rnd_term(r, depth - 1, names));
    default:
      return r.chance(40) ? repl(rnd_term(r, depth - 1, names))
                          : rnd_term(r, depth - 1, names);
  }
}

// structure-shuffling congruence preserver: permutes parallel components and
// choice branches, optionally alpha-renames binders
inline pibwb::TermPtr shuffle_term(Rng& r, const pibwb::TermPtr& t, bool alpha, int& ctr) {
  using namespace pibwb;
  return std::visit(
      [&](auto&& n) -> TermPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ChoiceT>) {
          std::vector<Branch> bs;
          for (auto& br : n.branches) bs.push_back({br.pre, shuffle_term(r, br.cont, alpha, ctr)});
          for (size_t i = bs.size(); i > 1; --i) std::swap(bs[i - 1], bs[r.below(i)]);
          return choice(std::move(bs));
        } else if constexpr (std::is_same_v<T, ParT>) {
          std::vector<TermPtr> ps;
          for (auto& p : n.parts) ps.push_back(shuffle_term(r, p, alpha, ctr));
          for (size_t i = ps.size(); i > 1; --i) std::swap(ps[i - 1], ps[r.below(i)]);
          return par(std::move(ps));
        } else if constexpr (std::is_same_v<T, NewT>) {
          TermPtr body = shuffle_term(r, n.body, alpha, ctr);
          if (alpha && r.chance(60)) {
            Name nn = "zz" + std::to_string(ctr++);
            return nu(nn, subst_raw(body, nn, n.name));
          }
          return nu(n.name, body);
        } else if constexpr (std::is_same_v<T, NewBufT>) {
          TermPtr body = shuffle_term(r, n.body, alpha, ctr);
          if (alpha && r.chance(60)) {
            Name nn = "zz" + std::to_string(ctr++);
            return nubuf(nn, n.cap, subst_raw(body, nn, n.name), n.mark);
          }
          return nubuf(n.name, n.cap, body, n.mark);
        } else if constexpr (std::is_same_v<T, ReplT>) {
          return repl(shuffle_term(r, n.body, alpha, ctr));
        } else if constexpr (std::is_same_v<T, TestT>) {
          return mk(TestT{n.op, n.lhs, n.rhs, shuffle_term(r, n.then_b, alpha, ctr),
                          shuffle_term(r, n.else_b, alpha, ctr)});
        } else {
          return t;
        }
      },
      t->v);
}

// Independent alpha-equivalence check via De Bruijn conversion. Used as the
// oracle against which canonical-form equality is validated.
namespace db {

struct Env {
  std::vector<pibwb::Name> stack;
  std::string code(const pibwb::Name& n) const {
    for (size_t i = stack.size(); i-- > 0;)
      if (stack[i] == n) return "b" + std::to_string(stack.size() - 1 - i);
    return "f" + n;
  }
};

inline std::string enc(const pibwb::TermPtr& t, Env env);

inline std::string enc_prefix_cont(const pibwb::Prefix& p, const pibwb::TermPtr& cont, Env env) {
  using namespace pibwb;
  std::string o;
  if (p.kind == PrefixKind::Input) {
    o = "i(" + env.code(p.subject) + ")";
    for (auto& x : p.names) env.stack.push_back(x);
  } else if (p.kind == PrefixKind::Output) {
    o = "o(" + env.code(p.subject);
    for (auto& x : p.names) o += "," + env.code(x);
    o += ")";
  } else {
    o = "t";
  }
  o += (p.mark == Mark::None ? "" : p.mark == Mark::Sim ? "*" : "**");
  return o + "." + enc(cont, env);
}

inline std::string enc(const pibwb::TermPtr& t, Env env) {
  using namespace pibwb;
  return std::visit(
      [&](auto&& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ChoiceT>) {
          std::string o = "+[";
          for (auto& br : n.branches) o += enc_prefix_cont(br.pre, br.cont, env) + ";";
          return o + "]";
        } else if constexpr (std::is_same_v<T, ParT>) {
          std::string o = "|[";
          for (auto& p : n.parts) o += enc(p, env) + ";";
          return o + "]";
        } else if constexpr (std::is_same_v<T, NewT>) {
          Env e2 = env;
          e2.stack.push_back(n.name);
          return "n." + enc(n.body, e2);
        } else if constexpr (std::is_same_v<T, NewBufT>) {
          Env e2 = env;
          e2.stack.push_back(n.name);
          return "nb:" + pibwb::print_capacity(n.cap) + "." + enc(n.body, e2);
        } else if constexpr (std::is_same_v<T, ReplT>) {
          return "!" + enc(n.body, env);
        } else if constexpr (std::is_same_v<T, TestT>) {
          return "?" + std::string(n.op == TestOp::Eq ? "=" : "<") + env.code(n.lhs) + "," +
                 env.code(n.rhs) + "{" + enc(n.then_b, env) + "}{" + enc(n.else_b, env) + "}";
        } else {
          std::string o = "F:" + pibwb::print_capacity(n.cap) + "[";
          for (auto& [a, b] : n.queue) o += env.code(a) + "," + env.code(b) + ";";
          return o + "]" + env.code(n.in_name) + "," + env.code(n.out_name);
        }
      },
      t->v);
}

}  // namespace db

// alpha-equivalence oracle (exact structural match modulo bound names)
inline bool alpha_eq(const pibwb::TermPtr& a, const pibwb::TermPtr& b) {
  return db::enc(a, {}) == db::enc(b, {});
}

}  // namespace tu
