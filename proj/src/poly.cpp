#include "pibwb/poly.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "pibwb/canon.hpp"
#include "pibwb/engine.hpp"

namespace pibwb {

NamePair translate_name(const Name& n, bool buffered) {
  if (!buffered) return {n, n};
  return {n + "!i", n + "!o"};
}

TermPtr buffer_agent(const Capacity& cap, const std::vector<std::pair<Name, Name>>& held,
                     const NamePair& np) {
  if (!cap.infinite && (long long)held.size() > cap.n)
    throw CapacityExceeded("buffer agent holds " + std::to_string(held.size()) +
                           " pairs, capacity is " + std::to_string(cap.n));
  NameSet used{np.input_name, np.output_name};
  for (const auto& [a, b] : held) {
    used.insert(a);
    used.insert(b);
  }
  Name x1 = fresh_name("x1", used);
  used.insert(x1);
  Name x2 = fresh_name("x2", used);

  auto cont = [&](std::vector<std::pair<Name, Name>> q) {
    return mk(FAgentT{cap, std::move(q), np.input_name, np.output_name});
  };

  std::vector<Branch> bs;
  if (cap.allows(held.size())) {
    auto grown = held;
    grown.emplace_back(x1, x2);
    bs.push_back({Prefix{PrefixKind::Input, np.output_name, {x1, x2}, Mark::None},
                  cont(std::move(grown))});
  }
  if (!held.empty()) {
    auto rest = std::vector<std::pair<Name, Name>>(held.begin() + 1, held.end());
    bs.push_back({Prefix{PrefixKind::Output, np.input_name, {held[0].first, held[0].second},
                         Mark::None},
                  cont(std::move(rest))});
  }
  return choice(std::move(bs));
}

namespace {

// split names translate into distinct component pairs: buffered free names,
// buffer binders, and every input binder (a received name may be buffered, so
// both projections must be bindable separately)
NamePair pair_for(const Name& n, const NameSet& split) {
  return translate_name(n, split.count(n) > 0);
}

TermPtr enc(const TermPtr& t, NameSet split) {
  return std::visit(
      [&](auto&& n) -> TermPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ChoiceT>) {
          std::vector<Branch> bs;
          for (const auto& br : n.branches) {
            const Prefix& p = br.pre;
            if (p.kind == PrefixKind::Tau) {
              bs.push_back({tau(p.mark), enc(br.cont, split)});
              continue;
            }
            NamePair sp = pair_for(p.subject, split);
            if (p.kind == PrefixKind::Input) {
              NameSet inner = split;
              std::vector<Name> binders;
              for (const auto& x : p.names) {
                inner.insert(x);
                NamePair xp = translate_name(x, true);
                binders.push_back(xp.input_name);
                binders.push_back(xp.output_name);
              }
              bs.push_back({Prefix{PrefixKind::Input, sp.input_name, std::move(binders), p.mark},
                            enc(br.cont, std::move(inner))});
            } else {
              std::vector<Name> objs;
              for (const auto& d : p.names) {
                NamePair dp = pair_for(d, split);
                objs.push_back(dp.input_name);
                objs.push_back(dp.output_name);
              }
              bs.push_back({Prefix{PrefixKind::Output, sp.output_name, std::move(objs), p.mark},
                            enc(br.cont, split)});
            }
          }
          return choice(std::move(bs));
        } else if constexpr (std::is_same_v<T, ParT>) {
          std::vector<TermPtr> ps;
          for (const auto& p : n.parts) ps.push_back(enc(p, split));
          return par(std::move(ps));
        } else if constexpr (std::is_same_v<T, NewT>) {
          NameSet inner = split;
          inner.erase(n.name);
          return nu(n.name, enc(n.body, std::move(inner)));
        } else if constexpr (std::is_same_v<T, NewBufT>) {
          NameSet inner = split;
          inner.insert(n.name);
          NamePair bp = translate_name(n.name, true);
          TermPtr agent = mk(FAgentT{n.cap, {}, bp.input_name, bp.output_name});
          // the tau mirrors the allocation step and keeps the step counts
          // aligned; a simulation marker on the binder rides on it
          TermPtr body = seq(tau(n.mark), par2(enc(n.body, std::move(inner)), std::move(agent)));
          return nu(bp.input_name, nu(bp.output_name, std::move(body)));
        } else if constexpr (std::is_same_v<T, ReplT>) {
          return repl(enc(n.body, std::move(split)));
        } else if constexpr (std::is_same_v<T, TestT>) {
          // ground comparisons look at one representative component;
          // injectivity of the pair map keeps the outcome unchanged
          return mk(TestT{n.op, pair_for(n.lhs, split).input_name,
                          pair_for(n.rhs, split).input_name, enc(n.then_b, split),
                          enc(n.else_b, split)});
        } else {
          throw std::logic_error("buffer agent constant in an unencoded term");
        }
      },
      t->v);
}

}  // namespace

TermPtr encode_process(const TermPtr& p, const NameSet& buffered) { return enc(p, buffered); }

TermPtr encode_config(const Config& c0) {
  Config k = canonicalize(c0);
  if (!check_validity(k))
    throw InvalidStore("local store entry not bound by any outer restriction");

  std::vector<Name> prenex;
  TermPtr body = k.process;
  while (auto* nw = std::get_if<NewT>(&body->v)) {
    prenex.push_back(nw->name);
    body = nw->body;
  }

  NameSet dom;
  for (const auto& [b, buf] : k.store) dom.insert(b);
  NameSet locals = store_local_names(k.store);

  BufferStore st = k.store;
  std::vector<Name> keep;
  std::vector<NamePair> extruded;  // outermost first
  for (const Name& c : prenex) {
    bool is_key = dom.count(c) > 0;
    if (is_key || locals.count(c)) {
      extruded.push_back(translate_name(c, is_key));
      if (locals.count(c)) st = store_substitute(st, {c, false}, {c, true});
    } else {
      keep.push_back(c);
    }
  }
  for (const auto& [b, buf] : st)
    for (const auto& e : buf.queue)
      if (e.local) throw std::logic_error("store keeps a local entry after extrusion");

  TermPtr proc = body;
  for (auto it = keep.rbegin(); it != keep.rend(); ++it) proc = nu(*it, proc);

  std::vector<TermPtr> parts{encode_process(proc, dom)};
  for (const auto& [b, buf] : st) {
    std::vector<std::pair<Name, Name>> pairs;
    for (const auto& e : buf.queue) {
      NamePair dp = translate_name(e.name, dom.count(e.name) > 0);
      pairs.emplace_back(dp.input_name, dp.output_name);
    }
    NamePair bp = translate_name(b, true);
    parts.push_back(mk(FAgentT{buf.cap, std::move(pairs), bp.input_name, bp.output_name}));
  }
  TermPtr out = parts.size() == 1 ? parts[0] : par(std::move(parts));
  for (auto it = extruded.rbegin(); it != extruded.rend(); ++it) {
    out = nu(it->output_name, std::move(out));
    if (it->input_name != it->output_name) out = nu(it->input_name, std::move(out));
  }
  return out;
}

Action translate_action(const Action& a, const NameSet& store_domain) {
  if (a.kind == ActKind::Tau) return Action::mk_tau();
  if (a.objects.size() != 1)
    throw std::logic_error("source actions carry exactly one object");
  bool bsub = store_domain.count(a.subject) > 0;
  NamePair sp = translate_name(a.subject, bsub);
  // the buffer agent answers for a buffered name, so the roles flip: the
  // environment feeds it on the output name and reads it on the input name
  Name subj = a.kind == ActKind::FreeIn ? (bsub ? sp.output_name : sp.input_name)
                                        : (bsub ? sp.input_name : sp.output_name);
  NamePair op = translate_name(a.objects[0], store_domain.count(a.objects[0]) > 0);
  bool bnd = a.kind == ActKind::BoundOut;
  Action out;
  out.kind = a.kind;
  out.subject = std::move(subj);
  out.objects = {op.input_name, op.output_name};
  out.bound = {bnd, bnd};
  return out;
}

namespace {

// Best-effort communication sanity check: a name serving as input subject at
// one arity and output subject at another could only synchronize malformed.
// Aliasing through received names is not tracked; the engine itself never
// fires a mismatched pair.
void check_arities(const TermPtr& p, std::map<Name, std::set<size_t>>& in_ar,
                   std::map<Name, std::set<size_t>>& out_ar) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ChoiceT>) {
          for (const auto& b : n.branches) {
            if (b.pre.kind == PrefixKind::Input)
              in_ar[b.pre.subject].insert(b.pre.names.size());
            else if (b.pre.kind == PrefixKind::Output)
              out_ar[b.pre.subject].insert(b.pre.names.size());
            check_arities(b.cont, in_ar, out_ar);
          }
        } else if constexpr (std::is_same_v<T, ParT>) {
          for (const auto& q : n.parts) check_arities(q, in_ar, out_ar);
        } else if constexpr (std::is_same_v<T, NewT>) {
          check_arities(n.body, in_ar, out_ar);
        } else if constexpr (std::is_same_v<T, NewBufT>) {
          check_arities(n.body, in_ar, out_ar);
        } else if constexpr (std::is_same_v<T, ReplT>) {
          check_arities(n.body, in_ar, out_ar);
        } else if constexpr (std::is_same_v<T, TestT>) {
          check_arities(n.then_b, in_ar, out_ar);
          check_arities(n.else_b, in_ar, out_ar);
        } else if constexpr (std::is_same_v<T, FAgentT>) {
          in_ar[n.out_name].insert(2);
          out_ar[n.in_name].insert(2);
        }
      },
      p->v);
}

void require_consistent_arities(const TermPtr& p) {
  std::map<Name, std::set<size_t>> in_ar, out_ar;
  check_arities(p, in_ar, out_ar);
  for (const auto& [subj, ins] : in_ar) {
    auto it = out_ar.find(subj);
    if (it == out_ar.end()) continue;
    for (size_t m : ins)
      for (size_t k : it->second)
        if (m != k)
          throw ArityMismatch("name " + subj + " used for " + std::to_string(m) +
                              "-ary input and " + std::to_string(k) + "-ary output");
  }
}

EngineCfg poly_engine_cfg(const TermPtr& p, const std::vector<NamePair>& env) {
  EngineCfg ec;
  std::set<std::pair<Name, Name>> seen;
  NameSet comp;
  for (const auto& np : env) {
    if (!seen.emplace(np.input_name, np.output_name).second) continue;
    ec.tuples2.push_back({np.input_name, np.output_name});
    comp.insert(np.input_name);
    comp.insert(np.output_name);
  }
  for (const auto& n : comp) ec.tuples1.push_back({n});
  ec.avoid = all_names(p);
  ec.avoid.insert(comp.begin(), comp.end());
  return ec;
}

}  // namespace

std::vector<PolyTransition> poly_successors(const TermPtr& p, const std::vector<NamePair>& env) {
  require_consistent_arities(p);
  auto trs = engine_successors(Config{p, {}}, poly_engine_cfg(p, env));
  std::vector<PolyTransition> out;
  out.reserve(trs.size());
  for (auto& t : trs) {
    if (!t.target.store.empty()) throw std::logic_error("polyadic step grew a store");
    out.push_back({std::move(t.action), std::move(t.target.process)});
  }
  return out;
}

PibLts poly_reachable_lts(const TermPtr& p, const LtsBounds& bounds,
                          const std::vector<NamePair>& env) {
  return explore_lts(Config{p, {}}, bounds, [&](const Config& cfg) {
    return engine_successors(cfg, poly_engine_cfg(cfg.process, env));
  });
}

std::pair<Action, TermPtr> normalize_opened(const Action& a, const TermPtr& target) {
  Action na = a;
  TermPtr nt = target;
  std::map<Name, Name> ren;
  for (size_t i = 0; i < na.objects.size(); ++i) {
    if (i < na.bound.size() && na.bound[i] && !ren.count(na.objects[i]))
      ren.emplace(na.objects[i], "%" + std::to_string(ren.size()));
  }
  for (const auto& [o, n] : ren) nt = subst_raw(nt, n, o);
  for (size_t i = 0; i < na.objects.size(); ++i)
    if (i < na.bound.size() && na.bound[i]) na.objects[i] = ren[na.objects[i]];
  return {std::move(na), std::move(nt)};
}

}  // namespace pibwb
