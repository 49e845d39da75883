// Successor derivation over the prenex decomposition of a canonical config.
//
// A canonical process is (nu c1)...(nu ck)(C1 | ... | Cm) with the components
// free of unguarded plain restrictions. The engine strips the prenex (store
// entries of bound names turn global for the duration of the derivation),
// enumerates rule instances per component plus synchronizations and global
// buffer interactions, and on exit decides per bound name: actions naming it
// as a free-output object open the restriction (the name is exported), any
// other occurrence cancels the transition, untouched names flip their store
// entries back to local.
#include "pibwb/engine.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <queue>
#include <tuple>

#include "pibwb/canon.hpp"

namespace pibwb {

NameSet Action::names() const {
  NameSet s;
  if (kind != ActKind::Tau) s.insert(subject);
  s.insert(objects.begin(), objects.end());
  return s;
}

std::string Action::label() const {
  if (kind == ActKind::Tau) return "tau";
  std::string out =
      kind == ActKind::FreeIn ? "in" : kind == ActKind::FreeOut ? "out" : "bout";
  out += " " + subject + " ";
  for (size_t i = 0; i < objects.size(); ++i) {
    if (i) out += ",";
    if (bound.size() > i && bound[i] && objects.size() > 1) out += "^";
    out += objects[i];
  }
  return out;
}

Action Action::mk_in(Name subj, Name obj) {
  return {ActKind::FreeIn, std::move(subj), {std::move(obj)}, {false}};
}
Action Action::mk_out(Name subj, Name obj) {
  return {ActKind::FreeOut, std::move(subj), {std::move(obj)}, {false}};
}
Action Action::mk_bout(Name subj, Name obj) {
  return {ActKind::BoundOut, std::move(subj), {std::move(obj)}, {true}};
}

bool ActionPattern::matches(const Action& a) const {
  if (kind != a.kind) return false;
  if (subject && (a.kind == ActKind::Tau || *subject != a.subject)) return false;
  if (object && (a.objects.empty() || *object != a.objects[0])) return false;
  return true;
}

NoMatch::NoMatch(std::size_t i)
    : std::runtime_error("no successor matches the pattern at index " + std::to_string(i)),
      index(i) {}

namespace {

struct Soup {
  std::vector<Name> prenex;
  std::vector<TermPtr> comps;
};

Soup split_prenex(const TermPtr& p) {
  Soup s;
  TermPtr cur = p;
  while (auto* n = std::get_if<NewT>(&cur->v)) {
    s.prenex.push_back(n->name);
    cur = n->body;
  }
  if (auto* pt = std::get_if<ParT>(&cur->v))
    s.comps = pt->parts;
  else if (!is_nil(cur))
    s.comps.push_back(cur);
  return s;
}

TermPtr assemble(const std::vector<Name>& prenex, std::vector<TermPtr> comps) {
  TermPtr body;
  if (comps.empty())
    body = nil();
  else if (comps.size() == 1)
    body = std::move(comps[0]);
  else
    body = par(std::move(comps));
  for (auto it = prenex.rbegin(); it != prenex.rend(); ++it) body = nu(*it, body);
  return body;
}

BufferStore strip_store(const BufferStore& b, const NameSet& pi) {
  BufferStore out = b;
  for (auto& [k, buf] : out)
    for (auto& e : buf.queue)
      if (e.local && pi.count(e.name)) e.local = false;
  return out;
}

// Simultaneous capture-avoiding substitution through reserved temporaries, so
// a pool name equal to a later binder cannot be rewritten twice.
TermPtr subst_multi(TermPtr t, const std::vector<Name>& from, const std::vector<Name>& to) {
  if (from.size() == 1) return subst_raw(t, to[0], from[0]);
  std::vector<Name> tmp;
  tmp.reserve(from.size());
  for (size_t i = 0; i < from.size(); ++i) {
    tmp.push_back("#s" + std::to_string(i));
    t = subst_raw(t, tmp.back(), from[i]);
  }
  for (size_t i = 0; i < from.size(); ++i) t = subst_raw(t, to[i], tmp[i]);
  return t;
}

// Replication copies get every binder renamed to a reserved token, so two
// copies (and the surrounding soup) can never collide on a bound name.
TermPtr refresh(const TermPtr& t, std::map<Name, Name> env, int& ctr) {
  auto look = [&env](const Name& x) {
    auto it = env.find(x);
    return it == env.end() ? x : it->second;
  };
  return std::visit(
      [&](auto&& n) -> TermPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ChoiceT>) {
          std::vector<Branch> bs;
          bs.reserve(n.branches.size());
          for (auto& br : n.branches) {
            Prefix p = br.pre;
            p.subject = p.subject.empty() ? p.subject : look(p.subject);
            auto env2 = env;
            if (p.kind == PrefixKind::Input) {
              for (auto& bn : p.names) {
                Name fx = "#u" + std::to_string(ctr++);
                env2[bn] = fx;
                bn = fx;
              }
            } else {
              for (auto& o : p.names) o = look(o);
            }
            bs.push_back({std::move(p), refresh(br.cont, env2, ctr)});
          }
          return choice(std::move(bs));
        } else if constexpr (std::is_same_v<T, ParT>) {
          std::vector<TermPtr> ps;
          ps.reserve(n.parts.size());
          for (auto& p : n.parts) ps.push_back(refresh(p, env, ctr));
          return par(std::move(ps));
        } else if constexpr (std::is_same_v<T, NewT>) {
          Name fx = "#u" + std::to_string(ctr++);
          auto env2 = env;
          env2[n.name] = fx;
          return nu(fx, refresh(n.body, env2, ctr));
        } else if constexpr (std::is_same_v<T, NewBufT>) {
          Name fx = "#u" + std::to_string(ctr++);
          auto env2 = env;
          env2[n.name] = fx;
          return nubuf(fx, n.cap, refresh(n.body, env2, ctr), n.mark);
        } else if constexpr (std::is_same_v<T, ReplT>) {
          return repl(refresh(n.body, env, ctr));
        } else if constexpr (std::is_same_v<T, TestT>) {
          return mk(TestT{n.op, look(n.lhs), look(n.rhs), refresh(n.then_b, env, ctr),
                          refresh(n.else_b, env, ctr)});
        } else {
          FAgentT f = n;
          for (auto& [a, b] : f.queue) {
            a = look(a);
            b = look(b);
          }
          f.in_name = look(f.in_name);
          f.out_name = look(f.out_name);
          return mk(std::move(f));
        }
      },
      t->v);
}

std::optional<long long> as_int(const Name& s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// One rule instance local to a single component.
struct CAct {
  Action act;
  TermPtr residue;
  BufferStore store;
  std::vector<std::pair<Mark, Name>> consumed;
};

// Input capability, paired with a complementary free output by the
// synchronization step.
struct InCap {
  Name subject;
  size_t arity;
  Mark mark;
  std::function<TermPtr(const std::vector<Name>&)> instantiate;
};

void comp_actions(const TermPtr& comp, const BufferStore& store, const EngineCfg& ec,
                  std::vector<CAct>& acts, std::vector<InCap>& ins) {
  std::visit(
      [&](auto&& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ChoiceT>) {
          for (const auto& br : n.branches) {
            const Prefix& pre = br.pre;
            std::vector<std::pair<Mark, Name>> marked;
            if (pre.kind == PrefixKind::Tau) {
              if (pre.mark != Mark::None) marked.emplace_back(pre.mark, "");
              acts.push_back({Action::mk_tau(), br.cont, store, std::move(marked)});
              continue;
            }
            auto it = store.find(pre.subject);
            if (pre.kind == PrefixKind::Input) {
              if (it != store.end()) {
                if (pre.names.size() != 1)
                  throw std::logic_error("buffered input must be monadic");
                if (it->second.queue.empty()) continue;
                BufferEntry head = it->second.queue.front();
                BufferStore ns = store;
                auto& q = ns[pre.subject].queue;
                q.erase(q.begin());
                if (pre.mark != Mark::None) marked.emplace_back(pre.mark, head.name);
                acts.push_back({Action::mk_tau(), subst_raw(br.cont, head.name, pre.names[0]),
                                std::move(ns), std::move(marked)});
              } else {
                const auto& tuples = pre.names.size() == 1 ? ec.tuples1 : ec.tuples2;
                for (const auto& tu : tuples) {
                  if (tu.size() != pre.names.size()) continue;
                  Action a{ActKind::FreeIn, pre.subject, tu,
                           std::vector<bool>(tu.size(), false)};
                  std::vector<std::pair<Mark, Name>> cm;
                  if (pre.mark != Mark::None) cm.emplace_back(pre.mark, tu[0]);
                  acts.push_back(
                      {std::move(a), subst_multi(br.cont, pre.names, tu), store, std::move(cm)});
                }
                ins.push_back({pre.subject, pre.names.size(), pre.mark,
                               [cont = br.cont, binders = pre.names](const std::vector<Name>& objs) {
                                 return subst_multi(cont, binders, objs);
                               }});
              }
            } else {
              if (it != store.end()) {
                if (pre.names.size() != 1)
                  throw std::logic_error("buffered output must be monadic");
                if (!it->second.cap.allows(it->second.queue.size())) continue;
                BufferStore ns = store;
                ns[pre.subject].queue.push_back({pre.names[0], false});
                if (pre.mark != Mark::None) marked.emplace_back(pre.mark, pre.names[0]);
                acts.push_back({Action::mk_tau(), br.cont, std::move(ns), std::move(marked)});
              } else {
                Action a{ActKind::FreeOut, pre.subject, pre.names,
                         std::vector<bool>(pre.names.size(), false)};
                if (pre.mark != Mark::None) marked.emplace_back(pre.mark, pre.names[0]);
                acts.push_back({std::move(a), br.cont, store, std::move(marked)});
              }
            }
          }
        } else if constexpr (std::is_same_v<T, NewBufT>) {
          if (store.count(n.name))
            throw std::logic_error("buffer allocation collides with an existing key");
          BufferStore ns = store;
          ns[n.name] = Buffer{n.cap, {}};
          std::vector<std::pair<Mark, Name>> marked;
          if (n.mark != Mark::None) marked.emplace_back(n.mark, "");
          acts.push_back({Action::mk_tau(), nu(n.name, n.body), std::move(ns), std::move(marked)});
        } else if constexpr (std::is_same_v<T, TestT>) {
          bool holds;
          if (n.op == TestOp::Eq) {
            holds = n.lhs == n.rhs;
          } else {
            auto l = as_int(n.lhs), r = as_int(n.rhs);
            holds = l && r && *l < *r;
          }
          acts.push_back({Action::mk_tau(), holds ? n.then_b : n.else_b, store, {}});
        } else if constexpr (std::is_same_v<T, FAgentT>) {
          // the agent receives along its second parameter and sends along its
          // first, mirroring how a process outputs on b2 and inputs on b1
          if (n.cap.allows(n.queue.size())) {
            for (const auto& tu : ec.tuples2) {
              if (tu.size() != 2) continue;
              FAgentT nf = n;
              nf.queue.emplace_back(tu[0], tu[1]);
              acts.push_back({Action{ActKind::FreeIn, n.out_name, tu, {false, false}},
                              mk(std::move(nf)), store, {}});
            }
            ins.push_back({n.out_name, 2, Mark::None,
                           [agent = n](const std::vector<Name>& objs) {
                             FAgentT nf = agent;
                             nf.queue.emplace_back(objs[0], objs[1]);
                             return mk(std::move(nf));
                           }});
          }
          if (!n.queue.empty()) {
            auto [h1, h2] = n.queue.front();
            FAgentT nf = n;
            nf.queue.erase(nf.queue.begin());
            acts.push_back({Action{ActKind::FreeOut, n.in_name, {h1, h2}, {false, false}},
                            mk(std::move(nf)), store, {}});
          }
        } else if constexpr (std::is_same_v<T, ReplT>) {
          // replication is handled by the unfolding pass
        } else {
          throw std::logic_error("soup component is not in canonical form");
        }
      },
      comp->v);
}

struct Raw {
  Action act;
  std::vector<TermPtr> comps;
  BufferStore store;
  std::vector<Name> prenex;
  std::vector<std::pair<Mark, Name>> consumed;
  int unfolds = 0;
};

// Enumerates rule instances for one soup. Each unfolding level contributes a
// range of copy indices; an action is kept only if it involves a component
// from every range, otherwise the same derivation already exists at a
// shallower level with the idle copies left folded.
void derive(const std::vector<TermPtr>& comps, const std::vector<Name>& prenex,
            const BufferStore& stripped, const EngineCfg& ec, int budget, int unfolds,
            const std::vector<std::pair<size_t, size_t>>& required, int& refresh_ctr,
            std::vector<Raw>& out) {
  const size_t n = comps.size();
  std::vector<std::vector<CAct>> acts(n);
  std::vector<std::vector<InCap>> ins(n);
  for (size_t i = 0; i < n; ++i) comp_actions(comps[i], stripped, ec, acts[i], ins[i]);

  auto covered = [&](std::initializer_list<size_t> ps) {
    for (const auto& [lo, hi] : required) {
      bool hit = false;
      for (size_t p : ps) hit |= (p >= lo && p < hi);
      if (!hit) return false;
    }
    return true;
  };

  auto with_residue = [&](size_t i, const TermPtr& r) {
    std::vector<TermPtr> cs = comps;
    cs[i] = r;
    return cs;
  };

  for (size_t i = 0; i < n; ++i) {
    if (!covered({i})) continue;
    for (const auto& a : acts[i])
      out.push_back(Raw{a.act, with_residue(i, a.residue), a.store, prenex, a.consumed, unfolds});
  }

  // synchronization of complementary unbuffered actions; the store is shared
  // and unchanged on both sides
  for (size_t i = 0; i < n; ++i)
    for (const auto& a : acts[i]) {
      if (a.act.kind != ActKind::FreeOut) continue;
      for (size_t j = 0; j < n; ++j) {
        if (j == i || !covered({i, j})) continue;
        for (const auto& cap : ins[j]) {
          if (cap.subject != a.act.subject || cap.arity != a.act.objects.size()) continue;
          auto cs = with_residue(i, a.residue);
          cs[j] = cap.instantiate(a.act.objects);
          auto cm = a.consumed;
          if (cap.mark != Mark::None) cm.emplace_back(cap.mark, a.act.objects[0]);
          out.push_back(Raw{Action::mk_tau(), std::move(cs), stripped, prenex, std::move(cm),
                            unfolds});
        }
      }
    }

  // global buffer interactions with the environment: receivable while there
  // is room, the oldest entry is observable; only on buffers whose name the
  // process does not bind
  if (required.empty()) {
    NameSet pi(prenex.begin(), prenex.end());
    for (const auto& [k, buf] : stripped) {
      if (pi.count(k)) continue;
      if (buf.cap.allows(buf.queue.size()))
        for (const auto& tu : ec.tuples1) {
          BufferStore ns = stripped;
          ns[k].queue.push_back({tu[0], false});
          out.push_back(Raw{Action::mk_in(k, tu[0]), comps, std::move(ns), prenex, {}, unfolds});
        }
      if (!buf.queue.empty()) {
        BufferStore ns = stripped;
        ns[k].queue.erase(ns[k].queue.begin());
        out.push_back(
            Raw{Action::mk_out(k, buf.queue.front().name), comps, std::move(ns), prenex, {}, unfolds});
      }
    }
  }

  if (budget > 0)
    for (size_t k = 0; k < n; ++k)
      if (auto* r = std::get_if<ReplT>(&comps[k]->v)) {
        TermPtr copy = refresh(r->body, {}, refresh_ctr);
        Soup cs = split_prenex(copy);
        if (cs.comps.empty()) continue;
        std::vector<TermPtr> ext = comps;
        ext.insert(ext.end(), cs.comps.begin(), cs.comps.end());
        std::vector<Name> extp = prenex;
        extp.insert(extp.end(), cs.prenex.begin(), cs.prenex.end());
        auto req2 = required;
        req2.emplace_back(n, ext.size());
        derive(ext, extp, stripped, ec, budget - 1, unfolds + 1, req2, refresh_ctr, out);
      }
}

std::optional<Transition> finalize(const Config& src, Raw r, const NameSet& avoid_base) {
  NameSet pi(r.prenex.begin(), r.prenex.end());
  if (r.act.kind != ActKind::Tau && pi.count(r.act.subject)) return std::nullopt;

  std::vector<Name> opened;
  for (size_t i = 0; i < r.act.objects.size(); ++i) {
    const Name& o = r.act.objects[i];
    if (!pi.count(o)) continue;
    if (r.act.kind == ActKind::FreeIn) return std::nullopt;
    r.act.bound[i] = true;
    if (std::find(opened.begin(), opened.end(), o) == opened.end()) opened.push_back(o);
  }
  if (!opened.empty()) r.act.kind = ActKind::BoundOut;

  NameSet opened_set(opened.begin(), opened.end());
  std::vector<Name> pi_final;
  for (const auto& nm : r.prenex)
    if (!opened_set.count(nm)) pi_final.push_back(nm);

  // names still bound flip their store entries back to local; opened ones
  // stay global
  NameSet bound_set(pi_final.begin(), pi_final.end());
  BufferStore st = std::move(r.store);
  for (auto& [k, buf] : st)
    for (auto& e : buf.queue)
      if (!e.local && bound_set.count(e.name)) e.local = true;

  // exported names move to the first free tokens of the w series
  if (!opened.empty()) {
    NameSet avoid = avoid_base;
    avoid.insert(r.prenex.begin(), r.prenex.end());
    for (const auto& c : r.comps) {
      auto an = all_names(c);
      avoid.insert(an.begin(), an.end());
    }
    for (const auto& [k, buf] : st) {
      avoid.insert(k);
      for (const auto& e : buf.queue) avoid.insert(e.name);
    }
    avoid.insert(r.act.subject);
    avoid.insert(r.act.objects.begin(), r.act.objects.end());
    int wi = 0;
    for (const auto& old : opened) {
      Name w;
      do {
        w = "w" + std::to_string(wi++);
      } while (avoid.count(w));
      avoid.insert(w);
      for (auto& o : r.act.objects)
        if (o == old) o = w;
      for (auto& c : r.comps) c = subst_raw(c, w, old);
      st = store_rename(st, w, old);
    }
  }

  Config tgt = canonicalize({assemble(pi_final, std::move(r.comps)), std::move(st)});
  if (!check_validity(tgt)) throw std::logic_error("derived transition broke store validity");
  return Transition{src, std::move(r.act), std::move(tgt), r.unfolds, std::move(r.consumed)};
}

}  // namespace

std::vector<Transition> engine_successors(const Config& c0, const EngineCfg& ec) {
  Config c = canonicalize(c0);
  if (!check_validity(c))
    throw InvalidStore("local store entry not bound by any outer restriction");
  Soup s = split_prenex(c.process);

  // A restriction binder spelled like an offered input token would capture
  // that token, killing the transition. Alpha-variants have to produce the
  // same action set, so the binder steps aside instead.
  NameSet offered;
  for (const auto& tp : ec.tuples1) offered.insert(tp.begin(), tp.end());
  for (const auto& tp : ec.tuples2) offered.insert(tp.begin(), tp.end());
  BufferStore store_r = c.store;
  {
    NameSet taken = all_names(c.process);
    auto sn = store_names(c.store);
    taken.insert(sn.begin(), sn.end());
    taken.insert(offered.begin(), offered.end());
    taken.insert(ec.avoid.begin(), ec.avoid.end());
    for (auto& p : s.prenex) {
      if (!offered.count(p)) continue;
      Name np = fresh_name(p, taken);
      taken.insert(np);
      for (auto& comp : s.comps) comp = subst_raw(comp, np, p);
      store_r = store_rename(store_r, np, p);
      p = np;
    }
  }

  NameSet pi(s.prenex.begin(), s.prenex.end());
  BufferStore stripped = strip_store(store_r, pi);

  std::vector<Raw> raws;
  int refresh_ctr = 0;
  derive(s.comps, s.prenex, stripped, ec, ec.unfold_budget, 0, {}, refresh_ctr, raws);

  struct Keyed {
    Transition t;
    std::string key;
  };
  std::vector<Keyed> ks;
  ks.reserve(raws.size());
  for (auto& r : raws)
    if (auto t = finalize(c, std::move(r), ec.avoid)) {
      std::string key = canonical_key(t->target);
      ks.push_back({std::move(*t), std::move(key)});
    }
  std::sort(ks.begin(), ks.end(), [](const Keyed& a, const Keyed& b) {
    return std::tie(a.t.action, a.key, a.t.unfolds) < std::tie(b.t.action, b.key, b.t.unfolds);
  });
  std::vector<Transition> out;
  out.reserve(ks.size());
  std::string last_key;
  for (auto& k : ks) {
    if (!out.empty() && out.back().action == k.t.action && last_key == k.key) continue;
    last_key = k.key;
    out.push_back(std::move(k.t));
  }
  return out;
}

std::vector<Transition> successors(const Config& c, const NameSet& env) {
  Config k = canonicalize(c);
  if (!check_validity(k))
    throw InvalidStore("local store entry not bound by any outer restriction");
  // The instantiation pool holds the names the environment could know: the
  // interface of the configuration, not its bound names. Feeding a bound
  // name's spelling is indistinguishable from feeding the fresh
  // representative, and the junk edges would make configurations with
  // different internal sizes incomparable.
  NameSet pool = env;
  auto pn = free_names(k.process);
  pool.insert(pn.begin(), pn.end());
  NameSet ln = local_names(k.process);
  for (const auto& [key, buf] : k.store) {
    if (!ln.count(key)) pool.insert(key);
    for (const auto& e : buf.queue)
      if (!e.local) pool.insert(e.name);
  }
  int wi = 0;
  Name w;
  do {
    w = "w" + std::to_string(wi++);
  } while (pool.count(w));
  pool.insert(w);

  EngineCfg ec;
  ec.tuples1.reserve(pool.size());
  for (const auto& nm : pool) ec.tuples1.push_back({nm});
  // the representative only reserves its token for inputs; an opened name may
  // reuse it, the two never meet inside one action
  ec.avoid = pool;
  ec.avoid.erase(w);
  return engine_successors(k, ec);
}

std::vector<Transition> run_trace(const Config& c, const std::vector<ActionPattern>& script,
                                  const NameSet& env) {
  std::vector<Transition> out;
  Config cur = canonicalize(c);
  for (size_t i = 0; i < script.size(); ++i) {
    auto succ = successors(cur, env);
    auto it = std::find_if(succ.begin(), succ.end(),
                           [&](const Transition& t) { return script[i].matches(t.action); });
    if (it == succ.end()) throw NoMatch(i);
    cur = it->target;
    out.push_back(std::move(*it));
  }
  return out;
}

PibLts explore_lts(const Config& c0, const LtsBounds& bounds,
                   const std::function<std::vector<Transition>(const Config&)>& step) {
  PibLts out;
  std::map<std::string, std::size_t> index;
  auto intern = [&](Config cfg) {
    std::string key = canonical_key(cfg);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    std::size_t id = out.lts.states.size();
    index.emplace(key, id);
    out.lts.states.push_back(std::move(key));
    out.configs.push_back(std::move(cfg));
    return id;
  };
  intern(canonicalize(c0));
  out.lts.initial = 0;

  struct QE {
    int unfolds;
    std::size_t depth;
    std::size_t seq;
    std::size_t state;
  };
  auto worse = [](const QE& a, const QE& b) {
    return std::tie(a.unfolds, a.depth, a.seq) > std::tie(b.unfolds, b.depth, b.seq);
  };
  std::priority_queue<QE, std::vector<QE>, decltype(worse)> pq(worse);
  std::size_t seq = 0;
  pq.push({0, 0, seq++, 0});
  std::vector<bool> expanded;

  while (!pq.empty()) {
    QE cur = pq.top();
    pq.pop();
    if (expanded.size() < out.lts.states.size()) expanded.resize(out.lts.states.size(), false);
    if (expanded[cur.state]) continue;
    expanded[cur.state] = true;

    auto succ = step(out.configs[cur.state]);
    if (cur.depth >= bounds.max_depth) {
      if (!succ.empty()) out.lts.truncated.insert(cur.state);
      continue;
    }
    for (auto& tr : succ) {
      int nu_ = cur.unfolds + tr.unfolds;
      if (nu_ > bounds.repl_unfold) {
        out.lts.truncated.insert(cur.state);
        continue;
      }
      std::string key = canonical_key(tr.target);
      auto it = index.find(key);
      std::size_t t;
      if (it == index.end()) {
        if (out.lts.states.size() >= bounds.max_states) {
          out.lts.truncated.insert(cur.state);
          continue;
        }
        t = out.lts.states.size();
        out.lts.states.push_back(key);
        out.configs.push_back(tr.target);
        index.emplace(std::move(key), t);
        pq.push({nu_, cur.depth + 1, seq++, t});
      } else {
        t = it->second;
        if (t >= expanded.size() || !expanded[t]) pq.push({nu_, cur.depth + 1, seq++, t});
      }
      out.lts.edges.push_back({cur.state, tr.action.label(), t});
    }
  }
  std::sort(out.lts.edges.begin(), out.lts.edges.end());
  out.lts.edges.erase(std::unique(out.lts.edges.begin(), out.lts.edges.end()),
                      out.lts.edges.end());
  return out;
}

PibLts reachable_lts(const Config& c, const LtsBounds& bounds, const NameSet& env) {
  return explore_lts(c, bounds, [&](const Config& cfg) { return successors(cfg, env); });
}

}  // namespace pibwb
