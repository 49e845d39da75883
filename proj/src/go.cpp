#include "pibwb/go.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <queue>

#include "pibwb/canon.hpp"
#include "pibwb/engine.hpp"
#include "pibwb/parse.hpp"

namespace pibwb {

bool go_is_value(const GoExprPtr& e) {
  return std::holds_alternative<GIntLit>(e->v) || std::holds_alternative<GChanLit>(e->v);
}

GoValue go_value_of(const GoExprPtr& e) {
  if (auto* n = std::get_if<GIntLit>(&e->v)) return std::to_string(n->n);
  return std::get<GChanLit>(e->v).ch;
}

static GoExprPtr glit(GoValue v) { return gmk(GChanLit{std::move(v)}); }

std::string GoAction::label() const {
  switch (kind) {
    case GoActKind::Tau:
      return "tau";
    case GoActKind::Recv:
      return "r(" + ch + "," + vals[0] + ")";
    case GoActKind::Send:
      return "s(" + ch + "," + vals[0] + ")";
    case GoActKind::SendNu:
      return "s(" + ch + ",nu " + vals[0] + ")";
    case GoActKind::Spawn: {
      std::string s = "g(" + ch;
      for (const auto& v : vals) s += "," + v;
      return s + ")";
    }
  }
  return "?";
}

Action go_action_pib(const GoAction& a) {
  switch (a.kind) {
    case GoActKind::Tau:
      return Action::mk_tau();
    case GoActKind::Recv:
      return Action::mk_in(a.ch, a.vals[0]);
    case GoActKind::Send:
      return Action::mk_out(a.ch, a.vals[0]);
    case GoActKind::SendNu:
      return Action::mk_bout(a.ch, a.vals[0]);
    case GoActKind::Spawn:
      break;
  }
  throw std::logic_error("spawn actions stay local");
}

// ---------------------------------------------------------------------------
// Printing

std::string go_print_expr(const GoExprPtr& e) {
  return std::visit(
      [](auto&& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GVar>) {
          return n.x;
        } else if constexpr (std::is_same_v<T, GIntLit>) {
          return std::to_string(n.n);
        } else if constexpr (std::is_same_v<T, GChanLit>) {
          // literals never come from source text, so the quote cannot clash
          return "'" + n.ch;
        } else if constexpr (std::is_same_v<T, GMake>) {
          return "make(chan " + n.elem_type + ", " + std::to_string(n.size) + ")";
        } else {
          return "<-" + go_print_expr(n.e);
        }
      },
      e->v);
}

std::string go_print_stmt(const GoStmtPtr& s) {
  return std::visit(
      [](auto&& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GNil>) {
          return "nil";
        } else if constexpr (std::is_same_v<T, GAssign>) {
          return n.x + " = " + go_print_expr(n.e);
        } else if constexpr (std::is_same_v<T, GSend>) {
          return go_print_expr(n.chan_e) + " <- " + go_print_expr(n.val_e);
        } else if constexpr (std::is_same_v<T, GSeq>) {
          return go_print_stmt(n.s1) + "; " + go_print_stmt(n.s2);
        } else if constexpr (std::is_same_v<T, GGoCall>) {
          std::string out = "go " + n.f + "(";
          for (size_t i = 0; i < n.args.size(); ++i)
            out += (i ? ", " : "") + go_print_expr(n.args[i]);
          return out + ")";
        } else {
          std::string out = "select {";
          for (const auto& c : n.clauses) {
            if (c.is_recv)
              out += " case " + c.x + " = <-" + go_print_expr(c.chan_e);
            else
              out += " case " + go_print_expr(c.chan_e) + " <- " + go_print_expr(c.val_e);
            out += ": " + go_print_stmt(c.body);
          }
          return out + " }";
        }
      },
      s->v);
}

std::string go_key(const GoGlobalConfig& g) {
  std::vector<std::string> rs;
  for (const auto& r : g.routines) {
    std::string s = go_print_stmt(r.stmt) + " |";
    for (const auto& [x, v] : r.sigma) s += " " + x + "=" + v;
    rs.push_back(std::move(s));
  }
  std::sort(rs.begin(), rs.end());
  std::string out;
  for (const auto& s : rs) out += "R{" + s + "} ";
  for (const auto& [ch, b] : g.chans) {
    out += ch + "->(" + std::to_string(b.cap) + ",[";
    for (const auto& v : b.queue) out += v + " ";
    out += "]," + std::to_string(b.gtag) + ") ";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Expression steps

std::vector<GoExprStep> go_expr_step(const GoExprPtr& e, const GoLocalStore& sigma,
                                     const ChannelStore& chans,
                                     const std::vector<GoValue>& pool) {
  std::vector<GoExprStep> out;
  std::visit(
      [&](auto&& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GVar>) {
          auto it = sigma.find(n.x);
          if (it == sigma.end()) throw UnknownVar("unknown variable " + n.x);
          out.push_back({GoAction::mk_tau(), glit(it->second), chans});
        } else if constexpr (std::is_same_v<T, GMake>) {
          if (n.size < 0) throw UnsupportedFeature("negative channel size");
          NameSet avoid;
          for (const auto& [c, b] : chans) avoid.insert(c);
          for (const auto& v : pool) avoid.insert(v);
          for (const auto& [x, v] : sigma) avoid.insert(v);
          Name ch;
          for (int i = 0;; ++i) {
            ch = "ch" + std::to_string(i);
            if (!avoid.count(ch)) break;
          }
          ChannelStore c2 = chans;
          c2[ch] = GoChan{n.size, {}, 0};
          out.push_back({GoAction::mk_tau(), glit(ch), std::move(c2)});
        } else if constexpr (std::is_same_v<T, GRecv>) {
          if (!go_is_value(n.e)) {
            for (auto& st : go_expr_step(n.e, sigma, chans, pool))
              out.push_back({st.act, gmk(GRecv{st.e2}), std::move(st.chans2)});
            return;
          }
          Name ch = go_value_of(n.e);
          auto it = chans.find(ch);
          if (it == chans.end()) return;  // receiving on a non-channel: stuck
          const GoChan& b = it->second;
          if (b.cap == 0) {
            for (const auto& v : pool) out.push_back({GoAction::mk_recv(ch, v), glit(v), chans});
          } else if (!b.queue.empty()) {
            ChannelStore c2 = chans;
            GoValue v = b.queue.front();
            c2[ch].queue.erase(c2[ch].queue.begin());
            out.push_back({GoAction::mk_tau(), glit(v), std::move(c2)});
          }
        }
        // literals are values: no rule
      },
      e->v);
  return out;
}

// ---------------------------------------------------------------------------
// Local steps

namespace {

// the first argument position that still needs evaluation, or npos
size_t first_unevaluated(const std::vector<GoExprPtr>& es) {
  for (size_t i = 0; i < es.size(); ++i)
    if (!go_is_value(es[i])) return i;
  return std::string::npos;
}

}  // namespace

std::vector<GoLocalStep> go_local_step(const GoStmtPtr& s, const GoLocalStore& sigma,
                                       const ChannelStore& chans,
                                       const std::vector<GoValue>& pool) {
  std::vector<GoLocalStep> out;
  std::visit(
      [&](auto&& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GNil>) {
          // terminated
        } else if constexpr (std::is_same_v<T, GAssign>) {
          if (go_is_value(n.e)) {
            GoLocalStore s2 = sigma;
            s2[n.x] = go_value_of(n.e);
            out.push_back({GoAction::mk_tau(), smk(GNil{}), std::move(s2), chans});
          } else {
            for (auto& st : go_expr_step(n.e, sigma, chans, pool))
              out.push_back({st.act, smk(GAssign{n.x, st.e2}), sigma, std::move(st.chans2)});
          }
        } else if constexpr (std::is_same_v<T, GSend>) {
          if (!go_is_value(n.chan_e)) {
            for (auto& st : go_expr_step(n.chan_e, sigma, chans, pool))
              out.push_back({st.act, smk(GSend{st.e2, n.val_e}), sigma, std::move(st.chans2)});
          } else if (!go_is_value(n.val_e)) {
            for (auto& st : go_expr_step(n.val_e, sigma, chans, pool))
              out.push_back({st.act, smk(GSend{n.chan_e, st.e2}), sigma, std::move(st.chans2)});
          } else {
            Name ch = go_value_of(n.chan_e);
            GoValue v = go_value_of(n.val_e);
            auto it = chans.find(ch);
            if (it == chans.end()) return;  // sending on a non-channel: stuck
            const GoChan& b = it->second;
            if (b.cap == 0) {
              out.push_back({GoAction::mk_send(ch, v), smk(GNil{}), sigma, chans});
            } else if ((long long)b.queue.size() < b.cap) {
              ChannelStore c2 = chans;
              c2[ch].queue.push_back(v);
              out.push_back({GoAction::mk_tau(), smk(GNil{}), sigma, std::move(c2)});
            }
          }
        } else if constexpr (std::is_same_v<T, GSeq>) {
          if (std::holds_alternative<GNil>(n.s1->v)) {
            // the head is finished; step directly into the tail's derivative
            out = go_local_step(n.s2, sigma, chans, pool);
          } else {
            for (auto& st : go_local_step(n.s1, sigma, chans, pool))
              out.push_back(
                  {st.act, smk(GSeq{st.s2, n.s2}), std::move(st.sigma2), std::move(st.chans2)});
          }
        } else if constexpr (std::is_same_v<T, GGoCall>) {
          size_t i = first_unevaluated(n.args);
          if (i == std::string::npos) {
            std::vector<GoValue> vs;
            for (const auto& a : n.args) vs.push_back(go_value_of(a));
            out.push_back(
                {GoAction{GoActKind::Spawn, n.f, std::move(vs)}, smk(GNil{}), sigma, chans});
          } else {
            for (auto& st : go_expr_step(n.args[i], sigma, chans, pool)) {
              auto args = n.args;
              args[i] = st.e2;
              out.push_back(
                  {st.act, smk(GGoCall{n.f, std::move(args)}), sigma, std::move(st.chans2)});
            }
          }
        } else if constexpr (std::is_same_v<T, GSelect>) {
          // clause subexpressions in lexical order
          std::vector<std::pair<size_t, int>> slots;  // (clause, 0=chan 1=val)
          for (size_t c = 0; c < n.clauses.size(); ++c) {
            slots.emplace_back(c, 0);
            if (!n.clauses[c].is_recv) slots.emplace_back(c, 1);
          }
          for (auto [c, which] : slots) {
            const GoExprPtr& sub = which ? n.clauses[c].val_e : n.clauses[c].chan_e;
            if (go_is_value(sub)) continue;
            for (auto& st : go_expr_step(sub, sigma, chans, pool)) {
              auto cls = n.clauses;
              (which ? cls[c].val_e : cls[c].chan_e) = st.e2;
              out.push_back(
                  {st.act, smk(GSelect{std::move(cls)}), sigma, std::move(st.chans2)});
            }
            return;  // only the first unevaluated one may move
          }
          // every subexpression is a value: offer each ready clause
          for (const auto& c : n.clauses) {
            if (c.is_recv) {
              for (auto& st : go_expr_step(gmk(GRecv{c.chan_e}), sigma, chans, pool)) {
                GoStmtPtr commit =
                    smk(GSeq{smk(GAssign{c.x, glit(go_value_of(st.e2))}), c.body});
                out.push_back({st.act, std::move(commit), sigma, std::move(st.chans2)});
              }
            } else {
              for (auto& st : go_local_step(smk(GSend{c.chan_e, c.val_e}), sigma, chans, pool))
                out.push_back({st.act, c.body, sigma, std::move(st.chans2)});
            }
          }
        }
      },
      s->v);
  return out;
}

// ---------------------------------------------------------------------------
// Global steps

namespace {

void expr_names(const GoExprPtr& e, NameSet& out) {
  std::visit(
      [&](auto&& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GChanLit>)
          out.insert(n.ch);
        else if constexpr (std::is_same_v<T, GRecv>)
          expr_names(n.e, out);
      },
      e->v);
}

void stmt_names(const GoStmtPtr& s, NameSet& out) {
  std::visit(
      [&](auto&& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GAssign>) {
          expr_names(n.e, out);
        } else if constexpr (std::is_same_v<T, GSend>) {
          expr_names(n.chan_e, out);
          expr_names(n.val_e, out);
        } else if constexpr (std::is_same_v<T, GSeq>) {
          stmt_names(n.s1, out);
          stmt_names(n.s2, out);
        } else if constexpr (std::is_same_v<T, GGoCall>) {
          for (const auto& a : n.args) expr_names(a, out);
        } else if constexpr (std::is_same_v<T, GSelect>) {
          for (const auto& c : n.clauses) {
            expr_names(c.chan_e, out);
            if (!c.is_recv) expr_names(c.val_e, out);
            stmt_names(c.body, out);
          }
        }
      },
      s->v);
}

NameSet go_config_names(const GoGlobalConfig& g) {
  NameSet out;
  for (const auto& r : g.routines) {
    stmt_names(r.stmt, out);
    for (const auto& [x, v] : r.sigma) out.insert(v);
  }
  for (const auto& [ch, b] : g.chans) {
    out.insert(ch);
    for (const auto& v : b.queue) out.insert(v);
  }
  return out;
}

GoExprPtr rename_expr(const GoExprPtr& e, const Name& to, const Name& from) {
  return std::visit(
      [&](auto&& n) -> GoExprPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GChanLit>) {
          return n.ch == from ? glit(to) : gmk(n);
        } else if constexpr (std::is_same_v<T, GRecv>) {
          return gmk(GRecv{rename_expr(n.e, to, from)});
        } else {
          return gmk(n);
        }
      },
      e->v);
}

GoStmtPtr rename_stmt(const GoStmtPtr& s, const Name& to, const Name& from) {
  return std::visit(
      [&](auto&& n) -> GoStmtPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GAssign>) {
          return smk(GAssign{n.x, rename_expr(n.e, to, from)});
        } else if constexpr (std::is_same_v<T, GSend>) {
          return smk(GSend{rename_expr(n.chan_e, to, from), rename_expr(n.val_e, to, from)});
        } else if constexpr (std::is_same_v<T, GSeq>) {
          return smk(GSeq{rename_stmt(n.s1, to, from), rename_stmt(n.s2, to, from)});
        } else if constexpr (std::is_same_v<T, GGoCall>) {
          auto args = n.args;
          for (auto& a : args) a = rename_expr(a, to, from);
          return smk(GGoCall{n.f, std::move(args)});
        } else if constexpr (std::is_same_v<T, GSelect>) {
          auto cls = n.clauses;
          for (auto& c : cls) {
            c.chan_e = rename_expr(c.chan_e, to, from);
            if (c.val_e) c.val_e = rename_expr(c.val_e, to, from);
            c.body = rename_stmt(c.body, to, from);
          }
          return smk(GSelect{std::move(cls)});
        } else {
          return smk(n);
        }
      },
      s->v);
}

GoGlobalConfig rename_channel(const GoGlobalConfig& g, const Name& to, const Name& from) {
  GoGlobalConfig out;
  for (const auto& r : g.routines) {
    GoLocalStore s2;
    for (const auto& [x, v] : r.sigma) s2[x] = (v == from ? to : v);
    out.routines.push_back({rename_stmt(r.stmt, to, from), std::move(s2)});
  }
  for (const auto& [ch, b] : g.chans) {
    GoChan b2 = b;
    for (auto& v : b2.queue)
      if (v == from) v = to;
    out.chans[ch == from ? to : ch] = std::move(b2);
  }
  return out;
}

// exports rename the channel to the first free w-token so labels do not leak
// allocation order
GoGlobalStep export_channel(const GoGlobalConfig& g2, const Name& ch, const Name& exported,
                            const NameSet& avoid) {
  NameSet taken = go_config_names(g2);
  taken.insert(avoid.begin(), avoid.end());
  Name w;
  for (int i = 0;; ++i) {
    w = "w" + std::to_string(i);
    if (!taken.count(w)) break;
  }
  GoGlobalConfig g3 = rename_channel(g2, w, exported);
  g3.chans[w].gtag = 1;
  return {GoAction::mk_send_nu(ch, w), std::move(g3)};
}

}  // namespace

std::vector<GoGlobalStep> go_global_successors(const GoProgram& prog, const GoGlobalConfig& g,
                                               const NameSet& env) {
  NameSet names = go_config_names(g);
  std::vector<GoValue> pool(env.begin(), env.end());
  for (const auto& [ch, b] : g.chans)
    if (b.gtag == 1) pool.push_back(ch);
  {
    NameSet taken = names;
    taken.insert(env.begin(), env.end());
    for (int i = 0;; ++i) {
      Name w = "w" + std::to_string(i);
      if (!taken.count(w)) {
        pool.push_back(w);
        break;
      }
    }
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  std::vector<GoGlobalStep> out;
  struct SendCand {
    size_t routine;
    Name ch;
    GoValue v;
    GoStmtPtr s2;
  };
  std::vector<SendCand> senders;

  for (size_t i = 0; i < g.routines.size(); ++i) {
    const GoRoutine& r = g.routines[i];
    for (auto& st : go_local_step(r.stmt, r.sigma, g.chans, pool)) {
      switch (st.act.kind) {
        case GoActKind::Tau: {
          GoGlobalConfig g2 = g;
          g2.routines[i] = {st.s2, st.sigma2};
          g2.chans = st.chans2;
          out.push_back({GoAction::mk_tau(), std::move(g2)});
          break;
        }
        case GoActKind::Spawn: {
          auto fit = prog.funcs.find(st.act.ch);
          if (fit == prog.funcs.end()) break;
          const GoFunc& fn = fit->second;
          if (fn.params.size() != st.act.vals.size()) break;
          GoGlobalConfig g2 = g;
          g2.routines[i] = {st.s2, r.sigma};
          GoLocalStore sf;
          for (size_t k = 0; k < fn.params.size(); ++k) sf[fn.params[k]] = st.act.vals[k];
          g2.routines.push_back({fn.body, std::move(sf)});
          out.push_back({GoAction::mk_tau(), std::move(g2)});
          break;
        }
        case GoActKind::Recv: {
          auto cit = g.chans.find(st.act.ch);
          if (cit != g.chans.end() && cit->second.cap == 0 && cit->second.gtag == 1) {
            GoGlobalConfig g2 = g;
            g2.routines[i] = {st.s2, st.sigma2};
            g2.chans = st.chans2;
            out.push_back({st.act, std::move(g2)});
          }
          break;
        }
        case GoActKind::Send: {
          const GoChan& b = g.chans.at(st.act.ch);
          senders.push_back({i, st.act.ch, st.act.vals[0], st.s2});
          if (b.gtag != 1) break;
          GoGlobalConfig g2 = g;
          g2.routines[i] = {st.s2, r.sigma};
          auto vit = g.chans.find(st.act.vals[0]);
          if (vit == g.chans.end() || vit->second.gtag == 1) {
            out.push_back({st.act, std::move(g2)});
          } else {
            NameSet avoid = env;
            avoid.insert(names.begin(), names.end());
            out.push_back(export_channel(g2, st.act.ch, st.act.vals[0], avoid));
          }
          break;
        }
        case GoActKind::SendNu:
          break;  // never produced locally
      }
    }
  }

  // synchronous rendezvous: pair each unbuffered send with a receive
  // capability for exactly that value
  for (const auto& sc : senders) {
    for (size_t j = 0; j < g.routines.size(); ++j) {
      if (j == sc.routine) continue;
      for (auto& st : go_local_step(g.routines[j].stmt, g.routines[j].sigma, g.chans, {sc.v})) {
        if (st.act.kind != GoActKind::Recv || st.act.ch != sc.ch || st.act.vals[0] != sc.v)
          continue;
        GoGlobalConfig g2 = g;
        g2.routines[sc.routine] = {sc.s2, g.routines[sc.routine].sigma};
        g2.routines[j] = {st.s2, st.sigma2};
        out.push_back({GoAction::mk_tau(), std::move(g2)});
      }
    }
  }

  // environment traffic on visible buffered channels
  for (const auto& [ch, b] : g.chans) {
    if (b.gtag != 1 || b.cap == 0) continue;
    if ((long long)b.queue.size() < b.cap) {
      for (const auto& v : pool) {
        GoGlobalConfig g2 = g;
        g2.chans[ch].queue.push_back(v);
        out.push_back({GoAction::mk_recv(ch, v), std::move(g2)});
      }
    }
    if (!b.queue.empty()) {
      GoValue h = b.queue.front();
      GoGlobalConfig g2 = g;
      g2.chans[ch].queue.erase(g2.chans[ch].queue.begin());
      auto hit = g.chans.find(h);
      if (hit == g.chans.end() || hit->second.gtag == 1) {
        out.push_back({GoAction::mk_send(ch, h), std::move(g2)});
      } else {
        NameSet avoid = env;
        avoid.insert(names.begin(), names.end());
        out.push_back(export_channel(g2, ch, h, avoid));
      }
    }
  }

  std::sort(out.begin(), out.end(), [](const GoGlobalStep& a, const GoGlobalStep& b) {
    auto ka = std::make_pair(a.act.label(), go_key(a.g2));
    auto kb = std::make_pair(b.act.label(), go_key(b.g2));
    return ka < kb;
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const GoGlobalStep& a, const GoGlobalStep& b) {
                          return a.act == b.act && go_key(a.g2) == go_key(b.g2);
                        }),
            out.end());
  return out;
}

GoLts go_reachable_lts(const GoProgram& prog, const GoGlobalConfig& g, const LtsBounds& bounds,
                       const NameSet& env) {
  GoLts out;
  std::map<std::string, std::size_t> index;
  auto intern = [&](GoGlobalConfig cfg) {
    std::string key = go_key(cfg);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    std::size_t id = out.lts.states.size();
    index.emplace(std::move(key), id);
    out.lts.states.push_back(go_key(cfg));
    out.configs.push_back(std::move(cfg));
    return id;
  };
  intern(g);
  out.lts.initial = 0;

  std::queue<std::pair<std::size_t, std::size_t>> q;  // (state, depth)
  q.push({0, 0});
  std::vector<bool> expanded;
  while (!q.empty()) {
    auto [cur, depth] = q.front();
    q.pop();
    if (expanded.size() < out.lts.states.size()) expanded.resize(out.lts.states.size(), false);
    if (expanded[cur]) continue;
    expanded[cur] = true;

    auto succ = go_global_successors(prog, out.configs[cur], env);
    if (depth >= bounds.max_depth) {
      if (!succ.empty()) out.lts.truncated.insert(cur);
      continue;
    }
    for (auto& st : succ) {
      std::string key = go_key(st.g2);
      auto it = index.find(key);
      std::size_t t;
      if (it == index.end()) {
        if (out.lts.states.size() >= bounds.max_states) {
          out.lts.truncated.insert(cur);
          continue;
        }
        t = out.lts.states.size();
        index.emplace(std::move(key), t);
        out.lts.states.push_back(go_key(st.g2));
        out.configs.push_back(st.g2);
        q.push({t, depth + 1});
      } else {
        t = it->second;
        if (t >= expanded.size() || !expanded[t]) q.push({t, depth + 1});
      }
      out.lts.edges.push_back({cur, go_action_pib(st.act).label(), t});
    }
  }
  std::sort(out.lts.edges.begin(), out.lts.edges.end());
  out.lts.edges.erase(std::unique(out.lts.edges.begin(), out.lts.edges.end()),
                      out.lts.edges.end());
  return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct GoLexer {
  const std::string& s;
  size_t i = 0;

  explicit GoLexer(const std::string& text) : s(text) {}

  void ws() {
    while (i < s.size()) {
      if (std::isspace((unsigned char)s[i])) {
        ++i;
      } else if (s[i] == '/' && i + 1 < s.size() && s[i + 1] == '/') {
        while (i < s.size() && s[i] != '\n') ++i;
      } else {
        break;
      }
    }
  }

  bool eof() {
    ws();
    return i >= s.size();
  }

  char peekc() {
    ws();
    return i < s.size() ? s[i] : '\0';
  }

  bool eat(char c) {
    ws();
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) throw ParseError(std::string("expected '") + c + "'", i);
  }

  bool eat_arrow() {
    ws();
    if (i + 1 < s.size() && s[i] == '<' && s[i + 1] == '-') {
      i += 2;
      return true;
    }
    return false;
  }

  static bool word_start(char c) { return std::isalpha((unsigned char)c) || c == '_'; }
  static bool word_cont(char c) { return std::isalnum((unsigned char)c) || c == '_'; }

  std::string peek_word() {
    ws();
    if (i >= s.size() || !word_start(s[i])) return "";
    size_t j = i;
    while (j < s.size() && word_cont(s[j])) ++j;
    return s.substr(i, j - i);
  }

  bool eat_word(const char* w) {
    if (peek_word() != w) return false;
    i += std::string(w).size();
    return true;
  }

  std::string ident() {
    std::string w = peek_word();
    if (w.empty()) throw ParseError("expected identifier", i);
    i += w.size();
    return w;
  }

  long long number() {
    ws();
    if (i >= s.size() || !std::isdigit((unsigned char)s[i]))
      throw ParseError("expected number", i);
    long long n = 0;
    while (i < s.size() && std::isdigit((unsigned char)s[i])) n = n * 10 + (s[i++] - '0');
    return n;
  }
};

struct GoParser {
  GoLexer lx;

  explicit GoParser(const std::string& src) : lx(src) {}

  GoExprPtr expr() {
    if (lx.eat_arrow()) return gmk(GRecv{expr()});
    if (lx.eat('(')) {
      GoExprPtr e = expr();
      lx.expect(')');
      return e;
    }
    if (std::isdigit((unsigned char)lx.peekc())) return gmk(GIntLit{lx.number()});
    if (lx.peek_word() == "make") {
      lx.eat_word("make");
      lx.expect('(');
      if (!lx.eat_word("chan")) throw ParseError("expected 'chan'", lx.i);
      std::string ty;
      while (lx.peekc() != ',' && lx.peekc() != '\0') {
        if (!ty.empty()) ty += ' ';
        ty += lx.ident();
      }
      lx.expect(',');
      long long n = lx.number();
      lx.expect(')');
      return gmk(GMake{std::move(ty), n});
    }
    return gmk(GVar{lx.ident()});
  }

  bool stmt_ends() {
    char c = lx.peekc();
    return c == '}' || c == '\0' || lx.peek_word() == "case";
  }

  GoStmtPtr stmt() {
    if (lx.eat_word("nil")) return smk(GNil{});
    if (lx.eat_word("go")) {
      Name f = lx.ident();
      lx.expect('(');
      std::vector<GoExprPtr> args;
      if (!lx.eat(')')) {
        do {
          args.push_back(expr());
        } while (lx.eat(','));
        lx.expect(')');
      }
      return smk(GGoCall{std::move(f), std::move(args)});
    }
    if (lx.eat_word("select")) {
      lx.expect('{');
      std::vector<GoSelectClause> cls;
      while (lx.eat_word("case")) {
        GoSelectClause c;
        size_t save = lx.i;
        std::string w = lx.peek_word();
        if (!w.empty()) {
          lx.i += w.size();
          if (lx.eat('=')) {
            if (!lx.eat_arrow()) throw ParseError("expected '<-'", lx.i);
            c.is_recv = true;
            c.x = w;
            c.chan_e = expr();
          } else {
            lx.i = save;
          }
        }
        if (!c.is_recv) {
          c.chan_e = expr();
          if (!lx.eat_arrow()) throw ParseError("expected '<-'", lx.i);
          c.val_e = expr();
        }
        lx.expect(':');
        c.body = stmts();
        cls.push_back(std::move(c));
      }
      lx.expect('}');
      return smk(GSelect{std::move(cls)});
    }
    // assignment or send, both may start with an identifier
    size_t save = lx.i;
    std::string w = lx.peek_word();
    if (!w.empty() && w != "make") {
      lx.i += w.size();
      if (lx.eat('=')) return smk(GAssign{w, expr()});
      lx.i = save;
    }
    GoExprPtr lhs = expr();
    if (!lx.eat_arrow()) throw ParseError("expected '=' or '<-'", lx.i);
    return smk(GSend{std::move(lhs), expr()});
  }

  GoStmtPtr stmts() {
    if (stmt_ends()) return smk(GNil{});
    GoStmtPtr s = stmt();
    while (lx.eat(';')) {
      if (stmt_ends()) break;
      s = smk(GSeq{s, stmt()});
    }
    return s;
  }

  GoProgram program() {
    GoProgram p;
    while (!lx.eof()) {
      if (!lx.eat_word("func")) throw ParseError("expected 'func'", lx.i);
      Name f = lx.ident();
      if (p.funcs.count(f)) throw ParseError("duplicate function " + f, lx.i);
      lx.expect('(');
      std::vector<Name> params;
      if (!lx.eat(')')) {
        do {
          params.push_back(lx.ident());
        } while (lx.eat(','));
        lx.expect(')');
      }
      lx.expect('{');
      GoStmtPtr body = stmts();
      lx.expect('}');
      p.funcs[f] = {std::move(params), std::move(body)};
    }
    return p;
  }
};

void expr_vars(const GoExprPtr& e, NameSet& out) {
  std::visit(
      [&](auto&& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GVar>)
          out.insert(n.x);
        else if constexpr (std::is_same_v<T, GRecv>)
          expr_vars(n.e, out);
      },
      e->v);
}

void stmt_vars(const GoStmtPtr& s, NameSet& out) {
  std::visit(
      [&](auto&& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GAssign>) {
          out.insert(n.x);
          expr_vars(n.e, out);
        } else if constexpr (std::is_same_v<T, GSend>) {
          expr_vars(n.chan_e, out);
          expr_vars(n.val_e, out);
        } else if constexpr (std::is_same_v<T, GSeq>) {
          stmt_vars(n.s1, out);
          stmt_vars(n.s2, out);
        } else if constexpr (std::is_same_v<T, GGoCall>) {
          for (const auto& a : n.args) expr_vars(a, out);
        } else if constexpr (std::is_same_v<T, GSelect>) {
          for (const auto& c : n.clauses) {
            if (c.is_recv) out.insert(c.x);
            expr_vars(c.chan_e, out);
            if (c.val_e) expr_vars(c.val_e, out);
            stmt_vars(c.body, out);
          }
        }
      },
      s->v);
}

void check_calls(const GoStmtPtr& s, const GoProgram& p) {
  std::visit(
      [&](auto&& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GSeq>) {
          check_calls(n.s1, p);
          check_calls(n.s2, p);
        } else if constexpr (std::is_same_v<T, GGoCall>) {
          if (n.f == "main") throw ParseError("main cannot be spawned", 0);
          auto it = p.funcs.find(n.f);
          if (it == p.funcs.end()) throw ParseError("unknown function " + n.f, 0);
          if (it->second.params.size() != n.args.size())
            throw ParseError("wrong argument count for " + n.f, 0);
        } else if constexpr (std::is_same_v<T, GSelect>) {
          for (const auto& c : n.clauses) check_calls(c.body, p);
        }
      },
      s->v);
}

}  // namespace

GoProgram parse_go(const std::string& src) {
  GoParser parser(src);
  GoProgram p = parser.program();
  if (!p.funcs.count("main")) throw ParseError("missing main", 0);
  for (const auto& [f, fn] : p.funcs) {
    check_calls(fn.body, p);
    if (f == "main") continue;
    // spawned functions own no variables beyond their parameters
    NameSet used;
    stmt_vars(fn.body, used);
    NameSet params(fn.params.begin(), fn.params.end());
    for (const auto& x : used)
      if (!params.count(x))
        throw ParseError("variable " + x + " in " + f + " is not a parameter", 0);
  }
  return p;
}

GoGlobalConfig go_initial(const GoProgram& prog,
                          const std::vector<std::tuple<Name, long long, int>>& seeds) {
  GoGlobalConfig g;
  GoLocalStore sigma;
  NameSet vars;
  stmt_vars(prog.funcs.at("main").body, vars);
  for (const auto& x : vars) sigma[x] = "0";
  for (const auto& [ch, cap, gtag] : seeds) {
    g.chans[ch] = GoChan{cap, {}, gtag};
    sigma[ch] = ch;
  }
  g.routines.push_back({prog.funcs.at("main").body, std::move(sigma)});
  return g;
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

// variables live in their own token space so a binder for x can never capture
// a channel or ground value of the same spelling
Name var_name(const Name& x) { return "%x" + x; }

Prefix inp(Name subj, std::vector<Name> binders, Mark m = Mark::None) {
  return Prefix{PrefixKind::Input, std::move(subj), std::move(binders), m};
}
Prefix outp(Name subj, std::vector<Name> objs, Mark m = Mark::None) {
  return Prefix{PrefixKind::Output, std::move(subj), std::move(objs), m};
}

struct GoEnc {
  int ctr = 0;

  Name fresh(const char* base) { return std::string("%") + base + std::to_string(ctr++); }

  TermPtr expr(const GoExprPtr& e, const Name& r) {
    return std::visit(
        [&](auto&& n) -> TermPtr {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, GVar>) {
            Name g = fresh("g"), p = fresh("p"), z = fresh("z");
            return nu(g, nu(p, seq(outp(var_name(n.x), {g, p}),
                                   seq(inp(g, {z}, Mark::Sim), seq(outp(r, {z}), nil())))));
          } else if constexpr (std::is_same_v<T, GIntLit>) {
            return seq(outp(r, {std::to_string(n.n)}), nil());
          } else if constexpr (std::is_same_v<T, GChanLit>) {
            return seq(outp(r, {n.ch}), nil());
          } else if constexpr (std::is_same_v<T, GMake>) {
            if (n.size < 0) throw UnsupportedFeature("negative channel size");
            if (n.size == 0) {
              Name a = fresh("a");
              return seq(tau(Mark::Sim), nu(a, seq(outp(r, {a}), nil())));
            }
            Name b = fresh("b");
            return nubuf(b, Capacity::of(n.size), seq(outp(r, {b}), nil()), Mark::Sim);
          } else {
            Name r2 = fresh("r"), y = fresh("y"), z = fresh("z");
            return nu(r2, par2(expr(n.e, r2),
                               seq(inp(r2, {y}),
                                   seq(inp(y, {z}, Mark::Sim), seq(outp(r, {z}), nil())))));
          }
        },
        e->v);
  }

  // left-to-right evaluator: results are delivered on r as one tuple, with
  // unevaluated positions computed strictly in sequence
  TermPtr lr(const std::vector<GoExprPtr>& es, const Name& r) {
    std::vector<Name> tuple(es.size());
    std::vector<size_t> work;
    for (size_t i = 0; i < es.size(); ++i) {
      if (go_is_value(es[i]))
        tuple[i] = go_value_of(es[i]);
      else
        work.push_back(i);
    }
    if (work.empty()) return seq(outp(r, tuple), nil());

    size_t m = work.size();
    std::vector<Name> rs(m), ts(m), vs(m);
    for (size_t k = 0; k < m; ++k) {
      rs[k] = fresh("r");
      if (k > 0) ts[k] = fresh("t");
      vs[k] = fresh("v");
      tuple[work[k]] = vs[k];
    }
    std::vector<TermPtr> parts;
    parts.push_back(expr(es[work[0]], rs[0]));
    for (size_t k = 1; k < m; ++k)
      parts.push_back(seq(inp(ts[k], {}), expr(es[work[k]], rs[k])));
    TermPtr driver = seq(outp(r, tuple), nil());
    for (size_t k = m; k-- > 1;) {
      driver = seq(inp(rs[k], {vs[k]}), driver);
      driver = seq(outp(ts[k], {}), driver);
    }
    driver = seq(inp(rs[0], {vs[0]}), driver);
    parts.push_back(std::move(driver));

    TermPtr body = par(std::move(parts));
    for (size_t k = m; k-- > 1;) {
      body = nu(rs[k], body);
      body = nu(ts[k], body);
    }
    return nu(rs[0], body);
  }

  TermPtr stmt(const GoStmtPtr& s, const Name& r) {
    return std::visit(
        [&](auto&& n) -> TermPtr {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, GNil>) {
            return seq(outp(r, {}), nil());
          } else if constexpr (std::is_same_v<T, GAssign>) {
            Name r2 = fresh("r"), z = fresh("z"), g = fresh("g"), p = fresh("p");
            TermPtr put = nu(g, nu(p, seq(outp(var_name(n.x), {g, p}),
                                          seq(outp(p, {z}, Mark::Sim),
                                              seq(outp(r, {}), nil())))));
            return nu(r2, par2(expr(n.e, r2), seq(inp(r2, {z}), std::move(put))));
          } else if constexpr (std::is_same_v<T, GSend>) {
            Name r2 = fresh("r"), y = fresh("y"), z = fresh("z");
            return nu(r2, par2(lr({n.chan_e, n.val_e}, r2),
                               seq(inp(r2, {y, z}),
                                   seq(outp(y, {z}, Mark::Sim), seq(outp(r, {}), nil())))));
          } else if constexpr (std::is_same_v<T, GSeq>) {
            Name r2 = fresh("r");
            return nu(r2, par2(stmt(n.s1, r2), seq(inp(r2, {}), stmt(n.s2, r))));
          } else if constexpr (std::is_same_v<T, GGoCall>) {
            Name r2 = fresh("r");
            std::vector<Name> ys;
            for (size_t k = 0; k < n.args.size(); ++k) ys.push_back(fresh("y"));
            return nu(r2, par2(lr(n.args, r2),
                               seq(inp(r2, ys),
                                   seq(outp(n.f, ys, Mark::Sim), seq(outp(r, {}), nil())))));
          } else {
            // all clause subexpressions first, then a guarded choice
            std::vector<GoExprPtr> es;
            std::vector<std::pair<size_t, size_t>> idx;  // per clause: chan, val slots
            for (const auto& c : n.clauses) {
              size_t ci = es.size();
              es.push_back(c.chan_e);
              size_t vi = std::string::npos;
              if (!c.is_recv) {
                vi = es.size();
                es.push_back(c.val_e);
              }
              idx.emplace_back(ci, vi);
            }
            Name r2 = fresh("r");
            std::vector<Name> ys;
            for (size_t k = 0; k < es.size(); ++k) ys.push_back(fresh("y"));
            std::vector<Branch> branches;
            for (size_t c = 0; c < n.clauses.size(); ++c) {
              const auto& cl = n.clauses[c];
              if (cl.is_recv) {
                Name v = fresh("v");
                GoStmtPtr commit = smk(GSeq{smk(GAssign{cl.x, glit(v)}), cl.body});
                branches.push_back({inp(ys[idx[c].first], {v}, Mark::Sim), stmt(commit, r)});
              } else {
                branches.push_back(
                    {outp(ys[idx[c].first], {ys[idx[c].second]}, Mark::Sim), stmt(cl.body, r)});
              }
            }
            return nu(r2, par2(lr(es, r2), seq(inp(r2, ys), choice(std::move(branches)))));
          }
        },
        s->v);
  }

  TermPtr func_decl(const Name& f, const GoFunc& fn) {
    std::vector<Name> zs;
    for (size_t k = 0; k < fn.params.size(); ++k) zs.push_back(fresh("z"));
    std::vector<TermPtr> parts;
    for (size_t k = 0; k < fn.params.size(); ++k)
      parts.push_back(go_var_agent(fn.params[k], zs[k]));
    Name r = fresh("r");
    parts.push_back(nu(r, stmt(fn.body, r)));
    TermPtr body = par(std::move(parts));
    for (size_t k = fn.params.size(); k-- > 0;) body = nu(var_name(fn.params[k]), body);
    return repl(seq(inp(f, zs), std::move(body)));
  }

  TermPtr routine(const GoRoutine& rt) {
    std::vector<TermPtr> parts;
    Name r = fresh("r");
    parts.push_back(nu(r, stmt(rt.stmt, r)));
    for (const auto& [x, v] : rt.sigma) parts.push_back(go_var_agent(x, v));
    TermPtr body = par(std::move(parts));
    for (auto it = rt.sigma.rbegin(); it != rt.sigma.rend(); ++it)
      body = nu(var_name(it->first), body);
    return body;
  }
};

}  // namespace

TermPtr go_var_agent(const Name& x, const GoValue& v) {
  TermPtr put = seq(in1("%p", "%y"), seq(out1("%t", "%y"), nil()));
  TermPtr get = seq(out1("%g", "%z"), seq(out1("%t", "%z"), nil()));
  TermPtr serve = repl(
      seq(in1("%t", "%z"), seq(inp(var_name(x), {"%g", "%p"}), par2(put, get))));
  return nu("%t", par2(seq(out1("%t", v), nil()), std::move(serve)));
}

TermPtr encode_go_expr(const GoExprPtr& e, const Name& r) {
  GoEnc enc;
  return enc.expr(e, r);
}

TermPtr encode_go_stmt(const GoStmtPtr& s, const Name& r) {
  GoEnc enc;
  return enc.stmt(s, r);
}

Config encode_go_global(const GoProgram& prog, const GoGlobalConfig& g) {
  GoEnc enc;
  std::vector<TermPtr> parts;
  for (const auto& rt : g.routines) parts.push_back(enc.routine(rt));
  // main is not spawnable, and as the entry point it may own variables, which
  // no serving agent could; its declaration would be dead code leaking free
  // variable names
  std::vector<Name> fnames;
  for (const auto& [f, fn] : prog.funcs) {
    if (f == "main") continue;
    parts.push_back(enc.func_decl(f, fn));
    fnames.push_back(f);
  }
  TermPtr body = par(std::move(parts));
  for (auto it = fnames.rbegin(); it != fnames.rend(); ++it) body = nu(*it, body);
  std::vector<Name> locals;
  for (const auto& [ch, b] : g.chans)
    if (b.gtag == 0) locals.push_back(ch);
  for (auto it = locals.rbegin(); it != locals.rend(); ++it) body = nu(*it, body);

  BufferStore store;
  for (const auto& [ch, b] : g.chans) {
    if (b.cap == 0) continue;
    Buffer buf;
    buf.cap = Capacity::of(b.cap);
    for (const auto& v : b.queue) {
      auto vit = g.chans.find(v);
      buf.queue.push_back({v, vit != g.chans.end() && vit->second.gtag == 0});
    }
    store.emplace(ch, std::move(buf));
  }
  Config c{std::move(body), std::move(store)};
  if (!check_validity(c)) throw InvalidStore("encoded channel store is not valid");
  return c;
}

// ---------------------------------------------------------------------------
// Transition classification

namespace {

bool term_has_marks(const TermPtr& t) {
  return std::visit(
      [&](auto&& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ChoiceT>) {
          for (const auto& b : n.branches)
            if (b.pre.mark != Mark::None || term_has_marks(b.cont)) return true;
          return false;
        } else if constexpr (std::is_same_v<T, ParT>) {
          for (const auto& p : n.parts)
            if (term_has_marks(p)) return true;
          return false;
        } else if constexpr (std::is_same_v<T, NewT>) {
          return term_has_marks(n.body);
        } else if constexpr (std::is_same_v<T, NewBufT>) {
          return n.mark != Mark::None || term_has_marks(n.body);
        } else if constexpr (std::is_same_v<T, ReplT>) {
          return term_has_marks(n.body);
        } else if constexpr (std::is_same_v<T, TestT>) {
          return term_has_marks(n.then_b) || term_has_marks(n.else_b);
        } else {
          return false;
        }
      },
      t->v);
}

}  // namespace

StepClass classify_transition(const Transition& t) {
  if (!term_has_marks(t.source.process))
    throw NotFromEncoding("transition source carries no simulation markers");
  for (const auto& [m, obj] : t.consumed) {
    if (m == Mark::Sim) return StepClass::Simulating;
    if (m == Mark::SimIfTrue && obj == "true") return StepClass::Simulating;
  }
  return StepClass::Preparing;
}

std::map<std::string, Config> preparing_closure(const Config& c, const NameSet& env,
                                                std::size_t max_states) {
  std::map<std::string, Config> seen;
  Config start = canonicalize(c);
  std::string k0 = canonical_key(start);
  seen.emplace(k0, start);
  std::vector<Config> frontier{std::move(start)};
  while (!frontier.empty()) {
    std::vector<Config> next;
    for (const auto& cfg : frontier) {
      for (auto& t : successors(cfg, env)) {
        if (t.action.kind != ActKind::Tau) continue;
        if (classify_transition(t) != StepClass::Preparing) continue;
        std::string key = canonical_key(t.target);
        if (seen.count(key)) continue;
        if (seen.size() >= max_states)
          throw std::runtime_error("preparing closure exceeded " +
                                   std::to_string(max_states) + " states");
        seen.emplace(std::move(key), t.target);
        next.push_back(std::move(t.target));
      }
    }
    frontier = std::move(next);
  }
  return seen;
}

Config strip_inert(const Config& c0) {
  Config c = canonicalize(c0);
  std::vector<Name> prenex;
  TermPtr body = c.process;
  while (auto* nw = std::get_if<NewT>(&body->v)) {
    prenex.push_back(nw->name);
    body = nw->body;
  }
  std::vector<TermPtr> comps;
  std::function<void(const TermPtr&)> flat = [&](const TermPtr& t) {
    if (auto* pt = std::get_if<ParT>(&t->v)) {
      for (const auto& p : pt->parts) flat(p);
    } else {
      comps.push_back(t);
    }
  };
  flat(body);

  NameSet pset(prenex.begin(), prenex.end());
  NameSet snames = store_names(c.store);
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t k = 0; k < comps.size(); ++k) {
      auto* ch = std::get_if<ChoiceT>(&comps[k]->v);
      if (!ch || ch->branches.empty()) continue;
      bool inert = true;
      for (const auto& br : ch->branches) {
        if (br.pre.kind == PrefixKind::Tau || !pset.count(br.pre.subject) ||
            snames.count(br.pre.subject)) {
          inert = false;
          break;
        }
        for (size_t j = 0; j < comps.size(); ++j) {
          if (j != k && all_names(comps[j]).count(br.pre.subject)) {
            inert = false;
            break;
          }
        }
        if (!inert) break;
      }
      if (inert) {
        comps.erase(comps.begin() + (long)k);
        changed = true;
        break;
      }
    }
  }

  TermPtr nb = comps.empty() ? nil() : (comps.size() == 1 ? comps[0] : par(comps));
  for (auto it = prenex.rbegin(); it != prenex.rend(); ++it) nb = nu(*it, nb);
  return canonicalize({std::move(nb), c.store});
}

PibLts encoded_reachable_lts(const Config& c, const LtsBounds& bounds, const NameSet& env) {
  return explore_lts(strip_inert(c), bounds, [&](const Config& cfg) {
    auto ts = successors(cfg, env);
    for (auto& t : ts) t.target = strip_inert(t.target);
    return ts;
  });
}

}  // namespace pibwb
