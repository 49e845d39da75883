#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <map>

#include "doctest.h"
#include "pibwb/canon.hpp"
#include "pibwb/parse.hpp"
#include "pibwb/print.hpp"
#include "pibwb/semantics.hpp"
#include "testutil.hpp"

using namespace pibwb;

static Config C(const std::string& s) { return parse_config(s); }
static std::string ckey(const Config& c) { return canonical_key(c); }
static ActionPattern PT() { return ActionPattern::any_tau(); }

// (label, target key) view of a successor set, for order-insensitive compares
static std::vector<std::pair<std::string, std::string>> view(const std::vector<Transition>& ts) {
  std::vector<std::pair<std::string, std::string>> v;
  v.reserve(ts.size());
  for (const auto& t : ts) v.emplace_back(t.action.label(), ckey(t.target));
  std::sort(v.begin(), v.end());
  return v;
}

TEST_CASE("action labels") {
  CHECK(Action::mk_tau().label() == "tau");
  CHECK(Action::mk_in("c", "d").label() == "in c d");
  CHECK(Action::mk_out("c", "d").label() == "out c d");
  CHECK(Action::mk_bout("c", "d").label() == "bout c d");
  Action poly{ActKind::BoundOut, "c", {"w0", "d"}, {true, false}};
  CHECK(poly.label() == "bout c ^w0,d");
}

TEST_CASE("the empty process has no transitions") {
  CHECK(successors(C("0 @ {}")).empty());
  CHECK(run_trace(C("0 @ {}"), {}).empty());
}

TEST_CASE("golden: a local name travels through a buffer") {
  Config c0 = C("new a in (b<a>.a(x).0 | b(y).y<c>.0) @ { b -> (5, []) }");
  auto tr = run_trace(c0, {PT(), PT(), PT()});
  CHECK(ckey(tr[0].target) ==
        ckey(C("new a in (a(x).0 | b(y).y<c>.0) @ { b -> (5, [(new a)]) }")));
  CHECK(ckey(tr[1].target) == ckey(C("new a in (a(x).0 | a<c>.0) @ { b -> (5, []) }")));
  CHECK(ckey(tr[2].target) == ckey(C("0 @ { b -> (5, []) }")));
  const auto& q = tr[0].target.store.begin()->second.queue;
  REQUIRE(q.size() == 1);
  CHECK(q[0].local);
}

TEST_CASE("successor shape: one buffered send plus environment inputs") {
  Config c0 = C("new a in (b<a>.a(x).0 | b(y).y<c>.0) @ { b -> (5, []) }");
  Config k = canonicalize(c0);
  auto* nw = std::get_if<NewT>(&k.process->v);
  REQUIRE(nw);
  // the env token deliberately spells the canonical restriction binder: it is
  // an ordinary external name, the binder steps aside
  auto succ = successors(c0, {nw->name});
  int taus = 0, binder_spelled = 0;
  for (const auto& t : succ) {
    if (t.action.kind == ActKind::Tau) {
      ++taus;
    } else {
      CHECK(t.action.kind == ActKind::FreeIn);
      CHECK(t.action.subject == "b");
    }
    if (t.action.names().count(nw->name)) ++binder_spelled;
  }
  CHECK(taus == 1);
  // pool = interface names plus the env token plus one representative, all
  // receivable; bound names are not offered on their own
  NameSet pool = free_names(k.process);
  pool.insert(nw->name);
  pool.insert("b");
  pool.insert("w0");
  CHECK(succ.size() == 1 + pool.size());
  CHECK(binder_spelled == 1);
  for (const auto& t : succ) {
    if (!t.action.names().count(nw->name)) continue;
    const auto& q = t.target.store.at("b").queue;
    REQUIRE(q.size() == 1);
    CHECK(!q[0].local);
    CHECK(q[0].name == nw->name);
  }
}

TEST_CASE("golden: free send then two sends of one restricted name") {
  Config c0 = C("b<a>.new a in b<a>.b<a>.0 @ { b -> (5, []) }");
  auto tr = run_trace(c0, {PT(), PT(), PT()});
  CHECK(ckey(tr[0].target) == ckey(C("new a in b<a>.b<a>.0 @ { b -> (5, [a]) }")));
  CHECK(ckey(tr[1].target) == ckey(C("new a in b<a>.0 @ { b -> (5, [a, (new a)]) }")));
  CHECK(ckey(tr[2].target) == ckey(C("new a in 0 @ { b -> (5, [a, (new a), (new a)]) }")));
  const auto& q = tr[2].target.store.begin()->second.queue;
  REQUIRE(q.size() == 3);
  CHECK(!q[0].local);
  CHECK(q[0].name == "a");
  CHECK(q[1].local);
  CHECK(q[2].local);
  CHECK(q[1].name == q[2].name);  // one restriction, queued twice
  CHECK(q[1].name != "a");
}

TEST_CASE("golden: two nested restrictions queue two distinct locals") {
  Config c0 = C("new a in b<a>.new a in b<a>.0 @ { b -> (5, []) }");
  auto tr = run_trace(c0, {PT(), PT()});
  CHECK(ckey(tr[1].target) ==
        ckey(C("new a in new a' in 0 @ { b -> (5, [(new a), (new a')]) }")));
  const auto& q = tr[1].target.store.begin()->second.queue;
  REQUIRE(q.size() == 2);
  CHECK(q[0].local);
  CHECK(q[1].local);
  CHECK(q[0].name != q[1].name);
}

TEST_CASE("golden: shadowed restriction queues the same local twice") {
  Config c0 = C("new a in new a in b<a>.b<a>.0 @ { b -> (5, []) }");
  auto tr = run_trace(c0, {PT(), PT()});
  CHECK(ckey(tr[1].target) == ckey(C("new a in 0 @ { b -> (5, [(new a), (new a)]) }")));
  const auto& q = tr[1].target.store.begin()->second.queue;
  REQUIRE(q.size() == 2);
  CHECK(q[0].local);
  CHECK(q[1].local);
  CHECK(q[0].name == q[1].name);
}

TEST_CASE("buffer allocation then exchange is a four state tau path") {
  auto pl = reachable_lts(C("new b:1 in (b<d>.0 | b(x).0) @ {}"));
  CHECK(pl.lts.states.size() == 4);
  REQUIRE(pl.lts.edges.size() == 3);
  for (const auto& e : pl.lts.edges) CHECK(e.label == "tau");
  CHECK(pl.lts.truncated.empty());
  CHECK(pl.lts.states[3] == ckey(C("new b in 0 @ { b -> (1, []) }")));
}

TEST_CASE("capacity gates sends and receives") {
  // full buffer: the send is blocked, only the head is observable
  auto full = successors(C("b<x>.0 @ { b -> (1, [d]) }"));
  REQUIRE(full.size() == 1);
  CHECK(full[0].action.label() == "out b d");
  // empty buffer: the receive is blocked, only environment sends remain
  auto empty = successors(C("b(x).0 @ { b -> (1, []) }"));
  CHECK(!empty.empty());
  for (const auto& t : empty) {
    CHECK(t.action.kind == ActKind::FreeIn);
    CHECK(t.action.subject == "b");
  }
}

TEST_CASE("buffers are first in first out") {
  Config c0 = C("b<d1>.b<d2>.b<d3>.0 @ { b -> (3, []) }");
  auto tr = run_trace(c0, {PT(), PT(), PT(),
                           {ActKind::FreeOut, "b", "d1"},
                           {ActKind::FreeOut, "b", "d2"},
                           {ActKind::FreeOut, "b", "d3"}});
  CHECK(tr[5].target.store.begin()->second.queue.empty());
  // the second element is not observable before the first
  CHECK_THROWS_AS(run_trace(c0, {PT(), PT(), PT(), {ActKind::FreeOut, "b", "d2"}}), NoMatch);
}

TEST_CASE("unbuffered moves leave the store unchanged") {
  Config c0 = C("c<d>.0 | c(x).x<e>.0 @ { b -> (2, [d]) }");
  Config k = canonicalize(c0);
  for (const auto& t : successors(c0)) {
    if (t.action.kind != ActKind::Tau && t.action.subject == "b") continue;  // buffer action
    CHECK(t.target.store == k.store);
  }
}

TEST_CASE("environment inputs come from the declared pool") {
  auto succ = successors(C("c(x).0 @ {}"), {"z"});
  bool has_z = false;
  for (const auto& t : succ) has_z |= t.action.label() == "in c z";
  CHECK(has_z);
}

TEST_CASE("enumeration is deterministic") {
  const char* samples[] = {
      "new a in (b<a>.a(x).0 | b(y).y<c>.0) @ { b -> (5, []) }",
      "!c<d>.0 | !c(x).e<x>.0 @ {}",
      "new b:2 in (b<d>.0 | b(x).c<x>.0) @ { e -> (1, [d]) }",
  };
  for (const char* s : samples) {
    auto a = successors(C(s), {"z"});
    auto b = successors(C(s), {"z"});
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].action == b[i].action);
      CHECK(ckey(a[i].target) == ckey(b[i].target));
      CHECK(a[i].unfolds == b[i].unfolds);
      CHECK(a[i].consumed == b[i].consumed);
    }
  }
}

TEST_CASE("property: every derived target has a valid store") {
  tu::Rng r(0x5eedbeef);
  int ctr = 0;
  for (int it = 0; it < 200; ++it) {
    TermPtr t = tu::rnd_term(r, 3, {"a", "b", "c", "d"});
    BufferStore st;
    if (r.chance(2)) st["b"] = {Capacity::of(1 + (long long)r.below(2)), {}};
    if (r.chance(2)) st["e"] = {Capacity::of(2), {{"d", false}}};
    Config c{t, st};
    if (r.chance(3) && !st.empty()) {
      // local entry claimed by a wrapping restriction
      st["e"] = {Capacity::of(2), {{"a", true}}};
      c = Config{nu("a", t), st};
    }
    if (!check_validity(c)) continue;
    for (const auto& tr : successors(c)) {
      CHECK(check_validity(tr.target));
      (void)ctr;
    }
  }
}

TEST_CASE("property: congruent sources have identical successor sets") {
  tu::Rng r(0xc0ffee11);
  int ctr = 0;
  for (int it = 0; it < 120; ++it) {
    TermPtr t = tu::rnd_term(r, 3, {"a", "b", "c"});
    TermPtr t2 = tu::shuffle_term(r, t, true, ctr);
    BufferStore st;
    if (r.chance(2)) st["e"] = {Capacity::of(1), {{"b", false}}};
    CHECK(view(successors({t, st})) == view(successors({t2, st})));
  }
  // scope rearrangements
  CHECK(view(successors(C("new c in (c<d>.0 | c(x).0) | e<f>.0 @ {}"))) ==
        view(successors(C("new c in (c<d>.0 | c(x).0 | e<f>.0) @ {}"))));
  CHECK(view(successors(C("new c in new d in c<d>.d(x).0 @ {}"))) ==
        view(successors(C("new d in new c in c<d>.d(x).0 @ {}"))));
}

TEST_CASE("prefix markers are recorded on fired transitions") {
  auto ob = successors(C("b<a>*.0 @ { b -> (1, []) }"));
  bool seen = false;
  for (const auto& t : ob)
    if (t.action.kind == ActKind::Tau) {
      REQUIRE(t.consumed.size() == 1);
      CHECK(t.consumed[0] == std::pair{Mark::Sim, Name("a")});
      seen = true;
    }
  CHECK(seen);

  auto com = successors(C("c<d>*.0 | c(x)**.0 @ {}"));
  seen = false;
  for (const auto& t : com)
    if (t.action.kind == ActKind::Tau) {
      REQUIRE(t.consumed.size() == 2);
      CHECK(t.consumed[0] == std::pair{Mark::Sim, Name("d")});
      CHECK(t.consumed[1] == std::pair{Mark::SimIfTrue, Name("d")});
      seen = true;
    }
  CHECK(seen);

  auto ib = successors(C("b(x)**.0 @ { b -> (1, ['true']) }"));
  seen = false;
  for (const auto& t : ib)
    if (t.action.kind == ActKind::Tau) {
      REQUIRE(t.consumed.size() == 1);
      CHECK(t.consumed[0] == std::pair{Mark::SimIfTrue, Name("'true'")});
      seen = true;
    }
  CHECK(seen);

  auto nb = successors(C("new b:2* in b<d>.0 @ {}"));
  REQUIRE(nb.size() == 1);
  REQUIRE(nb[0].consumed.size() == 1);
  CHECK(nb[0].consumed[0] == std::pair{Mark::Sim, Name("")});
}

TEST_CASE("ground tests step by token comparison") {
  auto eq = successors(C("[a=a]{c<d>.0}{0} @ {}"));
  REQUIRE(eq.size() == 1);
  CHECK(ckey(eq[0].target) == ckey(C("c<d>.0 @ {}")));
  auto ne = successors(C("[a=b]{c<d>.0}{0} @ {}"));
  REQUIRE(ne.size() == 1);
  CHECK(ckey(ne[0].target) == ckey(C("0 @ {}")));
  auto lt = successors(C("[3<12]{c<d>.0}{0} @ {}"));
  REQUIRE(lt.size() == 1);
  CHECK(ckey(lt[0].target) == ckey(C("c<d>.0 @ {}")));
  auto nonint = successors(C("[x<2]{c<d>.0}{0} @ {}"));
  REQUIRE(nonint.size() == 1);
  CHECK(ckey(nonint[0].target) == ckey(C("0 @ {}")));
}

TEST_CASE("replication unfolds lazily one copy at a time") {
  auto succ = successors(C("!c<d>.0 | c(x).0 @ {}"));
  bool tau_seen = false;
  for (const auto& t : succ)
    if (t.action.kind == ActKind::Tau) {
      CHECK(t.unfolds == 1);
      CHECK(ckey(t.target) == ckey(C("!c<d>.0 @ {}")));
      tau_seen = true;
    }
  CHECK(tau_seen);

  auto cross = successors(C("!c<d>.0 | !c(x).e<x>.0 @ {}"));
  bool cross_tau = false;
  for (const auto& t : cross)
    if (t.action.kind == ActKind::Tau) {
      CHECK(t.unfolds == 2);
      CHECK(ckey(t.target) == ckey(C("!c<d>.0 | !c(x).e<x>.0 | e<d>.0 @ {}")));
      cross_tau = true;
    }
  CHECK(cross_tau);

  auto self = successors(C("!(c<d>.0 + c(x).0) @ {}"));
  bool self_tau = false;
  for (const auto& t : self)
    if (t.action.kind == ActKind::Tau) {
      CHECK(t.unfolds == 2);
      CHECK(ckey(t.target) == ckey(C("!(c<d>.0 + c(x).0) @ {}")));
      self_tau = true;
    }
  CHECK(self_tau);

  // a single copy cannot synchronize with itself
  for (const auto& t : successors(C("!c(x).c<x>.0 @ {}")))
    CHECK(t.action.kind != ActKind::Tau);
}

TEST_CASE("replicated tau loops onto itself") {
  auto pl = reachable_lts(C("!tau.0 @ {}"));
  CHECK(pl.lts.states.size() == 1);
  REQUIRE(pl.lts.edges.size() == 1);
  CHECK(pl.lts.edges[0] == Lts::Edge{0, "tau", 0});
  CHECK(pl.lts.truncated.empty());
}

TEST_CASE("unfold budget of zero truncates replicated states") {
  auto pl = reachable_lts(C("!c<d>.0 @ {}"), {.max_states = 10, .max_depth = 5, .repl_unfold = 0});
  CHECK(pl.lts.states.size() == 1);
  CHECK(pl.lts.edges.empty());
  CHECK(pl.lts.truncated.count(0) == 1);
}

TEST_CASE("restricted names are exported as bound outputs") {
  auto ou = successors(C("new a in c<a>.a(x).0 @ {}"));
  REQUIRE(ou.size() == 1);
  CHECK(ou[0].action.label() == "bout c w0");
  CHECK(ckey(ou[0].target) == ckey(C("w0(x).0 @ {}")));

  // a queued local leaves through the buffer head
  auto obg = successors(C("new a in a(x).0 @ { b -> (2, [(new a)]) }"));
  bool seen = false;
  for (const auto& t : obg)
    if (t.action.kind == ActKind::BoundOut) {
      CHECK(t.action.label() == "bout b w0");
      CHECK(ckey(t.target) == ckey(C("w0(x).0 @ { b -> (2, []) }")));
      seen = true;
    }
  CHECK(seen);

  // exporting a restricted buffer renames its key too
  auto key = successors(C("new b in (c<b>.0 | b(x).0) @ { b -> (1, []) }"));
  REQUIRE(key.size() == 1);
  CHECK(key[0].action.label() == "bout c w0");
  CHECK(ckey(key[0].target) == ckey(C("w0(x).0 @ { w0 -> (1, []) }")));
}

TEST_CASE("an unclaimed local entry is rejected") {
  CHECK_THROWS_AS(successors(C("0 @ { b -> (1, [(new a)]) }")), InvalidStore);
}

TEST_CASE("trace mismatch reports the failing index") {
  try {
    run_trace(C("c<d>.0 @ {}"), {PT()});
    FAIL("expected NoMatch");
  } catch (const NoMatch& e) {
    CHECK(e.index == 0);
  }
  try {
    run_trace(C("c<d>.0 @ {}"), {{ActKind::FreeOut, "c", "d"}, PT()});
    FAIL("expected NoMatch");
  } catch (const NoMatch& e) {
    CHECK(e.index == 1);
  }
}

TEST_CASE("exploration bounds truncate instead of failing") {
  auto by_states =
      reachable_lts(C("0 @ { b -> (inf, []) }"), {.max_states = 5, .max_depth = 64, .repl_unfold = 3});
  CHECK(by_states.lts.states.size() == 5);
  CHECK(!by_states.lts.truncated.empty());

  auto by_depth =
      reachable_lts(C("0 @ { b -> (inf, []) }"), {.max_states = 1000, .max_depth = 2, .repl_unfold = 3});
  CHECK(!by_depth.lts.truncated.empty());
  for (const auto& e : by_depth.lts.edges) {
    CHECK(e.src < by_depth.lts.states.size());
    CHECK(e.dst < by_depth.lts.states.size());
  }
}

TEST_CASE("reachable lts is reproducible") {
  Config c = C("new b:2 in (b<d>.b<e>.0 | b(x).b(y).c<x>.c<y>.0) @ {}");
  auto a = reachable_lts(c, {.max_states = 200, .max_depth = 32, .repl_unfold = 2});
  auto b = reachable_lts(c, {.max_states = 200, .max_depth = 32, .repl_unfold = 2});
  CHECK(a.lts.states == b.lts.states);
  CHECK(a.lts.edges == b.lts.edges);
  CHECK(a.lts.truncated == b.lts.truncated);
  CHECK(a.lts.states[0] == ckey(c));
}

TEST_CASE("non-canonical inputs are normalized before stepping") {
  CHECK(view(successors(C("(0 | c<d>.0) @ {}"))) == view(successors(C("c<d>.0 @ {}"))));
}
