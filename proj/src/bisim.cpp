#include "pibwb/bisim.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>

namespace pibwb {

namespace {

constexpr size_t kInf = std::numeric_limits<size_t>::max();

void validate(const Lts& l, const char* which) {
  std::string w(which);
  if (l.states.empty()) throw std::invalid_argument("lts " + w + " has no states");
  if (l.initial >= l.states.size())
    throw std::invalid_argument("lts " + w + ": initial state out of range");
  for (const auto& e : l.edges)
    if (e.src >= l.states.size() || e.dst >= l.states.size())
      throw std::invalid_argument("lts " + w + ": edge endpoint out of range");
  for (size_t s : l.truncated)
    if (s >= l.states.size())
      throw std::invalid_argument("lts " + w + ": truncated state out of range");
}

// A label's shape is its head word plus its word count. Two systems whose
// labels disagree on a shape were produced against different action grammars
// and comparing them state by state would be meaningless.
std::pair<std::string, size_t> label_shape(const std::string& label) {
  std::string head;
  size_t words = 0;
  size_t i = 0;
  while (i < label.size()) {
    while (i < label.size() && label[i] == ' ') ++i;
    if (i == label.size()) break;
    size_t j = i;
    while (j < label.size() && label[j] != ' ') ++j;
    if (words == 0) head = label.substr(i, j - i);
    ++words;
    i = j;
  }
  return {head, words};
}

void check_alphabets(const Lts& a, const Lts& b) {
  std::map<std::string, std::set<size_t>> shapes;
  for (const Lts* l : {&a, &b})
    for (const auto& e : l->edges) {
      auto [head, words] = label_shape(e.label);
      shapes[head].insert(words);
    }
  for (const auto& [head, counts] : shapes)
    if (counts.size() > 1)
      throw LabelMismatch("label head '" + head + "' used with different shapes");
}

// Shortest distance from the initial state to any truncated state, following
// recorded edges; kInf when no truncated state is reachable. This is the
// horizon within which the recorded behaviour is complete.
size_t truncation_distance(const Lts& l) {
  if (l.truncated.empty()) return kInf;
  std::vector<size_t> dist(l.states.size(), kInf);
  std::deque<size_t> q;
  dist[l.initial] = 0;
  q.push_back(l.initial);
  std::vector<std::vector<size_t>> adj(l.states.size());
  for (const auto& e : l.edges) adj[e.src].push_back(e.dst);
  size_t best = kInf;
  while (!q.empty()) {
    size_t s = q.front();
    q.pop_front();
    if (l.truncated.count(s)) best = std::min(best, dist[s]);
    for (size_t t : adj[s])
      if (dist[t] == kInf) {
        dist[t] = dist[s] + 1;
        q.push_back(t);
      }
  }
  return best;
}

struct Refiner {
  size_t n = 0;
  size_t off = 0;  // index offset of the second system's states
  // per state, sorted and deduplicated outgoing (label, target)
  std::vector<std::vector<std::pair<std::string, size_t>>> out;
  // rounds[r][s] = block of s after r refinement rounds; rounds[0] is the
  // trivial partition. Kept whole so witness extraction can walk back.
  std::vector<std::vector<size_t>> rounds;

  Refiner(const Lts& a, const Lts& b) {
    off = a.states.size();
    n = off + b.states.size();
    out.resize(n);
    for (const auto& e : a.edges) out[e.src].emplace_back(e.label, e.dst);
    for (const auto& e : b.edges) out[off + e.src].emplace_back(e.label, off + e.dst);
    for (auto& v : out) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    refine();
  }

  void refine() {
    rounds.push_back(std::vector<size_t>(n, 0));
    size_t blocks = 1;
    for (;;) {
      const auto& cur = rounds.back();
      // signature of a state: its block plus the set of (label, target block)
      // pairs it can move by
      std::map<std::pair<size_t, std::set<std::pair<std::string, size_t>>>, size_t> ids;
      std::vector<size_t> next(n);
      for (size_t s = 0; s < n; ++s) {
        std::set<std::pair<std::string, size_t>> sig;
        for (const auto& [l, t] : out[s]) sig.emplace(l, cur[t]);
        auto key = std::make_pair(cur[s], std::move(sig));
        auto it = ids.find(key);
        if (it == ids.end()) it = ids.emplace(std::move(key), ids.size()).first;
        next[s] = it->second;
      }
      if (ids.size() == blocks) return;  // nothing split, stable
      blocks = ids.size();
      rounds.push_back(std::move(next));
    }
  }

  bool separated(size_t s, size_t t) const { return rounds.back()[s] != rounds.back()[t]; }

  // first round at which s and t sit in different blocks
  size_t sep_round(size_t s, size_t t) const {
    for (size_t r = 0; r < rounds.size(); ++r)
      if (rounds[r][s] != rounds[r][t]) return r;
    return kInf;
  }

  bool enabled(size_t s, const std::string& l) const {
    for (const auto& [lab, t] : out[s])
      if (lab == l) return true;
    return false;
  }

  // Distinguishing label sequence for a separated pair. Walks the round
  // history: at each step either the enabled label sets already differ, or
  // one side has a move no reply of the other can match one round earlier.
  std::vector<std::string> witness(size_t s, size_t t) const {
    std::vector<std::string> w;
    for (;;) {
      size_t r = sep_round(s, t);
      // labels enabled on exactly one side end the hunt
      std::set<std::string> ls;
      for (const auto& [l, tgt] : out[s]) ls.insert(l);
      for (const auto& [l, tgt] : out[t]) ls.insert(l);
      bool done = false;
      for (const auto& l : ls)
        if (enabled(s, l) != enabled(t, l)) {
          w.push_back(l);
          done = true;
          break;
        }
      if (done) return w;

      // otherwise find an attacker move unmatched at round r-1 and follow the
      // defender's closest reply
      const auto& prev = rounds[r - 1];
      size_t ns = kInf, nt = kInf;
      std::string nl;
      for (auto [att, def] : {std::make_pair(s, t), std::make_pair(t, s)}) {
        for (const auto& [l, tgt] : out[att]) {
          bool matched = false;
          for (const auto& [l2, tgt2] : out[def])
            if (l2 == l && prev[tgt2] == prev[tgt]) {
              matched = true;
              break;
            }
          if (matched) continue;
          size_t br = kInf, bt = kInf;
          for (const auto& [l2, tgt2] : out[def])
            if (l2 == l) {
              size_t sr = sep_round(tgt, tgt2);
              if (sr < br) {
                br = sr;
                bt = tgt2;
              }
            }
          if (nl.empty() || l < nl) {
            nl = l;
            ns = att == s ? tgt : bt;
            nt = att == s ? bt : tgt;
          }
          break;  // edges are sorted, later labels cannot beat this one
        }
        if (!nl.empty()) break;  // prefer the left attacker for determinism
      }
      if (nl.empty()) throw std::logic_error("separated pair has no distinguishing move");
      w.push_back(nl);
      s = ns;
      t = nt;
    }
  }
};

Verdict verdict_for(const Lts& a, const Lts& b) {
  Refiner ref(a, b);
  size_t da = truncation_distance(a);
  size_t db = truncation_distance(b);
  size_t dt = std::min(da, db);
  size_t ia = a.initial, ib = ref.off + b.initial;
  if (!ref.separated(ia, ib)) {
    if (dt == kInf) return Verdict::bisimilar();
    return Verdict::bounded(dt);
  }
  auto w = ref.witness(ia, ib);
  // the replay consults the full edge sets of every state up to one step
  // before the final label; a cut inside that window makes the distinction
  // untrustworthy
  if (dt != kInf && dt <= w.size() - 1) return Verdict::bounded(dt);
  return Verdict::not_bisimilar(std::move(w));
}

}  // namespace

Verdict strong_bisim(const Lts& a, const Lts& b) {
  validate(a, "left");
  validate(b, "right");
  check_alphabets(a, b);
  return verdict_for(a, b);
}

Lts saturate(const Lts& l) {
  validate(l, "input");
  const size_t n = l.states.size();
  std::vector<std::vector<size_t>> tau(n);
  for (const auto& e : l.edges)
    if (e.label == "tau") tau[e.src].push_back(e.dst);

  // tau*-closure per state
  std::vector<std::vector<size_t>> closure(n);
  for (size_t s = 0; s < n; ++s) {
    std::vector<char> seen(n, 0);
    std::deque<size_t> q{s};
    seen[s] = 1;
    while (!q.empty()) {
      size_t u = q.front();
      q.pop_front();
      closure[s].push_back(u);
      for (size_t v : tau[u])
        if (!seen[v]) {
          seen[v] = 1;
          q.push_back(v);
        }
    }
    std::sort(closure[s].begin(), closure[s].end());
  }

  std::set<Lts::Edge> edges;
  for (size_t s = 0; s < n; ++s)
    for (size_t u : closure[s]) edges.insert({s, "tau", u});
  std::vector<std::vector<std::pair<std::string, size_t>>> vis(n);
  for (const auto& e : l.edges)
    if (e.label != "tau") vis[e.src].emplace_back(e.label, e.dst);
  for (size_t s = 0; s < n; ++s)
    for (size_t u : closure[s])
      for (const auto& [lab, v] : vis[u])
        for (size_t t : closure[v]) edges.insert({s, lab, t});

  Lts out;
  out.states = l.states;
  out.initial = l.initial;
  out.truncated = l.truncated;
  out.edges.assign(edges.begin(), edges.end());
  return out;
}

Verdict weak_bisim(const Lts& a, const Lts& b) {
  validate(a, "left");
  validate(b, "right");
  check_alphabets(a, b);
  return verdict_for(saturate(a), saturate(b));
}

}  // namespace pibwb
