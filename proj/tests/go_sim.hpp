// Shared harness for checking that encoded Go programs track their source
// semantics. Used by the Go suite and the acceptance runner.
//
// Two checks live here. The step harness walks the Go-level transition graph
// and demands, for every global step, a matching move of the encoding:
// administrative (Preparing) internal steps may surround it, the step itself
// must either carry the same label or be an internal step classified as
// Simulating, and afterwards both sides must agree up to more administrative
// steps and inert variable-agent residue. The pair harness compares two whole
// programs by weak bisimilarity at both levels and reports whether the
// verdicts agree.
#pragma once

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "pibwb/bisim.hpp"
#include "pibwb/canon.hpp"
#include "pibwb/go.hpp"

namespace tu {

using GoSeeds = std::vector<std::tuple<pibwb::Name, long long, int>>;

class GoSim {
 public:
  explicit GoSim(pibwb::NameSet env = {}) : env_(std::move(env)) {}

  // Canonical keys of the administrative closure of c, with variable-agent
  // garbage stripped. Two configurations are "the same place" for the step
  // harness when these sets intersect. Memoised; closures recur constantly
  // because every Go state is target of several edges and source of others.
  const std::set<std::string>& class_keys(const pibwb::Config& c) {
    std::string k = pibwb::canonical_key(c);
    auto it = classes_.find(k);
    if (it != classes_.end()) return it->second;
    std::set<std::string> out;
    for (auto& [key, cfg] : pibwb::preparing_closure(c, env_))
      out.insert(pibwb::canonical_key(pibwb::strip_inert(cfg)));
    return classes_.emplace(std::move(k), std::move(out)).first->second;
  }

  bool match_step(const pibwb::GoProgram& prog, const pibwb::GoGlobalConfig& lam,
                  const pibwb::GoAction& act, const pibwb::GoGlobalConfig& lam2,
                  std::string* why = nullptr) {
    using namespace pibwb;
    Config src = encode_go_global(prog, lam);
    const auto& tgt_keys = class_keys(encode_go_global(prog, lam2));
    std::string want = act.kind == GoActKind::Tau ? "tau" : go_action_pib(act).label();
    int candidates = 0;
    for (auto& [k, cfg] : preparing_closure(src, env_)) {
      for (auto& t : successors(cfg, env_)) {
        if (act.kind == GoActKind::Tau) {
          if (t.action.kind != ActKind::Tau) continue;
          if (classify_transition(t) != StepClass::Simulating) continue;
        } else if (t.action.label() != want) {
          continue;
        }
        ++candidates;
        const auto& got = class_keys(t.target);
        for (const auto& key : got)
          if (tgt_keys.count(key)) return true;
      }
    }
    if (why)
      *why = "no encoding move matches " + want + " (" + std::to_string(candidates) +
             " candidates reached a different class)";
    return false;
  }

  struct Sweep {
    size_t states = 0;
    int edges = 0;
    int fails = 0;
    std::string first_fail;
  };

  // Check every transition of the Go-level graph reachable from g0.
  Sweep sweep(const pibwb::GoProgram& prog, const pibwb::GoGlobalConfig& g0,
              const pibwb::LtsBounds& bounds) {
    using namespace pibwb;
    Sweep r;
    GoLts gl = go_reachable_lts(prog, g0, bounds, env_);
    r.states = gl.configs.size();
    for (size_t i = 0; i < gl.configs.size(); ++i) {
      if (gl.lts.truncated.count(i)) continue;
      for (auto& st : go_global_successors(prog, gl.configs[i], env_)) {
        ++r.edges;
        std::string why;
        if (!match_step(prog, gl.configs[i], st.act, st.g2, &why)) {
          ++r.fails;
          if (r.first_fail.empty())
            r.first_fail = "state " + std::to_string(i) + " [" + go_key(gl.configs[i]) +
                           "] action " + st.act.label() + ": " + why;
        }
      }
    }
    return r;
  }

 private:
  pibwb::NameSet env_;
  std::map<std::string, std::set<std::string>> classes_;
};

// Exploration bounds for encoded systems. Variable agents re-enter their
// serve replication on every access, so the per-path unfold budget must not
// bind before the depth bound does; an unfold always rides on a transition,
// so unfolds per path never exceed depth.
inline pibwb::LtsBounds enc_bounds(size_t max_states = 4000, size_t max_depth = 96) {
  pibwb::LtsBounds b;
  b.max_states = max_states;
  b.max_depth = max_depth;
  b.repl_unfold = static_cast<int>(max_depth);
  return b;
}

struct PairVerdicts {
  pibwb::VerdictKind go;
  pibwb::VerdictKind enc;
  bool agree() const { return go == enc; }
};

// Weak-bisimilarity comparison of two programs at both levels. The
// environment should offer every integer literal and seed value either
// program mentions, so the two levels instantiate free inputs from the same
// vocabulary.
inline PairVerdicts go_pair_verdicts(const std::string& src1, const std::string& src2,
                                     const GoSeeds& seeds, const pibwb::NameSet& env,
                                     size_t max_states = 4000) {
  using namespace pibwb;
  GoProgram p1 = parse_go(src1), p2 = parse_go(src2);
  LtsBounds gb;
  gb.max_states = max_states;
  GoLts g1 = go_reachable_lts(p1, go_initial(p1, seeds), gb, env);
  GoLts g2 = go_reachable_lts(p2, go_initial(p2, seeds), gb, env);
  LtsBounds eb = enc_bounds(max_states);
  PibLts e1 = encoded_reachable_lts(encode_go_global(p1, go_initial(p1, seeds)), eb, env);
  PibLts e2 = encoded_reachable_lts(encode_go_global(p2, go_initial(p2, seeds)), eb, env);
  return {weak_bisim(g1.lts, g2.lts).kind, weak_bisim(e1.lts, e2.lts).kind};
}

}  // namespace tu
