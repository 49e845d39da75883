// Label-agnostic transition graph shared by every formalism in the workbench.
#pragma once

#include <compare>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace pibwb {

// States are opaque canonical keys. `truncated` marks states whose outgoing
// transitions were cut by an exploration bound; equivalence checking treats
// them as wildcards and downgrades verdicts accordingly.
struct Lts {
  struct Edge {
    std::size_t src = 0;
    std::string label;
    std::size_t dst = 0;
    auto operator<=>(const Edge&) const = default;
  };

  std::vector<std::string> states;
  std::vector<Edge> edges;
  std::size_t initial = 0;
  std::set<std::size_t> truncated;
};

}  // namespace pibwb
