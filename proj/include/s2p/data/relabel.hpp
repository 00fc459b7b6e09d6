#pragma once

#include "s2p/data/dataset.hpp"

namespace s2p {

/// Threshold predicate on a named observation component, e.g.
/// "velocity>=0.3". Component names for ScrollCart observations:
/// sin_phase (0), cos_phase (1), velocity (2, stored as v / v_max).
struct RelabelRule {
  int component = -1;
  std::string component_name;
  double threshold = 0;

  static int component_index(const std::string& name) {
    if (name == "sin_phase") return 0;
    if (name == "cos_phase") return 1;
    if (name == "velocity") return 2;
    // numeric index fallback for non-default envs
    try {
      size_t pos = 0;
      int idx = std::stoi(name, &pos);
      if (pos == name.size() && idx >= 0) return idx;
    } catch (...) {
    }
    throw std::invalid_argument("relabel: unknown state component '" + name + "'");
  }

  static RelabelRule parse(const std::string& text) {
    auto at = text.find(">=");
    if (at == std::string::npos)
      throw std::invalid_argument("relabel rule must look like 'velocity>=0.3'");
    RelabelRule r;
    r.component_name = text.substr(0, at);
    r.component = component_index(r.component_name);
    std::string v = text.substr(at + 2);
    if (v == "-inf")
      r.threshold = -std::numeric_limits<double>::infinity();
    else
      r.threshold = std::stod(v);
    return r;
  }

  bool satisfied(const float* state) const { return (double)state[component] >= threshold; }
};

/// Replace each reward by 1/0 according to the predicate on the *resulting*
/// state s_{t+1} of the transition. Everything else is copied untouched.
inline std::vector<Trajectory> relabel_rewards(const std::vector<Trajectory>& trajs,
                                               const RelabelRule& rule, int ns) {
  std::vector<Trajectory> out = trajs;
  for (auto& tr : out) {
    if (rule.component >= ns)
      throw std::invalid_argument("relabel: component index out of range");
    for (int t = 0; t < tr.T(); ++t)
      tr.rewards[(size_t)t] = rule.satisfied(tr.state(t + 1)) ? 1.0f : 0.0f;
  }
  return out;
}

}  // namespace s2p
