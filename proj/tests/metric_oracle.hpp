#pragma once

// Brute-force reference implementations of the fairness metrics: every pair
// of groups and every positive class is enumerated directly.

#include <cmath>
#include <optional>
#include <vector>

#include "fairgnn/evaluation.hpp"
#include "fairgnn/rng.hpp"

namespace testutil {

struct MetricInstance {
  std::vector<int> preds, labels, groups;
  std::vector<std::size_t> nodes;
  int n_classes = 2;
};

inline MetricInstance random_metric_instance(fairgnn::Rng& rng, std::size_t max_nodes = 12) {
  MetricInstance m;
  const std::size_t n = 1 + rng.below(max_nodes);
  m.n_classes = 2 + static_cast<int>(rng.below(3));
  const int k = 1 + static_cast<int>(rng.below(4));
  for (std::size_t v = 0; v < n; ++v) {
    m.preds.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(m.n_classes))));
    m.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(m.n_classes))));
    m.groups.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
    if (rng.uniform() < 0.8) m.nodes.push_back(v);
  }
  if (m.nodes.empty()) m.nodes.push_back(rng.below(n));
  return m;
}

inline std::vector<int> positives_of(int n_classes) {
  if (n_classes <= 2) return {1};
  std::vector<int> out;
  for (int c = 0; c < n_classes; ++c) out.push_back(c);
  return out;
}

inline double oracle_accuracy(const MetricInstance& m) {
  std::size_t correct = 0;
  for (std::size_t v : m.nodes) correct += m.preds[v] == m.labels[v] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(m.nodes.size());
}

inline double oracle_sp(const MetricInstance& m) {
  double worst = 0.0;
  for (int c : positives_of(m.n_classes))
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        std::size_t na = 0, nb = 0, ha = 0, hb = 0;
        for (std::size_t v : m.nodes) {
          if (m.groups[v] == a) na++, ha += m.preds[v] == c;
          if (m.groups[v] == b) nb++, hb += m.preds[v] == c;
        }
        if (na == 0 || nb == 0) continue;
        worst = std::max(worst, std::abs(static_cast<double>(ha) / static_cast<double>(na) -
                                         static_cast<double>(hb) / static_cast<double>(nb)));
      }
  return worst;
}

/// Empty when no group has a positive node.
inline std::optional<double> oracle_eo(const MetricInstance& m) {
  double worst = 0.0;
  bool any = false;
  for (int c : positives_of(m.n_classes))
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        std::size_t pa = 0, pb = 0, ha = 0, hb = 0;
        for (std::size_t v : m.nodes) {
          if (m.labels[v] != c) continue;
          if (m.groups[v] == a) pa++, ha += m.preds[v] == c;
          if (m.groups[v] == b) pb++, hb += m.preds[v] == c;
        }
        if (pa == 0 || pb == 0) continue;
        any = true;
        worst = std::max(worst, std::abs(static_cast<double>(ha) / static_cast<double>(pa) -
                                         static_cast<double>(hb) / static_cast<double>(pb)));
      }
  if (!any) return std::nullopt;
  return worst;
}

/// True when the library agrees exactly with the oracles on `m`.
inline bool metrics_match_oracle(const MetricInstance& m) {
  if (fairgnn::accuracy(m.preds, m.labels, m.nodes) != oracle_accuracy(m)) return false;
  if (fairgnn::statistical_parity_diff(m.preds, m.groups, m.nodes, m.n_classes) != oracle_sp(m))
    return false;
  const std::optional<double> eo = oracle_eo(m);
  try {
    const double got = fairgnn::equal_opportunity_diff(m.preds, m.labels, m.groups, m.nodes, m.n_classes);
    return eo && got == *eo;
  } catch (const std::exception&) {
    return !eo;
  }
}

}  // namespace testutil
