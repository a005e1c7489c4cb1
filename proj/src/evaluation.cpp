#include "fairgnn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fairgnn/error.hpp"

namespace fairgnn {

double accuracy(std::span<const int> preds, std::span<const int> labels,
                std::span<const std::size_t> nodes) {
  if (nodes.empty()) throw Error("accuracy: empty node set");
  std::size_t correct = 0;
  for (std::size_t v : nodes)
    if (preds[v] == labels[v]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

namespace {

int infer_classes(std::span<const int> values, std::span<const std::size_t> nodes, int given) {
  if (given > 0) return given;
  int k = 0;
  for (std::size_t v : nodes) k = std::max(k, values[v] + 1);
  return std::max(k, 2);
}

int group_count(std::span<const int> groups) {
  int k = 0;
  for (int g : groups) k = std::max(k, g + 1);
  return k;
}

// Positive classes to scan: class 1 for binary tasks, all classes otherwise.
std::vector<int> positive_classes(int n_classes) {
  if (n_classes <= 2) return {1};
  std::vector<int> out(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) out[static_cast<std::size_t>(c)] = c;
  return out;
}

double max_pairwise_gap(const std::vector<double>& rates) {
  if (rates.size() < 2) return 0.0;
  const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
  return *hi - *lo;
}

}  // namespace

double statistical_parity_diff(std::span<const int> preds, std::span<const int> groups,
                               std::span<const std::size_t> nodes, int n_classes) {
  const int k = group_count(groups);
  std::vector<std::size_t> members(static_cast<std::size_t>(k), 0);
  for (std::size_t v : nodes)
    if (groups[v] >= 0) ++members[static_cast<std::size_t>(groups[v])];
  for (int g = 0; g < k; ++g)
    if (members[static_cast<std::size_t>(g)] == 0)
      warn("statistical parity: group " + std::to_string(g) + " has no members; excluded");
  double worst = 0.0;
  for (int c : positive_classes(infer_classes(preds, nodes, n_classes))) {
    std::vector<std::size_t> hits(static_cast<std::size_t>(k), 0);
    for (std::size_t v : nodes)
      if (groups[v] >= 0 && preds[v] == c) ++hits[static_cast<std::size_t>(groups[v])];
    std::vector<double> rates;
    for (std::size_t g = 0; g < members.size(); ++g)
      if (members[g] > 0) rates.push_back(static_cast<double>(hits[g]) / static_cast<double>(members[g]));
    worst = std::max(worst, max_pairwise_gap(rates));
  }
  return worst;
}

double equal_opportunity_diff(std::span<const int> preds, std::span<const int> labels,
                              std::span<const int> groups, std::span<const std::size_t> nodes,
                              int n_classes) {
  const int k = group_count(groups);
  double worst = 0.0;
  bool any_positive = false;
  for (int c : positive_classes(infer_classes(labels, nodes, n_classes))) {
    std::vector<std::size_t> pos(static_cast<std::size_t>(k), 0), hit(static_cast<std::size_t>(k), 0);
    for (std::size_t v : nodes) {
      if (groups[v] < 0 || labels[v] != c) continue;
      ++pos[static_cast<std::size_t>(groups[v])];
      if (preds[v] == c) ++hit[static_cast<std::size_t>(groups[v])];
    }
    std::vector<double> rates;
    for (std::size_t g = 0; g < pos.size(); ++g)
      if (pos[g] > 0) rates.push_back(static_cast<double>(hit[g]) / static_cast<double>(pos[g]));
    if (!rates.empty()) any_positive = true;
    worst = std::max(worst, max_pairwise_gap(rates));
  }
  if (!any_positive) throw Error("equal opportunity: no group has positive-labeled nodes");
  return worst;
}

double attribute_leakage(const Tensor& z, std::span<const int> attr, const NodeSplit& split,
                         const ProbeConfig& config) {
  std::vector<std::size_t> train, test;
  for (std::size_t v : split.train)
    if (attr[v] >= 0) train.push_back(v);
  for (std::size_t v : split.test)
    if (attr[v] >= 0) test.push_back(v);
  if (train.empty() || test.empty()) throw Error("attribute_leakage: empty train or test rows");
  int k = 0;
  for (std::size_t v : train) k = std::max(k, attr[v] + 1);
  for (std::size_t v : test) k = std::max(k, attr[v] + 1);
  {
    const int first = attr[train.front()];
    if (std::all_of(train.begin(), train.end(), [&](std::size_t v) { return attr[v] == first; }))
      throw Error("attribute_leakage: attribute has a single class on train rows");
  }
  const std::size_t d = z.cols();
  const std::size_t kk = static_cast<std::size_t>(k);
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t v : train)
    for (std::size_t j = 0; j < d; ++j) mean[j] += z(v, j);
  for (double& m : mean) m /= static_cast<double>(train.size());
  for (std::size_t v : train)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (z(v, j) - mean[j]) * (z(v, j) - mean[j]);
  for (double& s : sd) {
    s = std::sqrt(s / static_cast<double>(train.size()));
    if (!(s > 1e-12)) s = 1.0;
  }
  auto standardized = [&](const std::vector<std::size_t>& rows) {
    Tensor x(rows.size(), d);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) x(i, j) = (z(rows[i], j) - mean[j]) / sd[j];
    return x;
  };
  const Tensor xtr = standardized(train);
  const Tensor xte = standardized(test);
  Tensor w(d, kk), b(1, kk), gw(d, kk), gb(1, kk);
  const double m = static_cast<double>(train.size());
  std::vector<double> p(kk);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(gw.values().begin(), gw.values().end(), 0.0);
    std::fill(gb.values().begin(), gb.values().end(), 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < kk; ++c) {
        double s = b[c];
        for (std::size_t j = 0; j < d; ++j) s += xtr(i, j) * w(j, c);
        p[c] = s;
        mx = std::max(mx, s);
      }
      double total = 0.0;
      for (double& q : p) {
        q = std::exp(q - mx);
        total += q;
      }
      for (std::size_t c = 0; c < kk; ++c) {
        const double r = p[c] / total - (attr[train[i]] == static_cast<int>(c) ? 1.0 : 0.0);
        gb[c] += r;
        for (std::size_t j = 0; j < d; ++j) gw(j, c) += xtr(i, j) * r;
      }
    }
    for (std::size_t t = 0; t < w.size(); ++t) w[t] -= config.lr * (gw[t] / m + config.l2 * w[t]);
    for (std::size_t c = 0; c < kk; ++c) b[c] -= config.lr * gb[c] / m;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::size_t best = 0;
    double best_s = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < kk; ++c) {
      double s = b[c];
      for (std::size_t j = 0; j < d; ++j) s += xte(i, j) * w(j, c);
      if (s > best_s) {
        best_s = s;
        best = c;
      }
    }
    if (static_cast<int>(best) == attr[test[i]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

MetricRecord evaluate_all(const TrainedModel& trained, const Graph& graph, const NodeSplit& split,
                          const AttackResults& attacks) {
  if (trained.logits.rows() != graph.n_nodes) throw Error("evaluate_all: model / graph size mismatch");
  const Prediction pred = predict_from_logits(trained.logits);
  MetricRecord r;
  const int c = trained.spec.n_classes;
  r.accuracy = accuracy(pred.labels, graph.labels, split.test);
  r.delta_sp = statistical_parity_diff(pred.labels, graph.fairness, split.test, c);
  r.delta_eo = equal_opportunity_diff(pred.labels, graph.labels, graph.fairness, split.test, c);
  r.fair_leak = attribute_leakage(trained.embeddings, graph.fairness, split);
  bool has_privacy = graph.privacy.size() == graph.n_nodes;
  if (has_privacy) {
    int first = -2;
    has_privacy = false;
    for (std::size_t v : split.train) {
      if (graph.privacy[v] < 0) continue;
      if (first == -2) first = graph.privacy[v];
      else if (graph.privacy[v] != first) has_privacy = true;
    }
  }
  r.priv_leak = has_privacy ? attribute_leakage(trained.embeddings, graph.privacy, split)
                            : std::numeric_limits<double>::quiet_NaN();
  r.mia_tree = attacks.mia_tree;
  r.mia_mlp = attacks.mia_mlp;
  r.split_seed = split.seed;
  return r;
}

}  // namespace fairgnn
