#include "fairgnn/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fairgnn/error.hpp"
#include "fairgnn/rng.hpp"

namespace fairgnn {

AttackFeatures attack_features(const Tensor& logits, const std::vector<int>& labels,
                               std::span<const std::size_t> members,
                               std::span<const std::size_t> non_members) {
  const std::size_t c = logits.cols();
  AttackFeatures f;
  f.x = Tensor(members.size() + non_members.size(), c + 2);
  std::vector<double> p(c), sorted(c);
  auto fill = [&](std::size_t row, std::size_t v, int member) {
    auto z = logits.row(v);
    // Sorting the logits first makes every sum run in the same order, so
    // the features are exactly invariant to a permutation of the classes.
    std::copy(z.begin(), z.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double mx = sorted[0];
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      p[j] = std::exp(sorted[j] - mx);
      total += p[j];
    }
    for (double& q : p) q /= total;
    const double loss = std::max(0.0, std::log(total) + mx - z[static_cast<std::size_t>(labels[v])]);
    for (std::size_t j = 0; j < c; ++j) f.x(row, j) = p[j];
    f.x(row, c) = loss;
    f.x(row, c + 1) = c > 1 ? p[0] - p[1] : p[0];
    f.member.push_back(member);
    f.nodes.push_back(v);
  };
  std::size_t row = 0;
  for (std::size_t v : members) fill(row++, v, 1);
  for (std::size_t v : non_members) fill(row++, v, 0);
  return f;
}

AttackFeatures build_attack_features(const TrainedModel& model, const Graph& graph,
                                     const NodeSplit& split, std::uint64_t seed) {
  std::vector<std::size_t> members, non_members;
  for (std::size_t v : split.train)
    if (graph.labels[v] >= 0) members.push_back(v);
  for (std::size_t v : split.test)
    if (graph.labels[v] >= 0) non_members.push_back(v);
  Rng rng = Rng::stream(seed, "mia.balance");
  const std::size_t m = std::min(members.size(), non_members.size());
  if (members.size() > m) {
    rng.shuffle(members);
    members.resize(m);
    std::sort(members.begin(), members.end());
  }
  if (non_members.size() > m) {
    rng.shuffle(non_members);
    non_members.resize(m);
    std::sort(non_members.begin(), non_members.end());
  }
  return attack_features(model.logits, graph.labels, members, non_members);
}

namespace {

void check_binary(std::span<const int> labels, std::size_t rows, const char* who) {
  if (labels.size() != rows) throw ShapeError(std::string(who) + ": label count != rows");
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(std::string(who) + ": labels must be 0/1");
    pos += static_cast<std::size_t>(y);
  }
  if (pos == 0 || pos == labels.size()) throw Error(std::string(who) + ": single-class input");
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Attacker fit_tree_attacker(const Tensor& x, std::span<const int> labels, const TreeConfig& config) {
  check_binary(labels, x.rows(), "fit_tree_attacker");
  const std::size_t n = x.rows(), d = x.cols();
  Attacker a;
  a.kind_ = AttackerKind::tree;
  const double rate =
      static_cast<double>(std::accumulate(labels.begin(), labels.end(), 0)) / static_cast<double>(n);
  a.base_score_ = std::log(rate / (1.0 - rate));

  // Candidate thresholds per feature: quantiles of the training values.
  std::vector<std::vector<double>> thresholds(d);
  std::vector<std::vector<int>> bin(d, std::vector<int>(n));
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = x(i, j);
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double>& t = thresholds[j];
    if (static_cast<int>(sorted.size()) <= config.bins) {
      for (std::size_t k = 1; k < sorted.size(); ++k) t.push_back(0.5 * (sorted[k - 1] + sorted[k]));
    } else {
      for (int b = 1; b < config.bins; ++b) {
        const std::size_t idx = static_cast<std::size_t>(b) * sorted.size() / static_cast<std::size_t>(config.bins);
        const double thr = 0.5 * (sorted[idx - 1] + sorted[idx]);
        if (t.empty() || thr > t.back()) t.push_back(thr);
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      bin[j][i] = static_cast<int>(std::upper_bound(t.begin(), t.end(), col[i]) - t.begin());
  }

  std::vector<double> score(n, a.base_score_), g(n), h(n);
  struct Pending {
    int node;
    std::vector<std::size_t> rows;
    int depth;
  };
  for (int round = 0; round < config.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(score[i]);
      g[i] = p - labels[i];
      h[i] = p * (1.0 - p);
    }
    std::vector<Attacker::TreeNode> tree(1);
    std::vector<Pending> stack;
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    stack.push_back({0, std::move(all), 0});
    while (!stack.empty()) {
      Pending cur = std::move(stack.back());
      stack.pop_back();
      double gs = 0.0, hs = 0.0;
      for (std::size_t i : cur.rows) {
        gs += g[i];
        hs += h[i];
      }
      const double parent = gs * gs / (hs + config.lambda);
      double best_gain = 1e-12;
      int best_f = -1, best_b = -1;
      if (cur.depth < config.depth && cur.rows.size() >= 2) {
        for (std::size_t j = 0; j < d; ++j) {
          const std::size_t nb = thresholds[j].size() + 1;
          if (nb < 2) continue;
          std::vector<double> hg(nb, 0.0), hh(nb, 0.0);
          for (std::size_t i : cur.rows) {
            hg[static_cast<std::size_t>(bin[j][i])] += g[i];
            hh[static_cast<std::size_t>(bin[j][i])] += h[i];
          }
          double gl = 0.0, hl = 0.0;
          for (std::size_t b = 0; b + 1 < nb; ++b) {
            gl += hg[b];
            hl += hh[b];
            const double gr = gs - gl, hr = hs - hl;
            if (hl <= 0.0 || hr <= 0.0) continue;
            const double gain = gl * gl / (hl + config.lambda) + gr * gr / (hr + config.lambda) - parent;
            if (gain > best_gain) {
              best_gain = gain;
              best_f = static_cast<int>(j);
              best_b = static_cast<int>(b);
            }
          }
        }
      }
      if (best_f < 0) {
        tree[static_cast<std::size_t>(cur.node)].value = -config.lr * gs / (hs + config.lambda);
        continue;
      }
      std::vector<std::size_t> left, right;
      for (std::size_t i : cur.rows)
        (bin[static_cast<std::size_t>(best_f)][i] <= best_b ? left : right).push_back(i);
      const int li = static_cast<int>(tree.size());
      tree.emplace_back();
      const int ri = static_cast<int>(tree.size());
      tree.emplace_back();
      Attacker::TreeNode& node = tree[static_cast<std::size_t>(cur.node)];
      node.feature = best_f;
      node.threshold = thresholds[static_cast<std::size_t>(best_f)][static_cast<std::size_t>(best_b)];
      node.left = li;
      node.right = ri;
      stack.push_back({ri, std::move(right), cur.depth + 1});
      stack.push_back({li, std::move(left), cur.depth + 1});
    }
    for (std::size_t i = 0; i < n; ++i) {
      int k = 0;
      while (tree[static_cast<std::size_t>(k)].feature >= 0) {
        const auto& nd = tree[static_cast<std::size_t>(k)];
        k = x(i, static_cast<std::size_t>(nd.feature)) < nd.threshold ? nd.left : nd.right;
      }
      score[i] += tree[static_cast<std::size_t>(k)].value;
    }
    a.trees_.push_back(std::move(tree));
  }
  return a;
}

Attacker fit_mlp_attacker(const Tensor& x, std::span<const int> labels,
                          const MlpAttackConfig& config, std::uint64_t seed) {
  check_binary(labels, x.rows(), "fit_mlp_attacker");
  const std::size_t n = x.rows(), d = x.cols();
  Attacker a;
  a.kind_ = AttackerKind::mlp;
  a.mean_.assign(d, 0.0);
  a.sd_.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) a.mean_[j] += x(i, j);
  for (double& m : a.mean_) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) a.sd_[j] += (x(i, j) - a.mean_[j]) * (x(i, j) - a.mean_[j]);
  for (double& s : a.sd_) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 1e-12)) s = 1.0;
  }
  Tensor xs(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) xs(i, j) = (x(i, j) - a.mean_[j]) / a.sd_[j];

  a.mlp_.prefix = "attacker";
  a.mlp_.dims = {d};
  for (std::size_t hdim : config.hidden) a.mlp_.dims.push_back(hdim);
  a.mlp_.dims.push_back(2);
  Rng rng = Rng::stream(seed, "mia.mlp");
  a.mlp_.init(a.params_, rng);
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  AdamState state;
  AdamConfig cfg;
  cfg.lr = config.lr;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Tape tape;
    const std::vector<Var> vars = a.params_.bind(tape, true);
    Var logits = a.mlp_.forward(a.params_, vars, tape.constant(xs));
    Var loss = ops::cross_entropy(logits, labels, rows);
    if (!std::isfinite(loss.value()[0])) throw DivergenceError(epoch);
    tape.backward(loss);
    adam_step(a.params_.tensors(), collect_grads(tape, vars), state, cfg);
  }
  return a;
}

std::vector<double> Attacker::predict_proba(const Tensor& x) const {
  std::vector<double> out(x.rows());
  if (kind_ == AttackerKind::tree) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double s = base_score_;
      for (const auto& tree : trees_) {
        int k = 0;
        while (tree[static_cast<std::size_t>(k)].feature >= 0) {
          const auto& nd = tree[static_cast<std::size_t>(k)];
          k = x(i, static_cast<std::size_t>(nd.feature)) < nd.threshold ? nd.left : nd.right;
        }
        s += tree[static_cast<std::size_t>(k)].value;
      }
      out[i] = sigmoid(s);
    }
    return out;
  }
  Tensor xs(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) xs(i, j) = (x(i, j) - mean_[j]) / sd_[j];
  Tape tape;
  const std::vector<Var> vars = params_.bind(tape, false);
  const Tensor p = softmax_rows(mlp_.forward(params_, vars, tape.constant(xs)).value());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = p(i, 1);
  return out;
}

std::vector<int> Attacker::predict(const Tensor& x) const {
  const std::vector<double> p = predict_proba(x);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > 0.5 ? 1 : 0;
  return out;
}

double attack_accuracy(const AttackFeatures& features, AttackerKind kind, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < features.member.size(); ++i)
    (features.member[i] == 1 ? pos : neg).push_back(i);
  Rng rng = Rng::stream(seed, "mia.split");
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<std::size_t> fit_rows, eval_rows;
  for (const auto* side : {&pos, &neg}) {
    const std::size_t half = side->size() / 2;
    fit_rows.insert(fit_rows.end(), side->begin(), side->begin() + static_cast<std::ptrdiff_t>(half));
    eval_rows.insert(eval_rows.end(), side->begin() + static_cast<std::ptrdiff_t>(half), side->end());
  }
  auto gather = [&](const std::vector<std::size_t>& rows, Tensor& x, std::vector<int>& y) {
    x = Tensor(rows.size(), features.x.cols());
    y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(features.x.row(rows[i]).begin(), features.x.row(rows[i]).end(), x.row(i).begin());
      y[i] = features.member[rows[i]];
    }
  };
  Tensor xf, xe;
  std::vector<int> yf, ye;
  gather(fit_rows, xf, yf);
  gather(eval_rows, xe, ye);
  if (ye.empty()) throw Error("attack_accuracy: not enough nodes for an evaluation half");
  const Attacker attacker =
      kind == AttackerKind::tree ? fit_tree_attacker(xf, yf) : fit_mlp_attacker(xf, yf, {}, seed);
  const std::vector<int> pred = attacker.predict(xe);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == ye[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double mia_accuracy(const TrainedModel& model, const Graph& graph, const NodeSplit& split,
                    AttackerKind kind, std::uint64_t seed) {
  return attack_accuracy(build_attack_features(model, graph, split, seed), kind, seed);
}

AttackResults run_attacks(const TrainedModel& model, const Graph& graph, const NodeSplit& split,
                          std::uint64_t seed) {
  const AttackFeatures f = build_attack_features(model, graph, split, seed);
  return {attack_accuracy(f, AttackerKind::tree, seed), attack_accuracy(f, AttackerKind::mlp, seed)};
}

}  // namespace fairgnn
