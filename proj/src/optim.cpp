#include "fairgnn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "fairgnn/error.hpp"
#include "fairgnn/rng.hpp"

namespace fairgnn {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

bool ParameterSet::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error("unknown parameter: " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<Var> ParameterSet::bind(Tape& tape, bool requires_grad) const {
  std::vector<Var> out;
  out.reserve(values_.size());
  for (const Tensor& t : values_) out.push_back(tape.leaf(t, requires_grad));
  return out;
}

std::vector<Tensor> collect_grads(const Tape& tape, std::span<const Var> leaves) {
  std::vector<Tensor> g;
  g.reserve(leaves.size());
  for (const Var& v : leaves) g.push_back(tape.grad(v));
  return g;
}

void adam_step(std::vector<Tensor>& params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (grads.size() != params.size()) throw ShapeError("adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.rows(), p.cols());
      state.v.emplace_back(p.rows(), p.cols());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) {
      throw ShapeError("adam_step: param " + p.shape_string() + " vs grad " + g.shape_string());
    }
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void add_weight_decay(std::span<Tensor> grads, const std::vector<Tensor>& params,
                      double weight_decay) {
  if (weight_decay == 0.0) return;
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (std::size_t k = 0; k < grads[i].size(); ++k)
      grads[i][k] += weight_decay * params[i][k];
}

GradCheckReport grad_check(const TracedFn& f, const std::vector<Tensor>& params, double eps,
                           double atol) {
  GradCheckReport report;
  std::vector<Tensor> analytic;
  std::vector<signed char> base_kinks;
  double f0 = 0.0;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
    Var loss = f(tape, leaves);
    f0 = loss.value()[0];
    tape.backward(loss);
    analytic = collect_grads(tape, leaves);
    base_kinks = tape.kink_signature();
  }
  auto evaluate = [&](const std::vector<Tensor>& ps, std::vector<signed char>& kinks) {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& p : ps) leaves.push_back(tape.leaf(p, false));
    const double v = f(tape, leaves).value()[0];
    kinks = tape.kink_signature();
    return v;
  };
  const double floor = atol * std::max(1.0, std::abs(f0));
  std::vector<Tensor> work = params;
  std::vector<signed char> kp, km;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      const double orig = work[i][k];
      work[i][k] = orig + eps;
      const double fp = evaluate(work, kp);
      work[i][k] = orig - eps;
      const double fm = evaluate(work, km);
      work[i][k] = orig;
      if (kp != base_kinks || km != base_kinks) {
        ++report.skipped;
        continue;
      }
      const double cd = (fp - fm) / (2.0 * eps);
      const double a = analytic[i][k];
      // Differences below the roundoff floor of the central difference are
      // not errors; this matters where the true gradient is exactly zero.
      const double diff = std::abs(a - cd);
      const double rel = diff <= floor ? 0.0 : diff / (std::abs(a) + std::abs(cd) + 1e-12);
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = "param[" + std::to_string(i) + "][" + std::to_string(k) + "]";
      }
    }
  }
  return report;
}

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w(fan_in, fan_out);
  for (double& v : w.values()) v = rng.uniform(-limit, limit);
  return w;
}

}  // namespace fairgnn
