#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fairgnn/autodiff.hpp"
#include "fairgnn/tensor.hpp"

namespace fairgnn {

/// Ordered, named collection of trainable tensors.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);
  std::size_t size() const { return values_.size(); }
  bool contains(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;

  Tensor& at(std::size_t i) { return values_[i]; }
  const Tensor& at(std::size_t i) const { return values_[i]; }
  Tensor& operator[](const std::string& name) { return values_[index_of(name)]; }
  const Tensor& operator[](const std::string& name) const { return values_[index_of(name)]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& tensors() { return values_; }
  const std::vector<Tensor>& tensors() const { return values_; }

  /// Registers every tensor as a trainable leaf on `tape`, in order.
  std::vector<Var> bind(Tape& tape, bool requires_grad = true) const;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Gradients of `loss` for each bound leaf, read after tape.backward().
std::vector<Tensor> collect_grads(const Tape& tape, std::span<const Var> leaves);

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update, in place.
void adam_step(std::vector<Tensor>& params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg);

/// Adds weight_decay * p to each gradient (coupled L2, as in classic Adam).
void add_weight_decay(std::span<Tensor> grads, const std::vector<Tensor>& params,
                      double weight_decay);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose central difference straddles a relu/abs kink.
  std::size_t skipped = 0;
  std::string worst_param;

  bool passed(double rtol) const { return checked > 0 && max_rel_error <= rtol; }
};

using TracedFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares reverse-mode gradients with central differences. Per coordinate:
/// |analytic - cd| / (|analytic| + |cd| + 1e-12), taken as 0 when
/// |analytic - cd| <= atol * max(1, |f|), the roundoff level of the
/// difference quotient.
GradCheckReport grad_check(const TracedFn& f, const std::vector<Tensor>& params,
                           double eps = 1e-5, double atol = 1e-8);

/// Glorot-uniform init for a fan_in x fan_out matrix.
class Rng;
Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace fairgnn
