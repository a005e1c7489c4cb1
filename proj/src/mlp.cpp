#include "fairgnn/mlp.hpp"

#include "fairgnn/error.hpp"
#include "fairgnn/rng.hpp"

namespace fairgnn {

void Mlp::init(ParameterSet& params, Rng& rng, bool zero) const {
  if (dims.size() < 2) throw Error("mlp " + prefix + ": need at least two dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::string p = prefix + ".L" + std::to_string(i);
    params.add(p + ".W", zero ? Tensor(dims[i], dims[i + 1]) : glorot(dims[i], dims[i + 1], rng));
    params.add(p + ".b", Tensor(1, dims[i + 1]));
  }
}

Var Mlp::forward(const ParameterSet& params, std::span<const Var> vars, Var x) const {
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::string p = prefix + ".L" + std::to_string(i);
    x = ops::add_bias(ops::matmul(x, vars[params.index_of(p + ".W")]),
                      vars[params.index_of(p + ".b")]);
    if (i + 2 < dims.size()) x = ops::relu(x);
  }
  return x;
}

MlpTrainer::MlpTrainer(Mlp mlp, Rng& rng, double lr, bool zero_init) : mlp_(std::move(mlp)) {
  mlp_.init(params_, rng, zero_init);
  cfg_.lr = lr;
}

Var MlpTrainer::forward(Tape& tape, Var x) {
  bound_ = params_.bind(tape, true);
  return mlp_.forward(params_, bound_, x);
}

void MlpTrainer::step(const Tape& tape) {
  if (bound_.empty() || bound_.front().tape != &tape)
    throw Error("MlpTrainer::step: parameters not bound to this tape");
  const std::vector<Tensor> grads = collect_grads(tape, bound_);
  adam_step(params_.tensors(), grads, adam_, cfg_);
}

}  // namespace fairgnn
