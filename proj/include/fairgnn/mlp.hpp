#pragma once

#include <span>
#include <string>
#include <vector>

#include "fairgnn/autodiff.hpp"
#include "fairgnn/optim.hpp"

namespace fairgnn {

class Rng;

/// Fully connected network with relu between layers and a linear output.
/// Parameters are named <prefix>.L<i>.W and <prefix>.L<i>.b.
struct Mlp {
  std::string prefix;
  std::vector<std::size_t> dims;

  /// Glorot weights, zero biases. `zero` makes every tensor zero.
  void init(ParameterSet& params, Rng& rng, bool zero = false) const;
  Var forward(const ParameterSet& params, std::span<const Var> vars, Var x) const;
};

/// Small trainable network with its own Adam state.
class MlpTrainer {
 public:
  MlpTrainer(Mlp mlp, Rng& rng, double lr, bool zero_init = false);

  /// Binds the parameters to `tape` and returns the network output on x.
  Var forward(Tape& tape, Var x);
  /// Adam step from the gradients currently on `tape` (after a backward()).
  void step(const Tape& tape);

  const ParameterSet& params() const { return params_; }
  const Mlp& mlp() const { return mlp_; }

 private:
  Mlp mlp_;
  ParameterSet params_;
  std::vector<Var> bound_;
  AdamState adam_;
  AdamConfig cfg_;
};

}  // namespace fairgnn
