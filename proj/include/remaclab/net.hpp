#pragma once

#include <functional>
#include <string>
#include <vector>

#include "remaclab/matrix.hpp"
#include "remaclab/rng.hpp"

namespace remaclab {

enum class Activation { kTanh, kIdentity };

struct Layer {
  Matrix weight;               // out x in
  std::vector<double> bias;    // out
  Activation act = Activation::kIdentity;
};

// Small feed-forward net with analytic backprop. The final layer is expected
// to be identity (outputs are unbounded flow values).
struct DenseNet {
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows; }
  size_t param_count() const;
};

struct ForwardCache {
  // inputs[i] is the input to layer i; inputs.back() is the net output.
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> preacts;
};

struct NetGrads {
  std::vector<Matrix> d_weight;
  std::vector<std::vector<double>> d_bias;
  std::vector<double> d_input;
};

DenseNet make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim, Rng& rng);

std::vector<double> net_forward(const DenseNet& net, const std::vector<double>& x,
                                ForwardCache* cache = nullptr);

// Reverse-mode gradients of y . dy with respect to parameters and input.
NetGrads net_backward(const DenseNet& net, const ForwardCache& cache,
                      const std::vector<double>& dy);

std::vector<double> net_to_flat(const DenseNet& net);
void flat_to_net(const std::vector<double>& flat, DenseNet& net);
std::vector<double> grads_to_flat(const DenseNet& net, const NetGrads& grads);
void accumulate_grads(NetGrads& into, const NetGrads& from);
NetGrads zero_grads(const DenseNet& net);

// Bias-corrected Adam over a flat parameter vector.
struct OptimState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit OptimState(size_t n = 0, double learning_rate = 1e-3)
      : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}
};

// In-place update; throws on non-finite gradients, naming the offending entry.
void adam_step(std::vector<double>& params, const std::vector<double>& grads, OptimState& state,
               const std::function<std::string(size_t)>& param_name = nullptr);

// Max over parameters of |analytic - central difference| / max(|analytic|, |fd|, 1e-12).
double grad_check(const std::function<double(const std::vector<double>&)>& loss_fn,
                  std::vector<double> params, const std::vector<double>& analytic,
                  double eps = 1e-5);

}  // namespace remaclab
