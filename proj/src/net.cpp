#include "remaclab/net.hpp"

#include <cmath>
#include <stdexcept>

namespace remaclab {

size_t DenseNet::param_count() const {
  size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

DenseNet make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim, Rng& rng) {
  DenseNet net;
  int in = input_dim;
  std::vector<int> dims = hidden;
  dims.push_back(output_dim);
  for (size_t i = 0; i < dims.size(); ++i) {
    Layer l;
    l.weight = Matrix(dims[i], in);
    double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : l.weight.data) w = rng.normal(0.0, scale);
    l.bias.assign(dims[i], 0.0);
    l.act = (i + 1 == dims.size()) ? Activation::kIdentity : Activation::kTanh;
    net.layers.push_back(std::move(l));
    in = dims[i];
  }
  return net;
}

std::vector<double> net_forward(const DenseNet& net, const std::vector<double>& x,
                                ForwardCache* cache) {
  if (net.layers.empty()) throw std::invalid_argument("net_forward: empty net");
  if (static_cast<int>(x.size()) != net.input_dim())
    throw std::invalid_argument("net_forward: input dim mismatch");
  std::vector<double> h = x;
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
  }
  for (const auto& l : net.layers) {
    if (cache) cache->inputs.push_back(h);
    std::vector<double> z = matvec(l.weight, h);
    for (size_t i = 0; i < z.size(); ++i) z[i] += l.bias[i];
    if (cache) cache->preacts.push_back(z);
    if (l.act == Activation::kTanh)
      for (double& v : z) v = std::tanh(v);
    h = std::move(z);
  }
  if (cache) cache->inputs.push_back(h);
  return h;
}

NetGrads net_backward(const DenseNet& net, const ForwardCache& cache,
                      const std::vector<double>& dy) {
  if (cache.inputs.size() != net.layers.size() + 1 || cache.preacts.size() != net.layers.size())
    throw std::invalid_argument("net_backward: cache does not match net");
  if (static_cast<int>(dy.size()) != net.output_dim())
    throw std::invalid_argument("net_backward: dy dim mismatch");

  NetGrads g;
  g.d_weight.resize(net.layers.size());
  g.d_bias.resize(net.layers.size());
  std::vector<double> delta = dy;
  for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
    const Layer& l = net.layers[i];
    if (l.act == Activation::kTanh) {
      const auto& z = cache.preacts[i];
      for (size_t j = 0; j < delta.size(); ++j) {
        double t = std::tanh(z[j]);
        delta[j] *= 1.0 - t * t;
      }
    }
    g.d_weight[i] = outer(delta, cache.inputs[i]);
    g.d_bias[i] = delta;
    delta = matvec_t(l.weight, delta);
  }
  g.d_input = std::move(delta);
  return g;
}

std::vector<double> net_to_flat(const DenseNet& net) {
  std::vector<double> flat;
  flat.reserve(net.param_count());
  for (const auto& l : net.layers) {
    flat.insert(flat.end(), l.weight.data.begin(), l.weight.data.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void flat_to_net(const std::vector<double>& flat, DenseNet& net) {
  if (flat.size() != net.param_count())
    throw std::invalid_argument("flat_to_net: size mismatch");
  size_t k = 0;
  for (auto& l : net.layers) {
    for (double& w : l.weight.data) w = flat[k++];
    for (double& b : l.bias) b = flat[k++];
  }
}

std::vector<double> grads_to_flat(const DenseNet& net, const NetGrads& grads) {
  std::vector<double> flat;
  flat.reserve(net.param_count());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    flat.insert(flat.end(), grads.d_weight[i].data.begin(), grads.d_weight[i].data.end());
    flat.insert(flat.end(), grads.d_bias[i].begin(), grads.d_bias[i].end());
  }
  return flat;
}

NetGrads zero_grads(const DenseNet& net) {
  NetGrads g;
  for (const auto& l : net.layers) {
    g.d_weight.emplace_back(l.weight.rows, l.weight.cols);
    g.d_bias.emplace_back(l.bias.size(), 0.0);
  }
  g.d_input.assign(net.input_dim(), 0.0);
  return g;
}

void accumulate_grads(NetGrads& into, const NetGrads& from) {
  for (size_t i = 0; i < into.d_weight.size(); ++i) {
    for (size_t j = 0; j < into.d_weight[i].data.size(); ++j)
      into.d_weight[i].data[j] += from.d_weight[i].data[j];
    for (size_t j = 0; j < into.d_bias[i].size(); ++j) into.d_bias[i][j] += from.d_bias[i][j];
  }
  for (size_t j = 0; j < into.d_input.size(); ++j) into.d_input[j] += from.d_input[j];
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads, OptimState& state,
               const std::function<std::string(size_t)>& param_name) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  for (size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      std::string name = param_name ? param_name(i) : ("param[" + std::to_string(i) + "]");
      throw std::runtime_error("adam_step: non-finite gradient at " + name);
    }
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

double grad_check(const std::function<double(const std::vector<double>&)>& loss_fn,
                  std::vector<double> params, const std::vector<double>& analytic, double eps) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("grad_check: size mismatch");
  double max_err = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    double orig = params[i];
    params[i] = orig + eps;
    double lp = loss_fn(params);
    params[i] = orig - eps;
    double lm = loss_fn(params);
    params[i] = orig;
    double fd = (lp - lm) / (2.0 * eps);
    double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-12});
    max_err = std::max(max_err, std::abs(analytic[i] - fd) / denom);
  }
  return max_err;
}

}  // namespace remaclab
