#include "remaclab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "remaclab/io.hpp"

namespace remaclab {

NormStats compute_norm_stats(const Dataset& ds) {
  if (ds.pairs.empty()) throw std::invalid_argument("compute_norm_stats: empty dataset");
  int odim = static_cast<int>(ds.pairs.front().obs.size());
  int D = ds.action_dim;
  NormStats st;
  st.obs_mean.assign(odim, 0.0);
  st.obs_std.assign(odim, 0.0);
  st.act_mean.assign(D, 0.0);
  st.act_std.assign(D, 0.0);

  double n_obs = 0.0, n_act = 0.0;
  for (const auto& p : ds.pairs) {
    for (int i = 0; i < odim; ++i) st.obs_mean[i] += p.obs[i];
    n_obs += 1.0;
    for (int r = 0; r < p.chunk.rows; ++r)
      for (int c = 0; c < D; ++c) st.act_mean[c] += p.chunk(r, c);
    n_act += p.chunk.rows;
  }
  for (double& x : st.obs_mean) x /= n_obs;
  for (double& x : st.act_mean) x /= n_act;
  for (const auto& p : ds.pairs) {
    for (int i = 0; i < odim; ++i) {
      double d = p.obs[i] - st.obs_mean[i];
      st.obs_std[i] += d * d;
    }
    for (int r = 0; r < p.chunk.rows; ++r)
      for (int c = 0; c < D; ++c) {
        double d = p.chunk(r, c) - st.act_mean[c];
        st.act_std[c] += d * d;
      }
  }
  for (double& x : st.obs_std) x = std::max(1e-6, std::sqrt(x / n_obs));
  for (double& x : st.act_std) x = std::max(1e-6, std::sqrt(x / n_act));
  return st;
}

int PolicyParams::expected_input_dim() const {
  return spec.horizon * spec.action_dim + obs_dim + kTimeFeatureDim +
         (mask_input ? spec.horizon : 0);
}

std::vector<double> time_features(double tau_flow) {
  std::vector<double> f;
  f.reserve(kTimeFeatureDim);
  f.push_back(tau_flow);
  for (double freq : {1.0, 2.0, 4.0, 8.0}) {
    f.push_back(std::sin(2.0 * M_PI * freq * tau_flow));
    f.push_back(std::cos(2.0 * M_PI * freq * tau_flow));
  }
  return f;
}

std::vector<double> ones_mask_features(int horizon) {
  return std::vector<double>(horizon, 1.0);
}

PolicyParams make_policy(const ChunkSpec& spec, int obs_dim, const std::vector<int>& hidden,
                         bool mask_input, Rng& rng) {
  spec.validate();
  PolicyParams p;
  p.spec = spec;
  p.obs_dim = obs_dim;
  p.mask_input = mask_input;
  p.norm.obs_mean.assign(obs_dim, 0.0);
  p.norm.obs_std.assign(obs_dim, 1.0);
  p.norm.act_mean.assign(spec.action_dim, 0.0);
  p.norm.act_std.assign(spec.action_dim, 1.0);
  p.net = make_mlp(p.expected_input_dim(), hidden, spec.horizon * spec.action_dim, rng);
  return p;
}

Matrix normalize_chunk(const PolicyParams& p, const Matrix& chunk) {
  require_shape(chunk, p.spec.horizon, p.spec.action_dim, "normalize_chunk");
  Matrix out = chunk;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c)
      out(r, c) = (out(r, c) - p.norm.act_mean[c]) / p.norm.act_std[c];
  return out;
}

Matrix denormalize_chunk(const PolicyParams& p, const Matrix& chunk_norm) {
  require_shape(chunk_norm, p.spec.horizon, p.spec.action_dim, "denormalize_chunk");
  Matrix out = chunk_norm;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c)
      out(r, c) = out(r, c) * p.norm.act_std[c] + p.norm.act_mean[c];
  return out;
}

std::vector<double> normalize_obs(const PolicyParams& p, const std::vector<double>& obs) {
  if (static_cast<int>(obs.size()) != p.obs_dim)
    throw std::invalid_argument("normalize_obs: obs dim mismatch");
  std::vector<double> out(obs.size());
  for (size_t i = 0; i < obs.size(); ++i)
    out[i] = (obs[i] - p.norm.obs_mean[i]) / p.norm.obs_std[i];
  return out;
}

std::vector<double> assemble_input(const PolicyParams& p, const Matrix& chunk_norm,
                                   const std::vector<double>& obs_norm, double tau_flow,
                                   const std::vector<double>& mask_features) {
  std::vector<double> x;
  x.reserve(p.expected_input_dim());
  x.insert(x.end(), chunk_norm.data.begin(), chunk_norm.data.end());
  x.insert(x.end(), obs_norm.begin(), obs_norm.end());
  auto tf = time_features(tau_flow);
  x.insert(x.end(), tf.begin(), tf.end());
  if (p.mask_input) {
    if (static_cast<int>(mask_features.size()) != p.spec.horizon)
      throw std::invalid_argument("assemble_input: mask feature length mismatch");
    x.insert(x.end(), mask_features.begin(), mask_features.end());
  }
  return x;
}

Matrix velocity(const PolicyParams& p, const Matrix& chunk_state, const std::vector<double>& obs,
                double tau_flow, const std::vector<double>* mask_features) {
  if (tau_flow < 0.0 || tau_flow > 1.0)
    throw std::invalid_argument("velocity: tau_flow out of [0,1]");
  if (!all_finite(chunk_state) || !all_finite(obs))
    throw std::invalid_argument("velocity: non-finite input");
  std::vector<double> mask =
      mask_features ? *mask_features : ones_mask_features(p.spec.horizon);
  auto x = assemble_input(p, normalize_chunk(p, chunk_state), normalize_obs(p, obs), tau_flow,
                          mask);
  auto y = net_forward(p.net, x);
  Matrix out(p.spec.horizon, p.spec.action_dim);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c)
      out(r, c) = y[static_cast<size_t>(r) * out.cols + c] * p.norm.act_std[c];
  return out;
}

Matrix integrate(const PolicyParams& p, const std::vector<double>& obs, const Matrix& initial,
                 int n, const std::vector<double>* mask_features) {
  if (n < 1) throw std::invalid_argument("integrate: n must be >= 1");
  require_shape(initial, p.spec.horizon, p.spec.action_dim, "integrate");
  Matrix state = initial;
  for (int k = 0; k < n; ++k) {
    Matrix v = velocity(p, state, obs, static_cast<double>(k) / n, mask_features);
    for (size_t i = 0; i < state.data.size(); ++i) state.data[i] += v.data[i] / n;
  }
  return state;
}

Matrix sample_chunk_prior(const PolicyParams& p, Rng& rng) {
  Matrix z(p.spec.horizon, p.spec.action_dim);
  for (double& x : z.data) x = rng.normal();
  return denormalize_chunk(p, z);
}

FlowSample make_flow_sample(const Matrix& target, Rng& rng) {
  if (!all_finite(target)) throw std::invalid_argument("make_flow_sample: non-finite target");
  FlowSample fs;
  fs.noise = Matrix(target.rows, target.cols);
  for (double& x : fs.noise.data) x = rng.normal();
  fs.s = rng.uniform();
  fs.noisy = Matrix(target.rows, target.cols);
  fs.target_flow = Matrix(target.rows, target.cols);
  for (size_t i = 0; i < target.data.size(); ++i) {
    fs.noisy.data[i] = (1.0 - fs.s) * fs.noise.data[i] + fs.s * target.data[i];
    fs.target_flow.data[i] = target.data[i] - fs.noise.data[i];
  }
  return fs;
}

std::vector<double> pretrain(PolicyParams& params, const Dataset& ds, const PretrainConfig& cfg,
                             Rng& rng) {
  if (ds.pairs.empty()) throw std::invalid_argument("pretrain: empty dataset");
  std::vector<double> curve;
  if (cfg.epochs == 0) return curve;

  const int P = params.spec.horizon, D = params.spec.action_dim;
  auto flat = net_to_flat(params.net);
  OptimState opt(flat.size(), cfg.learning_rate);
  auto ones = ones_mask_features(P);

  std::vector<size_t> order(ds.pairs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the training stream keeps runs seed-deterministic.
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);

    double epoch_loss = 0.0;
    long epoch_terms = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      NetGrads acc = zero_grads(params.net);
      double batch_loss = 0.0;
      for (size_t bi = start; bi < end; ++bi) {
        const ChunkPair& pair = ds.pairs[order[bi]];
        Matrix target_n = normalize_chunk(params, pair.chunk);
        FlowSample fs = make_flow_sample(target_n, rng);
        auto x = assemble_input(params, fs.noisy, normalize_obs(params, pair.obs), fs.s, ones);
        ForwardCache cache;
        auto y = net_forward(params.net, x, &cache);
        std::vector<double> dy(y.size());
        double denom = static_cast<double>(end - start) * P * D;
        for (size_t i = 0; i < y.size(); ++i) {
          double r = y[i] - fs.target_flow.data[i];
          batch_loss += r * r / denom;
          dy[i] = 2.0 * r / denom;
        }
        NetGrads g = net_backward(params.net, cache, dy);
        accumulate_grads(acc, g);
      }
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("pretrain: non-finite loss at epoch " + std::to_string(epoch));
      auto gflat = grads_to_flat(params.net, acc);
      adam_step(flat, gflat, opt);
      flat_to_net(flat, params.net);
      epoch_loss += batch_loss;
      epoch_terms += 1;
    }
    curve.push_back(epoch_loss / std::max(1L, epoch_terms));
  }
  return curve;
}

namespace {

std::string act_name(Activation a) { return a == Activation::kTanh ? "tanh" : "identity"; }

Activation act_from_name(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw std::runtime_error("unknown activation: " + s);
}

std::vector<double> parse_doubles(const std::string& s) {
  std::istringstream in(s);
  std::vector<double> v;
  double x;
  while (in >> x) v.push_back(x);
  return v;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt_double(v[i]);
  }
  return out;
}

std::vector<float> payload_f32(const PolicyParams& p) {
  auto flat = net_to_flat(p.net);
  std::vector<float> f(flat.size());
  for (size_t i = 0; i < flat.size(); ++i) f[i] = static_cast<float>(flat[i]);
  return f;
}

}  // namespace

void save_policy(const PolicyParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  out << "remac-policy v1\n";
  out << "horizon " << p.spec.horizon << "\n";
  out << "action_dim " << p.spec.action_dim << "\n";
  out << "exec_horizon " << p.spec.exec_horizon << "\n";
  out << "integration_steps " << p.spec.integration_steps << "\n";
  out << "mask_input " << (p.mask_input ? 1 : 0) << "\n";
  out << "obs_dim " << p.obs_dim << "\n";
  out << "obs_mean " << join_doubles(p.norm.obs_mean) << "\n";
  out << "obs_std " << join_doubles(p.norm.obs_std) << "\n";
  out << "act_mean " << join_doubles(p.norm.act_mean) << "\n";
  out << "act_std " << join_doubles(p.norm.act_std) << "\n";
  out << "layers " << p.net.layers.size() << "\n";
  for (size_t i = 0; i < p.net.layers.size(); ++i) {
    const Layer& l = p.net.layers[i];
    out << "layer" << i << " " << l.weight.rows << " " << l.weight.cols << " "
        << act_name(l.act) << "\n";
  }
  out << "payload\n";
  auto f = payload_f32(p);
  out.write(reinterpret_cast<const char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(float)));
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_policy: truncated header");
  if (line != "remac-policy v1")
    throw std::runtime_error("load_policy: schema mismatch: expected 'remac-policy v1', got '" +
                             line + "'");
  std::map<std::string, std::string> kv;
  while (std::getline(in, line) && line != "payload") {
    auto sp = line.find(' ');
    if (sp == std::string::npos) throw std::runtime_error("load_policy: malformed line " + line);
    kv[line.substr(0, sp)] = line.substr(sp + 1);
  }
  PolicyParams p;
  p.spec.horizon = std::stoi(kv.at("horizon"));
  p.spec.action_dim = std::stoi(kv.at("action_dim"));
  p.spec.exec_horizon = std::stoi(kv.at("exec_horizon"));
  p.spec.integration_steps = std::stoi(kv.at("integration_steps"));
  p.mask_input = kv.at("mask_input") == "1";
  p.obs_dim = std::stoi(kv.at("obs_dim"));
  p.norm.obs_mean = parse_doubles(kv.at("obs_mean"));
  p.norm.obs_std = parse_doubles(kv.at("obs_std"));
  p.norm.act_mean = parse_doubles(kv.at("act_mean"));
  p.norm.act_std = parse_doubles(kv.at("act_std"));
  size_t n_layers = std::stoull(kv.at("layers"));
  for (size_t i = 0; i < n_layers; ++i) {
    std::istringstream ls(kv.at("layer" + std::to_string(i)));
    int rows, cols;
    std::string act;
    ls >> rows >> cols >> act;
    Layer l;
    l.weight = Matrix(rows, cols);
    l.bias.assign(rows, 0.0);
    l.act = act_from_name(act);
    p.net.layers.push_back(std::move(l));
  }
  size_t count = p.net.param_count();
  auto flat = read_f32(in, count);
  flat_to_net(flat, p.net);
  return p;
}

uint64_t policy_hash(const PolicyParams& p) {
  auto f = payload_f32(p);
  return f.empty() ? fnv1a(nullptr, 0) : fnv1a(f.data(), f.size() * sizeof(float));
}

}  // namespace remaclab
