#include "remaclab/adapters.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "remaclab/io.hpp"

namespace remaclab {

namespace {

int mask_slice_offset(const PolicyParams& p) {
  return p.spec.horizon * p.spec.action_dim + p.obs_dim + kTimeFeatureDim;
}

}  // namespace

AdaptedPolicy attach(const PolicyParams& base, const AdapterConfig& cfg, Rng& rng) {
  if (cfg.rank < 1) throw std::invalid_argument("attach: rank must be >= 1");
  AdaptedPolicy a;
  a.base = base;
  a.cfg = cfg;
  a.targets = cfg.target_layers;
  if (a.targets.empty())
    for (size_t i = 0; i < base.net.layers.size(); ++i) a.targets.push_back(static_cast<int>(i));
  for (int t : a.targets)
    if (t < 0 || t >= static_cast<int>(base.net.layers.size()))
      throw std::invalid_argument("attach: target layer index out of range");
  if (a.targets.empty()) throw std::invalid_argument("attach: no target layers");

  for (int t : a.targets) {
    const Layer& l = base.net.layers[t];
    LoraPair pair;
    pair.down = Matrix(cfg.rank, l.weight.cols);
    double scale = 1.0 / std::sqrt(static_cast<double>(l.weight.cols));
    for (double& x : pair.down.data) x = rng.normal(0.0, scale);
    pair.up = Matrix(l.weight.rows, cfg.rank);  // zeros: attach changes nothing
    a.pairs.push_back(std::move(pair));
  }
  a.mask_proj = Matrix(base.spec.horizon, base.spec.horizon);
  for (int i = 0; i < base.spec.horizon; ++i) a.mask_proj(i, i) = 1.0;
  return a;
}

double adapter_param_ratio(const AdaptedPolicy& a) {
  size_t added = 0;
  for (const auto& p : a.pairs) added += p.down.size() + p.up.size();
  if (a.cfg.mask_embedding) added += a.mask_proj.size();
  return static_cast<double>(added) / static_cast<double>(a.base.net.param_count());
}

DenseNet effective_net(const AdaptedPolicy& a) {
  DenseNet net = a.base.net;
  double scale = a.cfg.alpha / a.cfg.rank;
  for (size_t i = 0; i < a.targets.size(); ++i) {
    Matrix delta = matmul(a.pairs[i].up, a.pairs[i].down);
    Matrix& w = net.layers[a.targets[i]].weight;
    for (size_t k = 0; k < w.data.size(); ++k) w.data[k] += scale * delta.data[k];
  }
  return net;
}

std::vector<double> mask_features(const AdaptedPolicy& a, const std::vector<double>& mask_raw) {
  if (static_cast<int>(mask_raw.size()) != a.base.spec.horizon)
    throw std::invalid_argument("mask_features: mask length mismatch");
  if (!a.cfg.mask_embedding) return mask_raw;
  return matvec(a.mask_proj, mask_raw);
}

Matrix forward_with_adapters(const AdaptedPolicy& a, const Matrix& chunk_state,
                             const std::vector<double>& obs, double tau_flow,
                             const std::vector<double>& mask_raw, bool enabled) {
  if (!enabled) return velocity(a.base, chunk_state, obs, tau_flow);
  const PolicyParams& b = a.base;
  auto feats = mask_features(a, mask_raw);
  auto x = assemble_input(b, normalize_chunk(b, chunk_state), normalize_obs(b, obs), tau_flow,
                          feats);
  DenseNet eff = effective_net(a);
  auto y = net_forward(eff, x);
  Matrix out(b.spec.horizon, b.spec.action_dim);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c)
      out(r, c) = y[static_cast<size_t>(r) * out.cols + c] * b.norm.act_std[c];
  return out;
}

PolicyParams merge(AdaptedPolicy& a) {
  if (a.merged) throw std::runtime_error("merge: adapters already merged");
  PolicyParams out = a.base;
  out.net = effective_net(a);
  if (a.cfg.mask_embedding && a.base.mask_input) {
    // Fold the projection into the first layer's mask-feature columns so the
    // merged net consumes raw masks.
    Matrix& w = out.net.layers.front().weight;
    int off = mask_slice_offset(a.base);
    int P = a.base.spec.horizon;
    Matrix cols(w.rows, P);
    for (int r = 0; r < w.rows; ++r)
      for (int c = 0; c < P; ++c) cols(r, c) = w(r, off + c);
    Matrix folded = matmul(cols, a.mask_proj);
    for (int r = 0; r < w.rows; ++r)
      for (int c = 0; c < P; ++c) w(r, off + c) = folded(r, c);
  }
  a.merged = true;
  return out;
}

std::vector<double> adapter_to_flat(const AdaptedPolicy& a) {
  std::vector<double> flat;
  for (const auto& p : a.pairs) {
    flat.insert(flat.end(), p.down.data.begin(), p.down.data.end());
    flat.insert(flat.end(), p.up.data.begin(), p.up.data.end());
  }
  if (a.cfg.mask_embedding)
    flat.insert(flat.end(), a.mask_proj.data.begin(), a.mask_proj.data.end());
  return flat;
}

void flat_to_adapter(const std::vector<double>& flat, AdaptedPolicy& a) {
  size_t k = 0;
  for (auto& p : a.pairs) {
    for (double& x : p.down.data) x = flat.at(k++);
    for (double& x : p.up.data) x = flat.at(k++);
  }
  if (a.cfg.mask_embedding)
    for (double& x : a.mask_proj.data) x = flat.at(k++);
  if (k != flat.size()) throw std::invalid_argument("flat_to_adapter: size mismatch");
}

std::vector<double> adapter_grads_from_net(const AdaptedPolicy& a, const NetGrads& net_grads,
                                           const std::vector<double>& mask_raw) {
  double scale = a.cfg.alpha / a.cfg.rank;
  std::vector<double> flat;
  for (size_t i = 0; i < a.targets.size(); ++i) {
    const Matrix& dw = net_grads.d_weight[a.targets[i]];
    // W_eff = W + s*up*down: d_down = s * up^T dW, d_up = s * dW down^T.
    Matrix d_down = scaled(matmul(transpose(a.pairs[i].up), dw), scale);
    Matrix d_up = scaled(matmul(dw, transpose(a.pairs[i].down)), scale);
    flat.insert(flat.end(), d_down.data.begin(), d_down.data.end());
    flat.insert(flat.end(), d_up.data.begin(), d_up.data.end());
  }
  if (a.cfg.mask_embedding) {
    int off = mask_slice_offset(a.base);
    int P = a.base.spec.horizon;
    // features = mask_proj * mask_raw, so d_proj = d_features (x) mask_raw.
    for (int r = 0; r < P; ++r)
      for (int c = 0; c < P; ++c)
        flat.push_back(net_grads.d_input[off + r] * mask_raw[c]);
  }
  return flat;
}

std::string adapter_param_name(const AdaptedPolicy& a, size_t flat_index) {
  size_t k = flat_index;
  for (size_t i = 0; i < a.pairs.size(); ++i) {
    size_t dn = a.pairs[i].down.size(), un = a.pairs[i].up.size();
    if (k < dn) return "layer" + std::to_string(a.targets[i]) + ".down[" + std::to_string(k) + "]";
    k -= dn;
    if (k < un) return "layer" + std::to_string(a.targets[i]) + ".up[" + std::to_string(k) + "]";
    k -= un;
  }
  return "mask_proj[" + std::to_string(k) + "]";
}

void save_adapter(const AdaptedPolicy& a, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_adapter: cannot open " + path);
  out << "remac-adapter v1\n";
  out << "base_hash " << policy_hash(a.base) << "\n";
  out << "rank " << a.cfg.rank << "\n";
  out << "alpha " << fmt_double(a.cfg.alpha) << "\n";
  out << "mask_embedding " << (a.cfg.mask_embedding ? 1 : 0) << "\n";
  out << "targets";
  for (int t : a.targets) out << " " << t;
  out << "\n";
  out << "payload\n";
  auto flat = adapter_to_flat(a);
  std::vector<float> f(flat.begin(), flat.end());
  // mask_proj is always serialized, embedded or not, to keep the layout fixed
  if (!a.cfg.mask_embedding) {
    for (double x : a.mask_proj.data) f.push_back(static_cast<float>(x));
  }
  out.write(reinterpret_cast<const char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(float)));
}

AdaptedPolicy load_adapter(const std::string& path, const PolicyParams& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_adapter: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "remac-adapter v1")
    throw std::runtime_error("load_adapter: schema mismatch: expected 'remac-adapter v1', got '" +
                             line + "'");
  std::map<std::string, std::string> kv;
  while (std::getline(in, line) && line != "payload") {
    auto sp = line.find(' ');
    if (sp == std::string::npos) throw std::runtime_error("load_adapter: malformed line " + line);
    kv[line.substr(0, sp)] = line.substr(sp + 1);
  }
  uint64_t want_hash = std::stoull(kv.at("base_hash"));
  uint64_t have_hash = policy_hash(base);
  if (want_hash != have_hash)
    throw std::runtime_error("load_adapter: base checkpoint hash mismatch (adapter expects " +
                             std::to_string(want_hash) + ", base is " +
                             std::to_string(have_hash) + ")");
  AdapterConfig cfg;
  cfg.rank = std::stoi(kv.at("rank"));
  cfg.alpha = std::stod(kv.at("alpha"));
  cfg.mask_embedding = kv.at("mask_embedding") == "1";
  {
    std::istringstream ts(kv.at("targets"));
    int t;
    while (ts >> t) cfg.target_layers.push_back(t);
  }
  Rng rng(0);
  AdaptedPolicy a = attach(base, cfg, rng);
  size_t n = 0;
  for (const auto& p : a.pairs) n += p.down.size() + p.up.size();
  n += a.mask_proj.size();
  auto flat = read_f32(in, n);
  size_t core = n - a.mask_proj.size();
  std::vector<double> adapter_part(flat.begin(), flat.begin() + core);
  if (cfg.mask_embedding) {
    adapter_part.insert(adapter_part.end(), flat.begin() + core, flat.end());
    flat_to_adapter(adapter_part, a);
  } else {
    flat_to_adapter(adapter_part, a);
    for (size_t i = 0; i < a.mask_proj.size(); ++i) a.mask_proj.data[i] = flat[core + i];
  }
  return a;
}

}  // namespace remaclab
