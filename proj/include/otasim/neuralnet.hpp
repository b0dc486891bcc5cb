#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "otasim/rng.hpp"
#include "otasim/signal.hpp"

namespace otasim {

// Conv (1 x conv_kernel_w, "valid" along the width axis, applied to the
// 2 x input_len frame as a 2-row image) -> ReLU -> flatten -> dense hidden
// layer(s) with ReLU and dropout -> dense 2-logit output -> softmax.
struct ArchSpec {
  std::size_t input_len = 16;
  std::size_t conv_filters = 16;
  std::size_t conv_kernel_w = 3;
  std::vector<std::size_t> hidden_layers{64};
  double dropout_rate = 0.1;
};

inline void validate(const ArchSpec& a) {
  if (a.input_len == 0) throw std::invalid_argument("arch: input_len must be >= 1");
  if (a.conv_filters == 0) throw std::invalid_argument("arch: conv_filters must be >= 1");
  if (a.conv_kernel_w == 0 || a.conv_kernel_w > a.input_len)
    throw std::invalid_argument("arch: conv kernel width must be in [1, input_len]");
  if (a.hidden_layers.empty())
    throw std::invalid_argument("arch: at least one hidden layer required");
  for (std::size_t w : a.hidden_layers)
    if (w == 0) throw std::invalid_argument("arch: hidden width must be >= 1");
  if (!(a.dropout_rate >= 0.0 && a.dropout_rate < 1.0))
    throw std::invalid_argument("arch: dropout_rate must be in [0, 1)");
}

inline std::size_t conv_out_width(const ArchSpec& a) {
  return a.input_len - a.conv_kernel_w + 1;
}

inline std::size_t flat_size(const ArchSpec& a) {
  return a.conv_filters * 2 * conv_out_width(a);
}

struct DenseLayer {
  std::size_t in = 0, out = 0;
  std::vector<double> w;  // row-major, out x in
  std::vector<double> b;  // out
};

struct TrainMeta {
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::size_t epochs_run = 0;
};

struct Model {
  ArchSpec arch;
  std::vector<double> conv_w;  // conv_filters x conv_kernel_w
  std::vector<double> conv_b;  // conv_filters
  std::vector<DenseLayer> dense;  // hidden layers ..., then 2-logit output
  TrainMeta meta;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
};

inline void validate(const TrainConfig& c) {
  if (c.epochs == 0 || c.batch_size == 0)
    throw std::invalid_argument("train config: counts must be positive");
  if (!(c.learning_rate > 0.0) || !(c.adam_beta1 > 0.0) || !(c.adam_beta2 > 0.0) ||
      !(c.adam_eps > 0.0))
    throw std::invalid_argument("train config: rates must be positive");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0))
    throw std::invalid_argument("train config: validation_fraction must be in (0, 1)");
}

inline std::size_t param_count(const Model& m) {
  std::size_t n = m.conv_w.size() + m.conv_b.size();
  for (const DenseLayer& d : m.dense) n += d.w.size() + d.b.size();
  return n;
}

inline std::size_t label_index(ClassLabel y) { return y == ClassLabel::Signal ? 0 : 1; }

// He-style uniform fan-in init for the weights, zero biases.
inline Model init_model(const ArchSpec& arch, Rng& rng) {
  validate(arch);
  Model m;
  m.arch = arch;
  const std::size_t kw = arch.conv_kernel_w;
  m.conv_w.resize(arch.conv_filters * kw);
  m.conv_b.assign(arch.conv_filters, 0.0);
  const double conv_limit = std::sqrt(6.0 / static_cast<double>(kw));
  for (double& w : m.conv_w) w = conv_limit * rng.next_symmetric();

  std::size_t in = flat_size(arch);
  std::vector<std::size_t> widths = arch.hidden_layers;
  widths.push_back(2);
  for (std::size_t out : widths) {
    DenseLayer d;
    d.in = in;
    d.out = out;
    d.w.resize(out * in);
    d.b.assign(out, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (double& w : d.w) w = limit * rng.next_symmetric();
    m.dense.push_back(std::move(d));
    in = out;
  }
  return m;
}

enum class RunMode { Train, Eval };

struct Probs {
  double p_signal = 0.0;
  double p_noise = 0.0;
};

namespace detail {

struct Workspace {
  std::vector<double> conv_pre, conv_act;
  std::vector<std::vector<double>> pre;    // per dense layer
  std::vector<std::vector<double>> act;    // per hidden layer (post relu+dropout)
  std::vector<std::vector<double>> mask;   // dropout scale per hidden unit
  double logits[2] = {0.0, 0.0};
  double p[2] = {0.0, 0.0};

  void resize(const ArchSpec& a) {
    conv_pre.resize(flat_size(a));
    conv_act.resize(flat_size(a));
    const std::size_t nl = a.hidden_layers.size() + 1;
    pre.resize(nl);
    act.resize(a.hidden_layers.size());
    mask.resize(a.hidden_layers.size());
    for (std::size_t l = 0; l < a.hidden_layers.size(); ++l) {
      pre[l].resize(a.hidden_layers[l]);
      act[l].resize(a.hidden_layers[l]);
      mask[l].resize(a.hidden_layers[l]);
    }
    pre[nl - 1].resize(2);
  }
};

inline void forward_pass(const Model& m, const RealFrame& input, RunMode mode,
                         Rng* rng, Workspace& ws) {
  const ArchSpec& a = m.arch;
  if (input.cols != a.input_len || input.data.size() != 2 * a.input_len)
    throw std::invalid_argument("forward: input shape mismatch");
  const bool dropout = mode == RunMode::Train && a.dropout_rate > 0.0;
  if (dropout && rng == nullptr)
    throw std::invalid_argument("forward: train mode with dropout needs an rng");
  ws.resize(a);

  const std::size_t ow = conv_out_width(a);
  const std::size_t kw = a.conv_kernel_w;
  for (std::size_t f = 0; f < a.conv_filters; ++f) {
    const double* wf = &m.conv_w[f * kw];
    const double bf = m.conv_b[f];
    for (std::size_t r = 0; r < 2; ++r) {
      const double* row = &input.data[r * a.input_len];
      double* pre = &ws.conv_pre[(f * 2 + r) * ow];
      double* act = &ws.conv_act[(f * 2 + r) * ow];
      for (std::size_t c = 0; c < ow; ++c) {
        double s = bf;
        for (std::size_t j = 0; j < kw; ++j) s += wf[j] * row[c + j];
        pre[c] = s;
        act[c] = s > 0.0 ? s : 0.0;
      }
    }
  }

  const double keep_scale = 1.0 / (1.0 - a.dropout_rate);
  const std::vector<double>* x = &ws.conv_act;
  const std::size_t n_hidden = a.hidden_layers.size();
  for (std::size_t l = 0; l < n_hidden; ++l) {
    const DenseLayer& d = m.dense[l];
    for (std::size_t o = 0; o < d.out; ++o) {
      const double* wrow = &d.w[o * d.in];
      double s = d.b[o];
      for (std::size_t j = 0; j < d.in; ++j) s += wrow[j] * (*x)[j];
      ws.pre[l][o] = s;
      double act = s > 0.0 ? s : 0.0;
      if (dropout) {
        const double mask = rng->next_unit() <= a.dropout_rate ? 0.0 : keep_scale;
        ws.mask[l][o] = mask;
        act *= mask;
      } else {
        ws.mask[l][o] = 1.0;
      }
      ws.act[l][o] = act;
    }
    x = &ws.act[l];
  }

  const DenseLayer& out = m.dense[n_hidden];
  for (std::size_t o = 0; o < 2; ++o) {
    const double* wrow = &out.w[o * out.in];
    double s = out.b[o];
    for (std::size_t j = 0; j < out.in; ++j) s += wrow[j] * (*x)[j];
    ws.pre[n_hidden][o] = s;
    ws.logits[o] = s;
  }
  const double mx = std::max(ws.logits[0], ws.logits[1]);
  const double e0 = std::exp(ws.logits[0] - mx);
  const double e1 = std::exp(ws.logits[1] - mx);
  ws.p[0] = e0 / (e0 + e1);
  ws.p[1] = e1 / (e0 + e1);
}

struct ParamGrads {
  std::vector<double> conv_w, conv_b;
  std::vector<std::vector<double>> dense_w, dense_b;

  void resize(const Model& m) {
    conv_w.resize(m.conv_w.size());
    conv_b.resize(m.conv_b.size());
    dense_w.resize(m.dense.size());
    dense_b.resize(m.dense.size());
    for (std::size_t l = 0; l < m.dense.size(); ++l) {
      dense_w[l].resize(m.dense[l].w.size());
      dense_b[l].resize(m.dense[l].b.size());
    }
  }

  void zero() {
    std::fill(conv_w.begin(), conv_w.end(), 0.0);
    std::fill(conv_b.begin(), conv_b.end(), 0.0);
    for (auto& v : dense_w) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : dense_b) std::fill(v.begin(), v.end(), 0.0);
  }
};

// Backpropagates d(loss)/d(logits) through the net. Parameter gradients are
// accumulated into pg (if non-null); the input gradient overwrites dinput
// (if non-null). Uses the activations and masks recorded in ws.
inline void backward_pass(const Model& m, const RealFrame& input,
                          const Workspace& ws, const double dlogits[2],
                          ParamGrads* pg, RealFrame* dinput) {
  const ArchSpec& a = m.arch;
  const std::size_t n_hidden = a.hidden_layers.size();

  std::vector<double> d(dlogits, dlogits + 2);
  std::vector<double> dx;
  for (std::size_t l = n_hidden + 1; l-- > 0;) {
    const DenseLayer& dl = m.dense[l];
    const std::vector<double>& x_in = l == 0 ? ws.conv_act : ws.act[l - 1];
    if (pg) {
      for (std::size_t o = 0; o < dl.out; ++o) {
        const double do_ = d[o];
        double* gw = &pg->dense_w[l][o * dl.in];
        for (std::size_t j = 0; j < dl.in; ++j) gw[j] += do_ * x_in[j];
        pg->dense_b[l][o] += do_;
      }
    }
    dx.assign(dl.in, 0.0);
    for (std::size_t o = 0; o < dl.out; ++o) {
      const double do_ = d[o];
      const double* wrow = &dl.w[o * dl.in];
      for (std::size_t j = 0; j < dl.in; ++j) dx[j] += do_ * wrow[j];
    }
    if (l > 0) {
      // through dropout and relu of hidden layer l-1
      for (std::size_t j = 0; j < dx.size(); ++j) {
        const double g = ws.pre[l - 1][j] > 0.0 ? ws.mask[l - 1][j] : 0.0;
        dx[j] *= g;
      }
    }
    d.swap(dx);
  }

  // d now holds d(loss)/d(conv_act)
  const std::size_t ow = conv_out_width(a);
  const std::size_t kw = a.conv_kernel_w;
  if (dinput) {
    dinput->cols = a.input_len;
    dinput->data.assign(2 * a.input_len, 0.0);
  }
  for (std::size_t f = 0; f < a.conv_filters; ++f) {
    const double* wf = &m.conv_w[f * kw];
    for (std::size_t r = 0; r < 2; ++r) {
      const double* row = &input.data[r * a.input_len];
      const std::size_t base = (f * 2 + r) * ow;
      for (std::size_t c = 0; c < ow; ++c) {
        if (ws.conv_pre[base + c] <= 0.0) continue;
        const double g = d[base + c];
        if (pg) {
          double* gw = &pg->conv_w[f * kw];
          for (std::size_t j = 0; j < kw; ++j) gw[j] += g * row[c + j];
          pg->conv_b[f] += g;
        }
        if (dinput) {
          double* drow = &dinput->data[r * a.input_len];
          for (std::size_t j = 0; j < kw; ++j) drow[c + j] += g * wf[j];
        }
      }
    }
  }
}

inline Workspace& tls_workspace() {
  thread_local Workspace ws;
  return ws;
}

}  // namespace detail

inline Probs forward(const Model& m, const RealFrame& input,
                     RunMode mode = RunMode::Eval, Rng* rng = nullptr) {
  detail::Workspace& ws = detail::tls_workspace();
  detail::forward_pass(m, input, mode, rng, ws);
  return Probs{ws.p[0], ws.p[1]};
}

// Argmax of the eval-mode forward pass; exact ties resolve to Noise.
inline ClassLabel classify(const Model& m, const RealFrame& input) {
  const Probs p = forward(m, input);
  return p.p_signal > p.p_noise ? ClassLabel::Signal : ClassLabel::Noise;
}

inline ClassLabel classify(const Model& m, const IqFrame& f) {
  return classify(m, to_real(f));
}

// Cross-entropy -log p_label, eval mode, computed from the logits for
// numerical stability.
inline double loss(const Model& m, const RealFrame& input, ClassLabel label) {
  detail::Workspace& ws = detail::tls_workspace();
  detail::forward_pass(m, input, RunMode::Eval, nullptr, ws);
  const double mx = std::max(ws.logits[0], ws.logits[1]);
  const double z = std::exp(ws.logits[0] - mx) + std::exp(ws.logits[1] - mx);
  return std::log(z) - (ws.logits[label_index(label)] - mx);
}

struct InputGradient {
  RealFrame values;  // d(loss)/d(input), 2 x k

  std::vector<cplx> complex_view() const {
    std::vector<cplx> g(values.cols);
    for (std::size_t i = 0; i < values.cols; ++i)
      g[i] = cplx{values.at(0, i), values.at(1, i)};
    return g;
  }
};

// Exact gradient of loss(m, input, target) with respect to the input,
// eval mode (dropout off).
inline InputGradient input_gradient(const Model& m, const RealFrame& input,
                                    ClassLabel target) {
  detail::Workspace& ws = detail::tls_workspace();
  detail::forward_pass(m, input, RunMode::Eval, nullptr, ws);
  double dlogits[2] = {ws.p[0], ws.p[1]};
  dlogits[label_index(target)] -= 1.0;
  InputGradient g;
  detail::backward_pass(m, input, ws, dlogits, nullptr, &g.values);
  return g;
}

inline std::vector<cplx> input_gradient_frame(const Model& m, const IqFrame& f,
                                              ClassLabel target) {
  return input_gradient(m, to_real(f), target).complex_view();
}

inline double accuracy(const Model& m, const std::vector<LabeledFrame>& data) {
  if (data.empty()) throw std::invalid_argument("accuracy: empty data");
  std::size_t hits = 0;
  for (const LabeledFrame& lf : data)
    if (classify(m, lf.frame) == lf.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

// Owns a model plus Adam state; train() drives it, tests can single-step it.
class Trainer {
 public:
  Trainer(Model model, const TrainConfig& cfg)
      : model_(std::move(model)),
        cfg_(cfg),
        dropout_rng_(derive_seed(cfg.seed, {kDropoutStream})) {
    validate(cfg_);
    grads_.resize(model_);
    adam_m_.resize(model_);
    adam_m_.zero();
    adam_v_.resize(model_);
    adam_v_.zero();
  }

  // One Adam step on the given batch (train-mode gradients, averaged).
  void step(const std::vector<const RealFrame*>& inputs,
            const std::vector<ClassLabel>& labels) {
    grads_.zero();
    detail::Workspace& ws = detail::tls_workspace();
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      detail::forward_pass(model_, *inputs[s], RunMode::Train, &dropout_rng_, ws);
      double dlogits[2] = {ws.p[0], ws.p[1]};
      dlogits[label_index(labels[s])] -= 1.0;
      detail::backward_pass(model_, *inputs[s], ws, dlogits, &grads_, nullptr);
    }
    const double inv = 1.0 / static_cast<double>(inputs.size());
    ++t_;
    const double c1 = 1.0 / (1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_)));
    const double c2 = 1.0 / (1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_)));
    adam_update(model_.conv_w, grads_.conv_w, adam_m_.conv_w, adam_v_.conv_w, inv, c1, c2);
    adam_update(model_.conv_b, grads_.conv_b, adam_m_.conv_b, adam_v_.conv_b, inv, c1, c2);
    for (std::size_t l = 0; l < model_.dense.size(); ++l) {
      adam_update(model_.dense[l].w, grads_.dense_w[l], adam_m_.dense_w[l],
                  adam_v_.dense_w[l], inv, c1, c2);
      adam_update(model_.dense[l].b, grads_.dense_b[l], adam_m_.dense_b[l],
                  adam_v_.dense_b[l], inv, c1, c2);
    }
  }

  double mean_loss(const std::vector<const RealFrame*>& inputs,
                   const std::vector<ClassLabel>& labels) const {
    double total = 0.0;
    for (std::size_t s = 0; s < inputs.size(); ++s)
      total += loss(model_, *inputs[s], labels[s]);
    return total / static_cast<double>(inputs.size());
  }

  Model& model() { return model_; }
  const Model& model() const { return model_; }

  // Summed (not averaged) parameter gradients from the most recent step.
  const detail::ParamGrads& gradients() const { return grads_; }

  static constexpr std::uint64_t kInitStream = 11;
  static constexpr std::uint64_t kShuffleStream = 12;
  static constexpr std::uint64_t kDropoutStream = 13;

 private:
  void adam_update(std::vector<double>& p, const std::vector<double>& g,
                   std::vector<double>& m, std::vector<double>& v, double inv_batch,
                   double c1, double c2) {
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * inv_batch;
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      p[i] -= cfg_.learning_rate * (m[i] * c1) / (std::sqrt(v[i] * c2) + cfg_.adam_eps);
    }
  }

  Model model_;
  TrainConfig cfg_;
  Rng dropout_rng_;
  detail::ParamGrads grads_, adam_m_, adam_v_;
  std::uint64_t t_ = 0;
};

// Trains a model from scratch: seeded shuffle into train/validation parts,
// per-epoch reshuffle, minibatch Adam, dropout per the arch rate. Bit-exact
// under identical (data, arch, cfg).
inline Model train(const std::vector<LabeledFrame>& data, const ArchSpec& arch,
                   const TrainConfig& cfg) {
  validate(arch);
  validate(cfg);
  const std::size_t n = data.size();
  if (n < cfg.batch_size)
    throw std::invalid_argument("train: need at least batch_size frames");
  bool has_signal = false, has_noise = false;
  for (const LabeledFrame& lf : data) {
    if (lf.label == ClassLabel::Signal) has_signal = true;
    else has_noise = true;
  }
  if (!has_signal || !has_noise)
    throw std::invalid_argument("train: data must contain both classes");

  std::vector<RealFrame> inputs;
  inputs.reserve(n);
  std::vector<ClassLabel> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    inputs.push_back(to_real(data[i].frame));
    labels[i] = data[i].label;
  }

  Rng shuffle_rng = derive_rng(cfg.seed, {Trainer::kShuffleStream});
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i)
    std::swap(perm[i - 1], perm[shuffle_rng.next_below(i)]);

  std::size_t n_val = static_cast<std::size_t>(
      std::lround(cfg.validation_fraction * static_cast<double>(n)));
  n_val = std::max<std::size_t>(1, std::min(n_val, n - 1));
  const std::size_t n_train = n - n_val;

  Rng init_rng = derive_rng(cfg.seed, {Trainer::kInitStream});
  Trainer trainer(init_model(arch, init_rng), cfg);

  std::vector<const RealFrame*> batch_x;
  std::vector<ClassLabel> batch_y;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n_train; i > 1; --i)
      std::swap(perm[i - 1], perm[shuffle_rng.next_below(i)]);
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, n_train - start);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t s = 0; s < bs; ++s) {
        batch_x.push_back(&inputs[perm[start + s]]);
        batch_y.push_back(labels[perm[start + s]]);
      }
      trainer.step(batch_x, batch_y);
    }
  }

  Model m = std::move(trainer.model());
  std::size_t train_hits = 0, val_hits = 0;
  for (std::size_t i = 0; i < n_train; ++i)
    if (classify(m, inputs[perm[i]]) == labels[perm[i]]) ++train_hits;
  for (std::size_t i = n_train; i < n; ++i)
    if (classify(m, inputs[perm[i]]) == labels[perm[i]]) ++val_hits;
  m.meta.train_accuracy = static_cast<double>(train_hits) / static_cast<double>(n_train);
  m.meta.val_accuracy = static_cast<double>(val_hits) / static_cast<double>(n_val);
  m.meta.epochs_run = cfg.epochs;
  return m;
}

// --- model file format -----------------------------------------------------
//
// "OTNN" binary layout, version 1, little-endian:
//   char[4]  magic "OTNN"
//   u32      version (1)
//   u32      input_len, conv_filters, conv_kernel_w, n_hidden
//   u32[n_hidden] hidden widths
//   f64      dropout_rate
//   f64      train_accuracy, val_accuracy
//   u32      epochs_run
//   f64[conv_filters*conv_kernel_w] conv weights, f64[conv_filters] conv biases
//   per dense layer (hidden..., output): f64[out*in] weights, f64[out] biases
//
// Parameters are raw IEEE-754 doubles, so save/load round-trips bit-exactly.

namespace detail {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

inline void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void read_doubles(std::istream& is, std::vector<double>& v, std::size_t n) {
  v.resize(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace detail

inline void save_model(const Model& m, std::ostream& os) {
  os.write("OTNN", 4);
  detail::write_pod(os, std::uint32_t{1});
  detail::write_pod(os, static_cast<std::uint32_t>(m.arch.input_len));
  detail::write_pod(os, static_cast<std::uint32_t>(m.arch.conv_filters));
  detail::write_pod(os, static_cast<std::uint32_t>(m.arch.conv_kernel_w));
  detail::write_pod(os, static_cast<std::uint32_t>(m.arch.hidden_layers.size()));
  for (std::size_t w : m.arch.hidden_layers)
    detail::write_pod(os, static_cast<std::uint32_t>(w));
  detail::write_pod(os, m.arch.dropout_rate);
  detail::write_pod(os, m.meta.train_accuracy);
  detail::write_pod(os, m.meta.val_accuracy);
  detail::write_pod(os, static_cast<std::uint32_t>(m.meta.epochs_run));
  detail::write_doubles(os, m.conv_w);
  detail::write_doubles(os, m.conv_b);
  for (const DenseLayer& d : m.dense) {
    detail::write_doubles(os, d.w);
    detail::write_doubles(os, d.b);
  }
}

inline void save_model(const Model& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_model: cannot open " + path);
  save_model(m, os);
  if (!os) throw std::runtime_error("save_model: write failed for " + path);
}

inline Model load_model(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "OTNN", 4) != 0)
    throw std::runtime_error("load_model: bad magic");
  std::uint32_t version = 0;
  detail::read_pod(is, version);
  if (version != 1) throw std::runtime_error("load_model: unsupported version");
  std::uint32_t input_len = 0, filters = 0, kw = 0, n_hidden = 0;
  detail::read_pod(is, input_len);
  detail::read_pod(is, filters);
  detail::read_pod(is, kw);
  detail::read_pod(is, n_hidden);
  Model m;
  m.arch.input_len = input_len;
  m.arch.conv_filters = filters;
  m.arch.conv_kernel_w = kw;
  m.arch.hidden_layers.clear();
  for (std::uint32_t l = 0; l < n_hidden; ++l) {
    std::uint32_t w = 0;
    detail::read_pod(is, w);
    m.arch.hidden_layers.push_back(w);
  }
  detail::read_pod(is, m.arch.dropout_rate);
  detail::read_pod(is, m.meta.train_accuracy);
  detail::read_pod(is, m.meta.val_accuracy);
  std::uint32_t epochs = 0;
  detail::read_pod(is, epochs);
  m.meta.epochs_run = epochs;
  validate(m.arch);
  detail::read_doubles(is, m.conv_w, m.arch.conv_filters * m.arch.conv_kernel_w);
  detail::read_doubles(is, m.conv_b, m.arch.conv_filters);
  std::size_t in = flat_size(m.arch);
  std::vector<std::size_t> widths = m.arch.hidden_layers;
  widths.push_back(2);
  for (std::size_t out : widths) {
    DenseLayer d;
    d.in = in;
    d.out = out;
    detail::read_doubles(is, d.w, out * in);
    detail::read_doubles(is, d.b, out);
    m.dense.push_back(std::move(d));
    in = out;
  }
  if (!is) throw std::runtime_error("load_model: truncated file");
  for (double w : m.conv_w)
    if (!std::isfinite(w)) throw std::runtime_error("load_model: non-finite parameter");
  for (double b : m.conv_b)
    if (!std::isfinite(b)) throw std::runtime_error("load_model: non-finite parameter");
  for (const DenseLayer& d : m.dense) {
    for (double w : d.w)
      if (!std::isfinite(w)) throw std::runtime_error("load_model: non-finite parameter");
    for (double b : d.b)
      if (!std::isfinite(b)) throw std::runtime_error("load_model: non-finite parameter");
  }
  return m;
}

inline Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_model: cannot open " + path);
  return load_model(is);
}

}  // namespace otasim
