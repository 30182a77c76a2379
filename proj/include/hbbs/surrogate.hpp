#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "hbbs/core.hpp"
#include "hbbs/rng.hpp"

namespace hbbs {

/// Row-major matrix; one row per pool member. Used for embeddings.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvLayerSpec {
  std::size_t filters = 32;
  std::size_t width = 5;
};

enum class OptimizerKind { Adam, Sgd };

struct SurrogateConfig {
  double learning_rate = 5e-4;
  std::size_t minibatch = 100;
  std::size_t embedding_dim = 5;  // H
  std::vector<ConvLayerSpec> conv_layers{{32, 5}, {32, 5}};
  std::size_t dense_hidden = 64;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  // When false the autoencoder sees h as fixed data; its loss does not train the conv stack.
  bool autoencoder_shapes_features = false;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error(Errc::ConfigInvalid, "learning_rate must be > 0");
    if (embedding_dim < 1) throw Error(Errc::ConfigInvalid, "embedding_dim must be >= 1");
    if (minibatch < 1) throw Error(Errc::ConfigInvalid, "minibatch must be >= 1");
    if (epochs < 1) throw Error(Errc::ConfigInvalid, "epochs must be >= 1");
    if (dense_hidden < 1) throw Error(Errc::ConfigInvalid, "dense_hidden must be >= 1");
    for (const auto& c : conv_layers)
      if (c.filters < 1 || c.width < 1) throw Error(Errc::ConfigInvalid, "conv layer needs filters and width >= 1");
  }
};

/// Channel-major one-hot matrix: data[channel * length + position].
struct OneHotMatrix {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> data;

  double at(std::size_t channel, std::size_t pos) const { return data[channel * length + pos]; }
};

/// One channel per alphabet symbol, plus a constant strand channel (1 for '+')
/// when `strand_channel` is set.
inline OneHotMatrix one_hot_encode(const Sequence& seq, const Alphabet& alphabet, bool strand_channel = false) {
  OneHotMatrix m;
  m.channels = alphabet.size() + (strand_channel ? 1 : 0);
  m.length = seq.length();
  m.data.assign(m.channels * m.length, 0.0);
  for (std::size_t p = 0; p < m.length; ++p) {
    int ch = alphabet.index_of(seq.residues[p]);
    if (ch < 0)
      throw Error(Errc::AlphabetMismatch,
                  "symbol '" + std::string(1, seq.residues[p]) + "' at position " + std::to_string(p));
    m.data[static_cast<std::size_t>(ch) * m.length + p] = 1.0;
  }
  if (strand_channel && seq.strand == Strand::Plus)
    std::fill_n(m.data.begin() + static_cast<std::ptrdiff_t>(alphabet.size() * m.length), m.length, 1.0);
  return m;
}

/// Argmax over alphabet channels per column.
inline Sequence decode_one_hot(const OneHotMatrix& m, const Alphabet& alphabet, bool strand_channel = false) {
  Sequence s;
  s.residues.resize(m.length);
  for (std::size_t p = 0; p < m.length; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < alphabet.size(); ++c)
      if (m.at(c, p) > m.at(best, p)) best = c;
    s.residues[p] = alphabet.symbols()[best];
  }
  if (strand_channel && m.length > 0)
    s.strand = m.at(alphabet.size(), 0) > 0.5 ? Strand::Plus : Strand::Minus;
  return s;
}

/// Conv stack -> dense feature h -> {sigmoid prediction head, linear autoencoder on h}.
/// Parameters live in one flat vector so optimizers and gradient checks can
/// treat them uniformly.
class SurrogateNetwork {
 public:
  struct Workspace {
    std::vector<std::vector<double>> acts;  // post-ReLU output of each conv layer
    std::vector<double> hidden;             // h
    std::vector<double> code;               // z (the embedding)
    std::vector<double> recon;              // decoder output
    double prediction = 0.0;
    // backward scratch
    std::vector<std::vector<double>> grad_acts;
    std::vector<double> grad_hidden, grad_code, grad_recon;
  };

  SurrogateNetwork() = default;

  SurrogateNetwork(std::size_t in_channels, std::size_t length, const SurrogateConfig& cfg)
      : in_channels_(in_channels), length_(length), hidden_(cfg.dense_hidden), code_dim_(cfg.embedding_dim),
        joint_(cfg.autoencoder_shapes_features) {
    std::size_t off = 0;
    std::size_t ch = in_channels;
    for (const auto& spec : cfg.conv_layers) {
      ConvLayer l;
      l.in = ch;
      l.out = spec.filters;
      l.width = spec.width;
      l.pad = (spec.width - 1) / 2;
      l.w = off;
      off += l.out * l.in * l.width;
      l.b = off;
      off += l.out;
      convs_.push_back(l);
      ch = spec.filters;
    }
    flat_ = ch * length;
    dense_w_ = off;
    off += hidden_ * flat_;
    dense_b_ = off;
    off += hidden_;
    pred_w_ = off;
    off += hidden_;
    pred_b_ = off;
    off += 1;
    enc_w_ = off;
    off += code_dim_ * hidden_;
    enc_b_ = off;
    off += code_dim_;
    dec_w_ = off;
    off += hidden_ * code_dim_;
    dec_b_ = off;
    off += hidden_;
    count_ = off;
  }

  std::size_t parameter_count() const noexcept { return count_; }
  std::size_t in_channels() const noexcept { return in_channels_; }
  std::size_t length() const noexcept { return length_; }
  std::size_t embedding_dim() const noexcept { return code_dim_; }
  /// Parameters from here on belong to the encoder and decoder.
  std::size_t autoencoder_offset() const noexcept { return enc_w_; }
  bool joint() const noexcept { return joint_; }

  /// Uniform(-r, r) with r = sqrt(3 / fan_in); biases start at zero.
  std::vector<double> initial_parameters(std::uint64_t seed) const {
    std::vector<double> p(count_, 0.0);
    Rng rng(seed);
    auto fill = [&](std::size_t off, std::size_t n, std::size_t fan_in) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      const double r = std::sqrt(3.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
      for (std::size_t i = 0; i < n; ++i) p[off + i] = r * u(rng);
    };
    for (const auto& l : convs_) fill(l.w, l.out * l.in * l.width, l.in * l.width);
    fill(dense_w_, hidden_ * flat_, flat_);
    fill(pred_w_, hidden_, hidden_);
    fill(enc_w_, code_dim_ * hidden_, hidden_);
    fill(dec_w_, hidden_ * code_dim_, code_dim_);
    return p;
  }

  Workspace make_workspace() const {
    Workspace ws;
    for (const auto& l : convs_) {
      ws.acts.emplace_back(l.out * length_, 0.0);
      ws.grad_acts.emplace_back(l.out * length_, 0.0);
    }
    ws.hidden.assign(hidden_, 0.0);
    ws.code.assign(code_dim_, 0.0);
    ws.recon.assign(hidden_, 0.0);
    ws.grad_hidden.assign(hidden_, 0.0);
    ws.grad_code.assign(code_dim_, 0.0);
    ws.grad_recon.assign(hidden_, 0.0);
    return ws;
  }

  void forward(std::span<const double> p, std::span<const double> input, Workspace& ws) const {
    const double* in = input.data();
    for (std::size_t li = 0; li < convs_.size(); ++li) {
      conv_forward(convs_[li], p, in, ws.acts[li].data());
      in = ws.acts[li].data();
    }
    // dense + ReLU
    for (std::size_t j = 0; j < hidden_; ++j) {
      const double* w = p.data() + dense_w_ + j * flat_;
      double s = p[dense_b_ + j];
      for (std::size_t i = 0; i < flat_; ++i) s += w[i] * in[i];
      ws.hidden[j] = s > 0.0 ? s : 0.0;
    }
    double logit = p[pred_b_];
    for (std::size_t j = 0; j < hidden_; ++j) logit += p[pred_w_ + j] * ws.hidden[j];
    ws.prediction = 1.0 / (1.0 + std::exp(-logit));
    for (std::size_t k = 0; k < code_dim_; ++k) {
      const double* w = p.data() + enc_w_ + k * hidden_;
      double s = p[enc_b_ + k];
      for (std::size_t j = 0; j < hidden_; ++j) s += w[j] * ws.hidden[j];
      ws.code[k] = s;
    }
    for (std::size_t j = 0; j < hidden_; ++j) {
      const double* w = p.data() + dec_w_ + j * code_dim_;
      double s = p[dec_b_ + j];
      for (std::size_t k = 0; k < code_dim_; ++k) s += w[k] * ws.code[k];
      ws.recon[j] = s;
    }
  }

  /// Prediction loss plus mean-squared reconstruction loss for one sample.
  double sample_loss(const Workspace& ws, double target) const {
    const double e = ws.prediction - target;
    double r = 0.0;
    for (std::size_t j = 0; j < hidden_; ++j) {
      const double d = ws.recon[j] - ws.hidden[j];
      r += d * d;
    }
    return e * e + r / static_cast<double>(hidden_);
  }

  /// Accumulates scale * d(sample_loss)/d(params) into grad. Requires a
  /// preceding forward() on the same workspace.
  void backward(std::span<const double> p, std::span<const double> input, Workspace& ws, double target,
                double scale, std::span<double> grad) const {
    const double inv_h = 1.0 / static_cast<double>(hidden_);
    const double y = ws.prediction;
    const double g_logit = 2.0 * (y - target) * scale * y * (1.0 - y);
    std::fill(ws.grad_hidden.begin(), ws.grad_hidden.end(), 0.0);

    grad[pred_b_] += g_logit;
    for (std::size_t j = 0; j < hidden_; ++j) {
      grad[pred_w_ + j] += g_logit * ws.hidden[j];
      ws.grad_hidden[j] += g_logit * p[pred_w_ + j];
    }

    // decoder; in joint mode the reconstruction target h also receives gradient
    std::fill(ws.grad_code.begin(), ws.grad_code.end(), 0.0);
    for (std::size_t j = 0; j < hidden_; ++j) {
      const double g = 2.0 * (ws.recon[j] - ws.hidden[j]) * inv_h * scale;
      if (joint_) ws.grad_hidden[j] -= g;
      grad[dec_b_ + j] += g;
      const double* w = p.data() + dec_w_ + j * code_dim_;
      double* gw = grad.data() + dec_w_ + j * code_dim_;
      for (std::size_t k = 0; k < code_dim_; ++k) {
        gw[k] += g * ws.code[k];
        ws.grad_code[k] += g * w[k];
      }
    }
    // encoder
    for (std::size_t k = 0; k < code_dim_; ++k) {
      const double g = ws.grad_code[k];
      grad[enc_b_ + k] += g;
      const double* w = p.data() + enc_w_ + k * hidden_;
      double* gw = grad.data() + enc_w_ + k * hidden_;
      for (std::size_t j = 0; j < hidden_; ++j) {
        gw[j] += g * ws.hidden[j];
        if (joint_) ws.grad_hidden[j] += g * w[j];
      }
    }

    // dense layer (ReLU mask from the stored activation)
    const double* flat_in = convs_.empty() ? input.data() : ws.acts.back().data();
    double* flat_grad = convs_.empty() ? nullptr : ws.grad_acts.back().data();
    if (flat_grad) std::fill_n(flat_grad, flat_, 0.0);
    for (std::size_t j = 0; j < hidden_; ++j) {
      if (ws.hidden[j] <= 0.0) continue;
      const double g = ws.grad_hidden[j];
      grad[dense_b_ + j] += g;
      double* gw = grad.data() + dense_w_ + j * flat_;
      for (std::size_t i = 0; i < flat_; ++i) gw[i] += g * flat_in[i];
      if (flat_grad) {
        const double* w = p.data() + dense_w_ + j * flat_;
        for (std::size_t i = 0; i < flat_; ++i) flat_grad[i] += g * w[i];
      }
    }

    for (std::size_t li = convs_.size(); li-- > 0;) {
      double* gout = ws.grad_acts[li].data();
      const double* out = ws.acts[li].data();
      const std::size_t n = convs_[li].out * length_;
      for (std::size_t i = 0; i < n; ++i)
        if (out[i] <= 0.0) gout[i] = 0.0;
      const double* in = li == 0 ? input.data() : ws.acts[li - 1].data();
      double* gin = li == 0 ? nullptr : ws.grad_acts[li - 1].data();
      if (gin) std::fill_n(gin, convs_[li].in * length_, 0.0);
      conv_backward(convs_[li], p, in, gout, gin, grad);
    }
  }

  /// Mean combined loss over a batch and its gradient (overwrites grad).
  double loss_and_gradient(std::span<const double> p, const std::vector<const OneHotMatrix*>& inputs,
                           std::span<const double> targets, std::span<double> grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    auto ws = make_workspace();
    const double scale = 1.0 / static_cast<double>(inputs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      forward(p, inputs[i]->data, ws);
      total += sample_loss(ws, targets[i]);
      backward(p, inputs[i]->data, ws, targets[i], scale, grad);
    }
    return total * scale;
  }

  double loss(std::span<const double> p, const std::vector<const OneHotMatrix*>& inputs,
              std::span<const double> targets) const {
    auto ws = make_workspace();
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      forward(p, inputs[i]->data, ws);
      total += sample_loss(ws, targets[i]);
    }
    return total / static_cast<double>(inputs.size());
  }

  /// Mean squared prediction error alone.
  double prediction_loss(std::span<const double> p, const std::vector<const OneHotMatrix*>& inputs,
                         std::span<const double> targets) const {
    auto ws = make_workspace();
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      forward(p, inputs[i]->data, ws);
      total += (ws.prediction - targets[i]) * (ws.prediction - targets[i]);
    }
    return total / static_cast<double>(inputs.size());
  }

 private:
  struct ConvLayer {
    std::size_t in = 0, out = 0, width = 0, pad = 0;
    std::size_t w = 0, b = 0;  // offsets; weights laid out [out][in][width]
  };

  void conv_forward(const ConvLayer& l, std::span<const double> p, const double* in, double* out) const {
    const std::size_t L = length_;
    for (std::size_t f = 0; f < l.out; ++f) {
      double* o = out + f * L;
      std::fill_n(o, L, p[l.b + f]);
      for (std::size_t c = 0; c < l.in; ++c) {
        const double* x = in + c * L;
        const double* w = p.data() + l.w + (f * l.in + c) * l.width;
        for (std::size_t k = 0; k < l.width; ++k) {
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(l.pad);
          const std::size_t lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
          const std::size_t hi = shift > 0 ? L - std::min<std::size_t>(L, static_cast<std::size_t>(shift)) : L;
          const double wk = w[k];
          for (std::size_t q = lo; q < hi; ++q) o[q] += wk * x[static_cast<std::ptrdiff_t>(q) + shift];
        }
      }
      for (std::size_t q = 0; q < L; ++q) o[q] = o[q] > 0.0 ? o[q] : 0.0;
    }
  }

  void conv_backward(const ConvLayer& l, std::span<const double> p, const double* in, const double* gout,
                     double* gin, std::span<double> grad) const {
    const std::size_t L = length_;
    for (std::size_t f = 0; f < l.out; ++f) {
      const double* g = gout + f * L;
      double bsum = 0.0;
      for (std::size_t q = 0; q < L; ++q) bsum += g[q];
      grad[l.b + f] += bsum;
      for (std::size_t c = 0; c < l.in; ++c) {
        const double* x = in + c * L;
        double* gx = gin ? gin + c * L : nullptr;
        const std::size_t base = l.w + (f * l.in + c) * l.width;
        for (std::size_t k = 0; k < l.width; ++k) {
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(l.pad);
          const std::size_t lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
          const std::size_t hi = shift > 0 ? L - std::min<std::size_t>(L, static_cast<std::size_t>(shift)) : L;
          double s = 0.0;
          for (std::size_t q = lo; q < hi; ++q) s += g[q] * x[static_cast<std::ptrdiff_t>(q) + shift];
          grad[base + k] += s;
          if (gx) {
            const double wk = p[base + k];
            for (std::size_t q = lo; q < hi; ++q) gx[static_cast<std::ptrdiff_t>(q) + shift] += wk * g[q];
          }
        }
      }
    }
  }

  std::size_t in_channels_ = 0, length_ = 0, hidden_ = 0, code_dim_ = 0;
  bool joint_ = false;
  std::vector<ConvLayer> convs_;
  std::size_t flat_ = 0;
  std::size_t dense_w_ = 0, dense_b_ = 0, pred_w_ = 0, pred_b_ = 0;
  std::size_t enc_w_ = 0, enc_b_ = 0, dec_w_ = 0, dec_b_ = 0;
  std::size_t count_ = 0;
};

struct PoolEvaluation {
  std::vector<double> predictions;
  RowMatrix embeddings;
};

/// Trained predictor f̂ and embedding ê. Immutable once fitted.
class SurrogateModel {
 public:
  SurrogateModel() = default;
  SurrogateModel(SurrogateConfig cfg, Alphabet alphabet, std::size_t length, bool strand,
                 std::vector<double> params, std::vector<double> loss_trace)
      : cfg_(std::move(cfg)),
        alphabet_(std::move(alphabet)),
        length_(length),
        strand_(strand),
        net_(alphabet_.size() + (strand ? 1 : 0), length, cfg_),
        params_(std::move(params)),
        loss_trace_(std::move(loss_trace)) {
    if (params_.size() != net_.parameter_count())
      throw Error(Errc::ShapeMismatch, "parameter vector does not match architecture");
  }

  const SurrogateConfig& config() const noexcept { return cfg_; }
  const Alphabet& alphabet() const noexcept { return alphabet_; }
  std::size_t length() const noexcept { return length_; }
  bool strand() const noexcept { return strand_; }
  const SurrogateNetwork& network() const noexcept { return net_; }
  const std::vector<double>& parameters() const noexcept { return params_; }
  /// Epoch-mean combined training loss, one entry per epoch.
  const std::vector<double>& loss_trace() const noexcept { return loss_trace_; }

  double predict(const Sequence& seq) const {
    auto ws = net_.make_workspace();
    run(seq, ws);
    return ws.prediction;
  }

  std::vector<double> embed(const Sequence& seq) const {
    auto ws = net_.make_workspace();
    run(seq, ws);
    return ws.code;
  }

  /// Predictions and embeddings for every pool member in one pass.
  PoolEvaluation evaluate(const Pool& pool) const {
    check_pool(pool);
    PoolEvaluation out;
    out.predictions.resize(pool.size());
    out.embeddings.resize(static_cast<Eigen::Index>(pool.size()), static_cast<Eigen::Index>(net_.embedding_dim()));
    auto ws = net_.make_workspace();
    for (SeqIndex i = 0; i < pool.size(); ++i) {
      auto x = one_hot_encode(pool[i], alphabet_, strand_);
      net_.forward(params_, x.data, ws);
      out.predictions[i] = ws.prediction;
      for (std::size_t k = 0; k < ws.code.size(); ++k)
        out.embeddings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = ws.code[k];
    }
    return out;
  }

 private:
  void check_pool(const Pool& pool) const {
    if (pool.length() != length_ || !(pool.alphabet() == alphabet_) || pool.has_strand() != strand_)
      throw Error(Errc::ShapeMismatch, "pool does not match the model's alphabet/length");
  }

  void run(const Sequence& seq, SurrogateNetwork::Workspace& ws) const {
    if (seq.length() != length_ || seq.strand.has_value() != strand_)
      throw Error(Errc::ShapeMismatch, "sequence length " + std::to_string(seq.length()) + " but model expects " +
                                           std::to_string(length_));
    OneHotMatrix x;
    try {
      x = one_hot_encode(seq, alphabet_, strand_);
    } catch (const Error&) {
      throw Error(Errc::ShapeMismatch, "sequence contains symbols outside the model alphabet");
    }
    net_.forward(params_, x.data, ws);
  }

  SurrogateConfig cfg_;
  Alphabet alphabet_;
  std::size_t length_ = 0;
  bool strand_ = false;
  SurrogateNetwork net_;
  std::vector<double> params_;
  std::vector<double> loss_trace_;
};

/// Trains from a fresh initialization seeded by cfg.seed on the logged
/// (sequence, label) pairs.
inline SurrogateModel fit_surrogate(const Pool& pool, const ObservationLog& log, const SurrogateConfig& cfg) {
  cfg.validate();
  if (log.empty()) throw Error(Errc::EmptyLog, "cannot fit a surrogate without observations");
  const bool strand = pool.has_strand();
  SurrogateNetwork net(pool.alphabet().size() + (strand ? 1 : 0), pool.length(), cfg);

  std::vector<OneHotMatrix> inputs;
  inputs.reserve(log.size());
  for (SeqIndex i : log.indices()) inputs.push_back(one_hot_encode(pool[i], pool.alphabet(), strand));
  const auto& targets = log.labels();

  std::vector<double> params = net.initial_parameters(derive_seed(cfg.seed, 1));
  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> m1, m2;
  if (cfg.optimizer == OptimizerKind::Adam) {
    m1.assign(params.size(), 0.0);
    m2.assign(params.size(), 0.0);
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double b1t = 1.0, b2t = 1.0;

  Rng shuffle_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> trace;
  trace.reserve(cfg.epochs);
  auto ws = net.make_workspace();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      const std::size_t end = std::min(order.size(), start + cfg.minibatch);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t s = start; s < end; ++s) {
        const auto& x = inputs[order[s]].data;
        net.forward(params, x, ws);
        epoch_loss += net.sample_loss(ws, targets[order[s]]);
        net.backward(params, x, ws, targets[order[s]], scale, grad);
      }
      if (cfg.optimizer == OptimizerKind::Adam) {
        b1t *= kBeta1;
        b2t *= kBeta2;
        const double lr = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
        for (std::size_t i = 0; i < params.size(); ++i) {
          m1[i] = kBeta1 * m1[i] + (1.0 - kBeta1) * grad[i];
          m2[i] = kBeta2 * m2[i] + (1.0 - kBeta2) * grad[i] * grad[i];
          params[i] -= lr * m1[i] / (std::sqrt(m2[i]) + kEps);
        }
      } else {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
      }
    }
    trace.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return SurrogateModel(cfg, pool.alphabet(), pool.length(), strand, std::move(params), std::move(trace));
}

inline double predict(const SurrogateModel& model, const Sequence& seq) { return model.predict(seq); }
inline std::vector<double> embed(const SurrogateModel& model, const Sequence& seq) { return model.embed(seq); }

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json surrogate_config_to_json(const SurrogateConfig& c) {
  nlohmann::json convs = nlohmann::json::array();
  for (const auto& l : c.conv_layers) convs.push_back({l.filters, l.width});
  return {{"learning_rate", c.learning_rate},
          {"minibatch", c.minibatch},
          {"embedding_dim", c.embedding_dim},
          {"conv_layers", convs},
          {"dense_hidden", c.dense_hidden},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"optimizer", c.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
          {"autoencoder_shapes_features", c.autoencoder_shapes_features}};
}

inline SurrogateConfig surrogate_config_from_json(const nlohmann::json& j, SurrogateConfig c = {}) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.autoencoder_shapes_features = j.value("autoencoder_shapes_features", c.autoencoder_shapes_features);
  c.dense_hidden = j.value("dense_hidden", c.dense_hidden);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  if (j.contains("conv_layers")) {
    c.conv_layers.clear();
    for (const auto& l : j["conv_layers"]) {
      if (l.is_object())
        c.conv_layers.push_back({l.at("filters").get<std::size_t>(), l.at("width").get<std::size_t>()});
      else
        c.conv_layers.push_back({l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>()});
    }
  }
  if (j.contains("optimizer")) {
    auto o = j["optimizer"].get<std::string>();
    if (o == "adam") c.optimizer = OptimizerKind::Adam;
    else if (o == "sgd") c.optimizer = OptimizerKind::Sgd;
    else throw Error(Errc::ConfigInvalid, "optimizer must be 'adam' or 'sgd'");
  }
  c.validate();
  return c;
}

inline void save_checkpoint(const std::string& path, const SurrogateModel& model) {
  nlohmann::json j{{"format", "hbbs-surrogate"},
                   {"version", 1},
                   {"config", surrogate_config_to_json(model.config())},
                   {"alphabet", model.alphabet().symbols()},
                   {"length", model.length()},
                   {"strand", model.strand()},
                   {"parameters", model.parameters()},
                   {"loss_trace", model.loss_trace()}};
  std::ofstream out(path);
  if (!out) throw Error(Errc::ParseError, "cannot write '" + path + "'");
  out << j.dump() << '\n';
}

inline SurrogateModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open checkpoint '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    if (j.value("format", std::string()) != "hbbs-surrogate" || j.value("version", 0) != 1)
      throw Error(Errc::ParseError, "unsupported checkpoint format");
    return SurrogateModel(surrogate_config_from_json(j.at("config")), Alphabet(j.at("alphabet").get<std::string>()),
                          j.at("length").get<std::size_t>(), j.at("strand").get<bool>(),
                          j.at("parameters").get<std::vector<double>>(),
                          j.value("loss_trace", std::vector<double>{}));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace hbbs
