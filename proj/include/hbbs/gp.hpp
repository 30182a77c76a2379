#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hbbs/core.hpp"
#include "hbbs/surrogate.hpp"

namespace hbbs {

struct GPConfig {
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 1e-4;
  bool center_targets = true;  // prior mean = training-label mean

  void validate() const {
    if (!(length_scale > 0.0)) throw Error(Errc::ConfigInvalid, "length_scale must be > 0");
    if (!(signal_variance > 0.0)) throw Error(Errc::ConfigInvalid, "signal_variance must be > 0");
    if (!(noise_variance >= 0.0)) throw Error(Errc::ConfigInvalid, "noise_variance must be >= 0");
  }
};

struct GPPrediction {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Exact GP regression with an RBF kernel. The mean conditions on labeled
/// inputs; the variance may condition on a superset (refit_sigma), since it
/// does not depend on labels.
class GPModel {
 public:
  GPModel() = default;

  const GPConfig& config() const noexcept { return cfg_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(x_mean_.cols()); }
  std::size_t labeled_count() const noexcept { return static_cast<std::size_t>(x_mean_.rows()); }
  std::size_t variance_count() const noexcept { return static_cast<std::size_t>(x_var_.rows()); }
  double prior_mean() const noexcept { return offset_; }
  /// Diagonal jitter that was needed for the variance factorization.
  double jitter() const noexcept { return jitter_var_; }

  double kernel(const double* a, const double* b) const {
    double d2 = 0.0;
    for (Eigen::Index k = 0; k < x_mean_.cols(); ++k) {
      const double t = a[k] - b[k];
      d2 += t * t;
    }
    return cfg_.signal_variance * std::exp(-0.5 * d2 * inv_ls2_);
  }

  /// Posterior (μ, σ) for each query row. Each query is computed
  /// independently, so batch results equal pointwise results exactly.
  std::vector<GPPrediction> predict(const RowMatrix& queries) const {
    if (queries.cols() != x_mean_.cols())
      throw Error(Errc::ShapeMismatch, "query dimension " + std::to_string(queries.cols()) + " but model has " +
                                           std::to_string(x_mean_.cols()));
    const auto q = static_cast<std::size_t>(queries.rows());
    std::vector<GPPrediction> out(q);
    for (std::size_t j = 0; j < q; ++j) {
      const double* xq = queries.row(static_cast<Eigen::Index>(j)).data();
      double mu = offset_;
      for (Eigen::Index i = 0; i < x_mean_.rows(); ++i) mu += kernel(x_mean_.row(i).data(), xq) * alpha_[i];
      out[j].mu = mu;
    }
    auto var = posterior_variance(queries);
    for (std::size_t j = 0; j < q; ++j) out[j].sigma = std::sqrt(std::max(0.0, var[j]));
    return out;
  }

  GPPrediction predict(std::span<const double> x) const {
    RowMatrix q(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t k = 0; k < x.size(); ++k) q(0, static_cast<Eigen::Index>(k)) = x[k];
    return predict(q).front();
  }

  /// σ only; skips the mean computation.
  std::vector<double> predict_sigma(const RowMatrix& queries) const {
    if (queries.cols() != x_mean_.cols()) throw Error(Errc::ShapeMismatch, "query dimension mismatch");
    auto var = posterior_variance(queries);
    for (double& v : var) v = std::sqrt(std::max(0.0, v));
    return var;
  }

  friend GPModel fit_gp(const RowMatrix&, std::span<const double>, const GPConfig&);
  friend GPModel refit_sigma(const GPModel&, const RowMatrix&);

 private:
  using LowerMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Eigen::MatrixXd gram(const RowMatrix& x) const {
    const auto n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      k(i, i) = cfg_.signal_variance;
      for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i) = kernel(x.row(i).data(), x.row(j).data());
    }
    return k;
  }

  /// Cholesky of K + (noise + jitter) I. Jitter starts at zero and escalates
  /// from 1e-10·s² through three doublings before giving up.
  LowerMatrix factorize(const RowMatrix& x, double& jitter_used) const {
    const Eigen::MatrixXd k = gram(x);
    const double base = 1e-10 * cfg_.signal_variance;
    const double ladder[] = {0.0, base, 2 * base, 4 * base, 8 * base};
    for (double jit : ladder) {
      Eigen::MatrixXd a = k;
      a.diagonal().array() += cfg_.noise_variance + jit;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success) continue;
      LowerMatrix l = llt.matrixL();
      const double floor = 1e-13 * cfg_.signal_variance;
      if ((l.diagonal().array().square() > floor).all()) {
        jitter_used = jit;
        return l;
      }
    }
    throw Error(Errc::SingularKernel, "kernel matrix not positive definite after jitter escalation");
  }

  /// Latent-function variance k(x,x) - |L⁻¹ k_x|² by forward substitution,
  /// processed in column blocks with identical per-query arithmetic.
  std::vector<double> posterior_variance(const RowMatrix& queries) const {
    const auto n = static_cast<std::size_t>(x_var_.rows());
    const auto q = static_cast<std::size_t>(queries.rows());
    std::vector<double> out(q, cfg_.signal_variance);
    constexpr std::size_t kBlock = 32;
    std::vector<double> v(n * kBlock);
    std::vector<double> acc(kBlock);
    for (std::size_t j0 = 0; j0 < q; j0 += kBlock) {
      const std::size_t bw = std::min(kBlock, q - j0);
      for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x_var_.row(static_cast<Eigen::Index>(i)).data();
        for (std::size_t j = 0; j < bw; ++j)
          acc[j] = kernel(xi, queries.row(static_cast<Eigen::Index>(j0 + j)).data());
        const double* li = l_var_.row(static_cast<Eigen::Index>(i)).data();
        for (std::size_t t = 0; t < i; ++t) {
          const double lt = li[t];
          const double* vt = v.data() + t * kBlock;
          for (std::size_t j = 0; j < bw; ++j) acc[j] -= lt * vt[j];
        }
        double* vi = v.data() + i * kBlock;
        for (std::size_t j = 0; j < bw; ++j) vi[j] = acc[j] / li[i];
      }
      for (std::size_t j = 0; j < bw; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i * kBlock + j] * v[i * kBlock + j];
        out[j0 + j] = cfg_.signal_variance - s;
      }
    }
    return out;
  }

  GPConfig cfg_;
  double inv_ls2_ = 1.0;
  double offset_ = 0.0;
  RowMatrix x_mean_;
  Eigen::VectorXd alpha_;
  RowMatrix x_var_;
  LowerMatrix l_var_;
  double jitter_var_ = 0.0;
};

/// O(n³) fit: Cholesky of the Gram matrix, cached for prediction.
inline GPModel fit_gp(const RowMatrix& x, std::span<const double> y, const GPConfig& cfg) {
  cfg.validate();
  if (x.rows() == 0) throw Error(Errc::EmptyLog, "GP needs at least one training point");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(Errc::SizeMismatch, "GP inputs and targets differ in length");
  GPModel m;
  m.cfg_ = cfg;
  m.inv_ls2_ = 1.0 / (cfg.length_scale * cfg.length_scale);
  if (cfg.center_targets) {
    double s = 0.0;
    for (double v : y) s += v;
    m.offset_ = s / static_cast<double>(y.size());
  }
  m.x_mean_ = x;
  m.x_var_ = x;
  m.l_var_ = m.factorize(x, m.jitter_var_);
  Eigen::VectorXd r(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) r[i] = y[static_cast<std::size_t>(i)] - m.offset_;
  const Eigen::VectorXd tmp = m.l_var_.triangularView<Eigen::Lower>().solve(r);
  m.alpha_ = m.l_var_.transpose().triangularView<Eigen::Upper>().solve(tmp);
  return m;
}

/// Conditions σ on the existing variance inputs plus `new_inputs`; μ is unchanged.
inline GPModel refit_sigma(const GPModel& model, const RowMatrix& new_inputs) {
  if (new_inputs.rows() == 0) return model;
  if (new_inputs.cols() != model.x_var_.cols()) throw Error(Errc::ShapeMismatch, "new input dimension mismatch");
  GPModel m = model;
  RowMatrix stacked(model.x_var_.rows() + new_inputs.rows(), model.x_var_.cols());
  stacked << model.x_var_, new_inputs;
  m.x_var_ = std::move(stacked);
  m.l_var_ = m.factorize(m.x_var_, m.jitter_var_);
  return m;
}

inline GPPrediction gp_predict(const GPModel& model, std::span<const double> x) { return model.predict(x); }

}  // namespace hbbs
