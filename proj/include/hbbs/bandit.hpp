#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "hbbs/core.hpp"
#include "hbbs/rng.hpp"

namespace hbbs {

struct NormalGammaPrior {
  double mu0 = 0.5;
  double n0 = 10.0;
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const {
    if (!(n0 > 0.0) || !(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(mu0))
      throw Error(Errc::ConfigInvalid, "normal-gamma prior needs n0, alpha, beta > 0");
  }
};

/// Conjugate posterior of one arm. Precision τ ~ Gamma(shape, rate) and the
/// arm value q | τ ~ Normal(normal_mean, 1 / sqrt((count + n0) τ)).
struct NormalGammaPosterior {
  double gamma_shape = 1.0;
  double gamma_rate = 1.0;
  double normal_mean = 0.5;
  std::size_t count = 0;  // m
  double n0 = 10.0;

  double precision_weight() const noexcept { return static_cast<double>(count) + n0; }

  double sample_precision(Rng& rng) const {
    std::gamma_distribution<double> gamma(gamma_shape, 1.0 / gamma_rate);
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double tau = gamma(rng);
      if (tau > 0.0 && std::isfinite(tau)) return tau;
    }
    throw Error(Errc::NonpositiveTau, "gamma draw kept returning a non-positive precision");
  }

  double sample_value(double tau, Rng& rng) const {
    std::normal_distribution<double> normal(normal_mean, 1.0 / std::sqrt(precision_weight() * tau));
    return normal(rng);
  }
};

inline NormalGammaPosterior posterior_params(const NormalGammaPrior& prior, std::span<const double> samples) {
  prior.validate();
  const double m = static_cast<double>(samples.size());
  double mean = prior.mu0;
  double ss = 0.0;
  if (!samples.empty()) {
    double sum = 0.0;
    for (double x : samples) sum += x;
    mean = sum / m;
    for (double x : samples) ss += (x - mean) * (x - mean);
  }
  NormalGammaPosterior p;
  p.count = samples.size();
  p.n0 = prior.n0;
  p.gamma_shape = prior.alpha + m / 2.0;
  p.gamma_rate = prior.beta + 0.5 * ss + m * prior.n0 * (mean - prior.mu0) * (mean - prior.mu0) / (2.0 * (m + prior.n0));
  p.normal_mean = (m * mean + prior.n0 * prior.mu0) / (m + prior.n0);
  return p;
}

/// One joint draw: τ then q | τ.
inline double sample_cluster_value(const NormalGammaPosterior& post, Rng& rng) {
  return post.sample_value(post.sample_precision(rng), rng);
}

/// Index of the largest sampled value, ties to the lowest index.
inline std::size_t thompson_select(std::span<const NormalGammaPosterior> posteriors, Rng& rng) {
  if (posteriors.empty()) throw Error(Errc::ConfigInvalid, "no arms to select from");
  std::size_t best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const double q = sample_cluster_value(posteriors[i], rng);
    if (q > best_q) {
      best_q = q;
      best = i;
    }
  }
  return best;
}

}  // namespace hbbs
