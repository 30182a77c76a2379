#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hbbs/bandit.hpp"
#include "hbbs/core.hpp"
#include "hbbs/environments.hpp"
#include "hbbs/gp.hpp"
#include "hbbs/kmeans.hpp"
#include "hbbs/rng.hpp"
#include "hbbs/surrogate.hpp"

namespace hbbs {

/// What an agent needs from the fitted surrogate: f̂ and ê over the whole pool.
struct PoolModel {
  std::vector<double> predictions;
  RowMatrix embeddings;
};

/// Produces a PoolModel from the observations. The default trains the
/// surrogate; tests substitute oracles here.
using ModelFitter = std::function<PoolModel(const Pool&, const ObservationLog&, const SurrogateConfig&)>;

inline PoolModel fit_pool_model(const Pool& pool, const ObservationLog& log, const SurrogateConfig& cfg) {
  auto model = fit_surrogate(pool, log, cfg);
  auto ev = model.evaluate(pool);
  return {std::move(ev.predictions), std::move(ev.embeddings)};
}

/// Test seam: predictions are the true labels. Embeddings default to the
/// one-hot of the ground-truth cluster when given, else the label itself.
inline ModelFitter make_oracle_fitter(const Environment& env, const ClusterGroundTruth* truth = nullptr) {
  PoolModel pm;
  pm.predictions = env.labels();
  if (truth) {
    pm.embeddings = RowMatrix::Zero(static_cast<Eigen::Index>(env.size()),
                                    static_cast<Eigen::Index>(truth->clusters.size()));
    for (SeqIndex i = 0; i < env.size(); ++i)
      pm.embeddings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(truth->cluster_of[i])) = 1.0;
  } else {
    pm.embeddings.resize(static_cast<Eigen::Index>(env.size()), 1);
    for (SeqIndex i = 0; i < env.size(); ++i) pm.embeddings(static_cast<Eigen::Index>(i), 0) = env.label(i);
  }
  return [pm = std::move(pm)](const Pool&, const ObservationLog&, const SurrogateConfig&) { return pm; };
}

/// Fixed predictions and embeddings, independent of the observations.
inline ModelFitter make_fixed_fitter(std::vector<double> predictions, RowMatrix embeddings) {
  PoolModel pm{std::move(predictions), std::move(embeddings)};
  return [pm = std::move(pm)](const Pool&, const ObservationLog&, const SurrogateConfig&) { return pm; };
}

struct GreedyConfig {
  SurrogateConfig surrogate;
};

struct EpsGreedyConfig {
  double epsilon = 0.1;
  SurrogateConfig surrogate;
};

struct HBBSConfig {
  std::size_t k = 10;
  NormalGammaPrior prior;
  SurrogateConfig surrogate;
  bool resample_tau = false;
  KMeansOptions kmeans;
};

struct GPUCBConfig {
  double beta = 1.0;
  std::size_t refit_interval = 5;  // m
  GPConfig gp;
  SurrogateConfig surrogate;
};

namespace detail {

inline void require_unobserved(const ObservationLog& log, std::size_t m) {
  if (log.unobserved_count() < m)
    throw Error(Errc::InsufficientUnobserved, std::to_string(log.unobserved_count()) +
                                                  " unobserved sequences, batch needs " + std::to_string(m));
}

/// Per-step surrogate seed: same for every agent at the same log size.
inline SurrogateConfig step_surrogate(const SurrogateConfig& base, const ObservationLog& log) {
  SurrogateConfig c = base;
  c.seed = derive_seed(base.seed, log.size());
  return c;
}

/// Orders candidates by prediction descending, then index ascending.
inline void sort_by_prediction(std::vector<SeqIndex>& idx, const std::vector<double>& pred) {
  std::sort(idx.begin(), idx.end(), [&](SeqIndex a, SeqIndex b) {
    if (pred[a] != pred[b]) return pred[a] > pred[b];
    return a < b;
  });
}

/// Iterated argmax of predictions over unobserved, non-excluded members.
inline void append_greedy(const std::vector<double>& pred, const ObservationLog& log, std::size_t count,
                          std::vector<SeqIndex>& out) {
  if (count == 0) return;
  std::vector<char> taken(log.pool_size(), 0);
  for (SeqIndex i : out) taken[i] = 1;
  std::vector<SeqIndex> cand;
  cand.reserve(log.unobserved_count());
  for (SeqIndex i = 0; i < log.pool_size(); ++i)
    if (!log.contains(i) && !taken[i]) cand.push_back(i);
  count = std::min(count, cand.size());
  auto cmp = [&](SeqIndex a, SeqIndex b) {
    if (pred[a] != pred[b]) return pred[a] > pred[b];
    return a < b;
  };
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(count), cand.end(), cmp);
  out.insert(out.end(), cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(count));
}

inline void check_model(const PoolModel& pm, const Pool& pool) {
  if (pm.predictions.size() != pool.size()) throw Error(Errc::ShapeMismatch, "predictions do not cover the pool");
}

}  // namespace detail

inline Batch greedy_act(const Pool& pool, const ObservationLog& log, std::size_t m, const GreedyConfig& cfg,
                        Rng& /*rng*/, const ModelFitter& fitter = fit_pool_model) {
  detail::require_unobserved(log, m);
  auto pm = fitter(pool, log, detail::step_surrogate(cfg.surrogate, log));
  detail::check_model(pm, pool);
  Batch b;
  detail::append_greedy(pm.predictions, log, m, b.selections);
  return b;
}

/// ⌈εM⌉ uniform-random unobserved picks, then ⌊(1-ε)M⌋ greedy picks.
inline Batch epsilon_greedy_act(const Pool& pool, const ObservationLog& log, std::size_t m,
                                const EpsGreedyConfig& cfg, Rng& rng, const ModelFitter& fitter = fit_pool_model) {
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw Error(Errc::ConfigInvalid, "epsilon must lie in [0,1]");
  detail::require_unobserved(log, m);
  // Tolerance keeps e.g. 0.1 * 30 from rounding up to 4.
  const double raw = cfg.epsilon * static_cast<double>(m);
  const auto n_random = std::min<std::size_t>(m, static_cast<std::size_t>(std::max(0.0, std::ceil(raw - 1e-9))));
  const std::size_t n_greedy = m - n_random;

  Batch b;
  b.selections = sample_without_replacement(log.unobserved(), n_random, rng);
  if (n_greedy > 0) {
    auto pm = fitter(pool, log, detail::step_surrogate(cfg.surrogate, log));
    detail::check_model(pm, pool);
    detail::append_greedy(pm.predictions, log, n_greedy, b.selections);
  }
  return b;
}

/// Thompson sampling over k-means clusters of the embedded pool, greedy
/// selection inside the winning cluster.
inline Batch hbbs_act(const Pool& pool, const ObservationLog& log, std::size_t m, const HBBSConfig& cfg, Rng& rng,
                      const ModelFitter& fitter = fit_pool_model) {
  if (cfg.k < 1) throw Error(Errc::ConfigInvalid, "k must be >= 1");
  cfg.prior.validate();
  detail::require_unobserved(log, m);
  auto pm = fitter(pool, log, detail::step_surrogate(cfg.surrogate, log));
  detail::check_model(pm, pool);
  if (static_cast<std::size_t>(pm.embeddings.rows()) != pool.size())
    throw Error(Errc::ShapeMismatch, "embeddings do not cover the pool");

  const auto part = kmeans(pm.embeddings, cfg.k, rng(), cfg.kmeans);
  const std::size_t k = part.k;

  std::vector<std::vector<double>> observed(k);
  for (std::size_t e = 0; e < log.size(); ++e)
    observed[part.assignment[log.indices()[e]]].push_back(log.labels()[e]);
  std::vector<NormalGammaPosterior> post;
  post.reserve(k);
  for (std::size_t c = 0; c < k; ++c) post.push_back(posterior_params(cfg.prior, observed[c]));

  std::vector<std::vector<SeqIndex>> cand(k);
  for (SeqIndex i = 0; i < pool.size(); ++i)
    if (!log.contains(i)) cand[part.assignment[i]].push_back(i);
  for (auto& c : cand) detail::sort_by_prediction(c, pm.predictions);
  std::vector<std::size_t> next(k, 0);
  auto exhausted = [&](std::size_t c) { return next[c] >= cand[c].size(); };

  std::vector<double> tau(k);
  if (!cfg.resample_tau)
    for (std::size_t c = 0; c < k; ++c) tau[c] = post[c].sample_precision(rng);

  auto draw = [&](bool skip_exhausted) {
    std::size_t best = k;
    double best_q = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (skip_exhausted && exhausted(c)) continue;
      const double t = cfg.resample_tau ? post[c].sample_precision(rng) : tau[c];
      const double q = post[c].sample_value(t, rng);
      if (best == k || q > best_q) {
        best_q = q;
        best = c;
      }
    }
    return best;
  };

  Batch b;
  b.selections.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t arm = draw(false);
    if (exhausted(arm)) arm = draw(true);
    b.selections.push_back(cand[arm][next[arm]++]);
  }
  return b;
}

/// Batch GP-UCB on the surrogate embedding: iterated argmax of μ + σ√β, with
/// σ refit on D ∪ A after every `refit_interval` picks.
inline Batch gpucb_act(const Pool& pool, const ObservationLog& log, std::size_t m, const GPUCBConfig& cfg,
                       Rng& /*rng*/, const ModelFitter& fitter = fit_pool_model) {
  if (!(cfg.beta >= 0.0)) throw Error(Errc::ConfigInvalid, "beta must be >= 0");
  if (cfg.refit_interval < 1) throw Error(Errc::ConfigInvalid, "refit interval must be >= 1");
  detail::require_unobserved(log, m);
  auto pm = fitter(pool, log, detail::step_surrogate(cfg.surrogate, log));
  if (static_cast<std::size_t>(pm.embeddings.rows()) != pool.size())
    throw Error(Errc::ShapeMismatch, "embeddings do not cover the pool");
  const auto dim = pm.embeddings.cols();

  auto rows_of = [&](const std::vector<SeqIndex>& idx) {
    RowMatrix x(static_cast<Eigen::Index>(idx.size()), dim);
    for (std::size_t r = 0; r < idx.size(); ++r)
      x.row(static_cast<Eigen::Index>(r)) = pm.embeddings.row(static_cast<Eigen::Index>(idx[r]));
    return x;
  };

  const GPModel gp = fit_gp(rows_of(log.indices()), log.labels(), cfg.gp);
  const std::vector<SeqIndex> cand = log.unobserved();
  const auto pred = gp.predict(rows_of(cand));
  std::vector<double> mu(cand.size()), sigma(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) {
    mu[i] = pred[i].mu;
    sigma[i] = pred[i].sigma;
  }
  const double w = std::sqrt(cfg.beta);
  std::vector<char> chosen(cand.size(), 0);

  Batch b;
  b.selections.reserve(m);
  for (std::size_t i = 1; i <= m; ++i) {
    std::size_t best = cand.size();
    double best_s = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cand.size(); ++c) {
      if (chosen[c]) continue;
      const double s = mu[c] + sigma[c] * w;
      if (best == cand.size() || s > best_s) {
        best_s = s;
        best = c;
      }
    }
    chosen[best] = 1;
    b.selections.push_back(cand[best]);
    if (i % cfg.refit_interval == 0 && i < m) {
      const GPModel refit = refit_sigma(gp, rows_of(b.selections));
      std::vector<std::size_t> rest;
      for (std::size_t c = 0; c < cand.size(); ++c)
        if (!chosen[c]) rest.push_back(c);
      RowMatrix q(static_cast<Eigen::Index>(rest.size()), dim);
      for (std::size_t r = 0; r < rest.size(); ++r)
        q.row(static_cast<Eigen::Index>(r)) = pm.embeddings.row(static_cast<Eigen::Index>(cand[rest[r]]));
      const auto s = refit.predict_sigma(q);
      for (std::size_t r = 0; r < rest.size(); ++r) sigma[rest[r]] = s[r];
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Uniform agent handle

using AgentConfig = std::variant<GreedyConfig, EpsGreedyConfig, HBBSConfig, GPUCBConfig>;

inline std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

struct AgentSpec {
  AgentConfig config;

  std::string name() const {
    return std::visit(
        [](const auto& c) -> std::string {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, GreedyConfig>) return "greedy";
          else if constexpr (std::is_same_v<T, EpsGreedyConfig>) return "epsilon_greedy";
          else if constexpr (std::is_same_v<T, HBBSConfig>) return "hbbs";
          else return "gpucb";
        },
        config);
  }

  /// Hyperparameter record; ';'-separated so it stays a single CSV field.
  std::string describe() const {
    return std::visit(
        [](const auto& c) -> std::string {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, GreedyConfig>) return "default";
          else if constexpr (std::is_same_v<T, EpsGreedyConfig>) return "eps=" + format_number(c.epsilon);
          else if constexpr (std::is_same_v<T, HBBSConfig>) {
            std::string s = "k=" + std::to_string(c.k);
            const NormalGammaPrior def;
            if (c.prior.mu0 != def.mu0 || c.prior.n0 != def.n0 || c.prior.alpha != def.alpha ||
                c.prior.beta != def.beta)
              s += ";mu0=" + format_number(c.prior.mu0) + ";n0=" + format_number(c.prior.n0) +
                   ";alpha=" + format_number(c.prior.alpha) + ";beta=" + format_number(c.prior.beta);
            if (c.resample_tau) s += ";resample_tau";
            return s;
          } else {
            return "beta=" + format_number(c.beta) + ";m=" + std::to_string(c.refit_interval);
          }
        },
        config);
  }

  SurrogateConfig& surrogate() {
    return std::visit([](auto& c) -> SurrogateConfig& { return c.surrogate; }, config);
  }
  const SurrogateConfig& surrogate() const {
    return std::visit([](const auto& c) -> const SurrogateConfig& { return c.surrogate; }, config);
  }
};

inline Batch act(const AgentSpec& agent, const Pool& pool, const ObservationLog& log, std::size_t m, Rng& rng,
                 const ModelFitter& fitter = fit_pool_model) {
  return std::visit(
      [&](const auto& c) -> Batch {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, GreedyConfig>) return greedy_act(pool, log, m, c, rng, fitter);
        else if constexpr (std::is_same_v<T, EpsGreedyConfig>) return epsilon_greedy_act(pool, log, m, c, rng, fitter);
        else if constexpr (std::is_same_v<T, HBBSConfig>) return hbbs_act(pool, log, m, c, rng, fitter);
        else return gpucb_act(pool, log, m, c, rng, fitter);
      },
      agent.config);
}

}  // namespace hbbs
