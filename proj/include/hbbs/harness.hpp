#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "hbbs/agents.hpp"
#include "hbbs/core.hpp"
#include "hbbs/environments.hpp"
#include "hbbs/rng.hpp"

namespace hbbs {

// ---------------------------------------------------------------------------
// Regret

/// ⌊ρM⌋, the number of top labels scored per batch.
inline std::size_t top_count(std::size_t m, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(Errc::ConfigInvalid, "rho must lie in (0,1]");
  const auto r = static_cast<std::size_t>(std::floor(rho * static_cast<double>(m) + 1e-9));
  if (r == 0) throw Error(Errc::RhoDegenerate, "floor(rho*M) is 0 for rho=" + format_number(rho) +
                                                   ", M=" + std::to_string(m));
  return r;
}

/// Sum of the r largest values, accumulated in descending order.
inline double top_sum(std::vector<double> values, std::size_t r) {
  r = std::min(r, values.size());
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(r), values.end(),
                    std::greater<double>());
  double s = 0.0;
  for (std::size_t i = 0; i < r; ++i) s += values[i];
  return s;
}

/// R* - R: top-⌊ρM⌋ sum over the remaining (unobserved) labels minus the
/// same over the batch. The best batch of size M always contains the global
/// top ⌊ρM⌋, so R* needs no enumeration.
inline double step_regret(const std::vector<double>& batch_labels, const std::vector<double>& remaining_labels,
                          std::size_t m, double rho) {
  const std::size_t r = top_count(m, rho);
  if (batch_labels.size() != m)
    throw Error(Errc::SizeMismatch, "batch has " + std::to_string(batch_labels.size()) + " labels, M=" +
                                        std::to_string(m));
  if (remaining_labels.size() < m) throw Error(Errc::SizeMismatch, "fewer remaining labels than M");
  const double best = top_sum(remaining_labels, r);
  const double got = top_sum(batch_labels, r);
  return std::max(0.0, best - got);
}

inline std::vector<double> cumulative_regret(const std::vector<double>& steps) {
  std::vector<double> out;
  out.reserve(steps.size());
  double acc = 0.0;
  for (double v : steps) {
    if (!(v >= 0.0)) throw Error(Errc::NegativeStep, "step regret " + format_number(v) + " is negative");
    acc += v;
    out.push_back(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trials

struct StepRecord {
  std::vector<SeqIndex> batch;
  std::vector<double> labels;
  double regret = 0.0;
  double cumulative = 0.0;
  double wallclock_s = 0.0;
};

struct TrialRecord {
  std::string environment;
  std::uint64_t seed = 0;
  std::string agent;
  std::string config;
  std::vector<StepRecord> steps;

  std::size_t length() const noexcept { return steps.size(); }
  double final_regret() const { return steps.empty() ? 0.0 : steps.back().cumulative; }
  double mean_wallclock() const {
    if (steps.empty()) return 0.0;
    double s = 0.0;
    for (const auto& st : steps) s += st.wallclock_s;
    return s / static_cast<double>(steps.size());
  }
};

/// Seeds D_0 with one uniformly random batch, then runs T agent steps. Only
/// the act() call is timed.
inline TrialRecord run_trial(const Environment& env, AgentSpec agent, std::size_t steps, double rho,
                             std::uint64_t seed, const ModelFitter& fitter = fit_pool_model,
                             const std::string& env_id = "") {
  const std::size_t m = env.batch_size();
  top_count(m, rho);
  if ((steps + 1) * m > env.size())
    throw Error(Errc::PoolExhausted, "pool of " + std::to_string(env.size()) + " cannot supply " +
                                         std::to_string(steps + 1) + " batches of " + std::to_string(m));
  Rng rng(seed);
  agent.surrogate().seed = derive_seed(seed, 0x5eed);

  std::vector<SeqIndex> all(env.size());
  std::iota(all.begin(), all.end(), SeqIndex{0});
  ObservationLog log = seed_observations(env, sample_without_replacement(std::move(all), m, rng));

  TrialRecord rec;
  rec.environment = env_id;
  rec.seed = seed;
  rec.agent = agent.name();
  rec.config = agent.describe();
  rec.steps.reserve(steps);
  double cum = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    Batch batch;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      batch = act(agent, env.pool(), log, m, rng, fitter);
    } catch (const Error& e) {
      throw Error(e.code(), "agent " + rec.agent + "[" + rec.config + "] seed " + std::to_string(seed) + " step " +
                                std::to_string(t + 1) + ": " + e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    if (batch.size() != m)
      throw Error(Errc::SizeMismatch, "agent " + rec.agent + " returned " + std::to_string(batch.size()) +
                                          " selections at step " + std::to_string(t + 1));
    check_batch(log, batch);

    StepRecord st;
    st.wallclock_s = std::chrono::duration<double>(t1 - t0).count();
    std::vector<double> remaining;
    remaining.reserve(log.unobserved_count());
    for (SeqIndex i = 0; i < env.size(); ++i)
      if (!log.contains(i)) remaining.push_back(env.label(i));
    st.batch = batch.selections;
    for (SeqIndex i : batch.selections) st.labels.push_back(env.label(i));
    st.regret = step_regret(st.labels, remaining, m, rho);
    cum += st.regret;
    st.cumulative = cum;
    log = observe(env, log, batch);
    rec.steps.push_back(std::move(st));
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateRow {
  std::string agent;
  std::string config;
  std::size_t n_trials = 0;
  double mean_final_regret = 0.0;
  double ci_halfwidth = 0.0;
  double mean_step_wallclock_s = 0.0;
};

struct AggregateSummary {
  double confidence = 0.9;
  std::vector<AggregateRow> rows;  // sorted by (agent, config)
};

/// Two-sided normal quantile, e.g. 1.6449 for 0.9.
inline double normal_critical_value(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw Error(Errc::ConfigInvalid, "confidence must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + confidence / 2.0);
}

/// Mean ± z·s/√n of the final cumulative regret per (agent, config).
inline AggregateSummary aggregate(const std::vector<TrialRecord>& records, double confidence = 0.9) {
  const double z = normal_critical_value(confidence);
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.agent, r.config}];
    g.first.push_back(r.final_regret());
    g.second.push_back(r.mean_wallclock());
  }
  AggregateSummary out;
  out.confidence = confidence;
  for (auto& [key, g] : groups) {
    auto& [finals, clocks] = g;
    if (finals.size() < 2)
      throw Error(Errc::InsufficientTrials, key.first + "[" + key.second + "] has " + std::to_string(finals.size()) +
                                                " trial(s); intervals need at least 2");
    // Sorting first makes the sums independent of record order.
    std::sort(finals.begin(), finals.end());
    std::sort(clocks.begin(), clocks.end());
    const double n = static_cast<double>(finals.size());
    const double mean = std::accumulate(finals.begin(), finals.end(), 0.0) / n;
    double ss = 0.0;
    if (finals.front() != finals.back())
      for (double v : finals) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    AggregateRow row;
    row.agent = key.first;
    row.config = key.second;
    row.n_trials = finals.size();
    row.mean_final_regret = mean;
    row.ci_halfwidth = z * sd / std::sqrt(n);
    row.mean_step_wallclock_s = std::accumulate(clocks.begin(), clocks.end(), 0.0) / n;
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kResultsHeader = "agent,config,seed,step,regret_step,regret_cum,wallclock_s";
inline constexpr const char* kSummaryHeader =
    "agent,config,n_trials,mean_final_regret,ci90_halfwidth,mean_step_wallclock_s";

inline void write_trial_rows(std::ostream& out, const TrialRecord& r) {
  for (std::size_t t = 0; t < r.steps.size(); ++t) {
    const auto& s = r.steps[t];
    out << r.agent << ',' << r.config << ',' << r.seed << ',' << (t + 1) << ',' << fmt_double(s.regret) << ','
        << fmt_double(s.cumulative) << ',' << fmt_double(s.wallclock_s) << '\n';
  }
}

inline void write_results_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << kResultsHeader << '\n';
  for (const auto& r : records) write_trial_rows(out, r);
}

inline void write_summary_csv(std::ostream& out, const AggregateSummary& s) {
  out << kSummaryHeader << '\n';
  for (const auto& r : s.rows)
    out << r.agent << ',' << r.config << ',' << r.n_trials << ',' << fmt_double(r.mean_final_regret) << ','
        << fmt_double(r.ci_halfwidth) << ',' << fmt_double(r.mean_step_wallclock_s) << '\n';
}

/// Rebuilds per-trial regret/wall-clock series from a results CSV. Batches
/// are not stored in the CSV and come back empty.
inline std::vector<TrialRecord> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kResultsHeader)
    throw Error(Errc::ParseError, "row 1: expected header '" + std::string(kResultsHeader) + "'");
  std::map<std::tuple<std::string, std::string, std::uint64_t>, std::map<std::size_t, StepRecord>> trials;
  std::vector<std::tuple<std::string, std::string, std::uint64_t>> order;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cols = detail::split_csv_line(line);
    if (cols.size() != 7) throw Error(Errc::ParseError, "row " + std::to_string(row) + ": expected 7 columns");
    StepRecord st;
    double seed = 0, step = 0;
    if (!detail::parse_double(cols[2], seed) || !detail::parse_double(cols[3], step) ||
        !detail::parse_double(cols[4], st.regret) || !detail::parse_double(cols[5], st.cumulative) ||
        !detail::parse_double(cols[6], st.wallclock_s))
      throw Error(Errc::ParseError, "row " + std::to_string(row) + ": bad number");
    std::uint64_t seed_u = std::stoull(cols[2]);
    auto key = std::make_tuple(cols[0], cols[1], seed_u);
    auto [it, inserted] = trials.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second[static_cast<std::size_t>(step)] = st;
  }
  std::vector<TrialRecord> out;
  for (const auto& key : order) {
    TrialRecord r;
    r.agent = std::get<0>(key);
    r.config = std::get<1>(key);
    r.seed = std::get<2>(key);
    for (auto& [step, st] : trials[key]) r.steps.push_back(st);
    out.push_back(std::move(r));
  }
  return out;
}

/// `index,e1..eH,label`, one row per pool sequence.
inline void write_embedding_csv(std::ostream& out, const RowMatrix& embeddings, const std::vector<double>& labels) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
    throw Error(Errc::SizeMismatch, "embedding rows and labels differ in count");
  out << "index";
  for (Eigen::Index d = 0; d < embeddings.cols(); ++d) out << ",e" << (d + 1);
  out << ",label\n";
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    out << i;
    for (Eigen::Index d = 0; d < embeddings.cols(); ++d) out << ',' << fmt_double(embeddings(i, d));
    out << ',' << fmt_double(labels[static_cast<std::size_t>(i)]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Run configuration and sweeps

struct EnvironmentSpec {
  enum class Kind { Cluster, Dataset, File } kind = Kind::Cluster;
  ClusterEnvConfig cluster;
  std::string path;
  std::size_t batch_size = 0;  // 0: take from the generator config / file
  bool normalize = true;
  std::string alphabet = "dna";
};

struct RunConfig {
  EnvironmentSpec environment;
  std::vector<AgentSpec> agents;
  std::size_t steps = 60;
  double rho = 0.2;
  std::size_t trials = 2;
  std::uint64_t root_seed = 0;
  std::size_t workers = 1;
  bool env_per_trial = false;  // cluster environments only
};

namespace detail {

/// Scalar or array → list.
template <class T>
std::vector<T> grid_values(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return {fallback};
  const auto& v = j.at(key);
  if (v.is_array()) {
    if (v.empty()) throw Error(Errc::ConfigInvalid, std::string("empty grid for '") + key + "'");
    return v.get<std::vector<T>>();
  }
  return {v.get<T>()};
}

inline NormalGammaPrior prior_from_json(const nlohmann::json& j) {
  NormalGammaPrior p;
  p.mu0 = j.value("mu0", p.mu0);
  p.n0 = j.value("n0", p.n0);
  p.alpha = j.value("alpha", p.alpha);
  p.beta = j.value("beta", p.beta);
  p.validate();
  return p;
}

inline GPConfig gp_from_json(const nlohmann::json& j) {
  GPConfig g;
  g.length_scale = j.value("length_scale", g.length_scale);
  g.signal_variance = j.value("signal_variance", g.signal_variance);
  g.noise_variance = j.value("noise_variance", g.noise_variance);
  g.center_targets = j.value("center_targets", g.center_targets);
  g.validate();
  return g;
}

inline std::vector<AgentSpec> agents_from_json(const nlohmann::json& a, const SurrogateConfig& base_surrogate) {
  const std::string type = a.at("type").get<std::string>();
  const SurrogateConfig sur =
      a.contains("surrogate") ? surrogate_config_from_json(a["surrogate"], base_surrogate) : base_surrogate;
  std::vector<AgentSpec> out;
  if (type == "greedy") {
    out.push_back({GreedyConfig{sur}});
  } else if (type == "epsilon_greedy") {
    for (double eps : grid_values<double>(a, "epsilon", 0.1)) {
      if (!(eps >= 0.0 && eps <= 1.0)) throw Error(Errc::ConfigInvalid, "epsilon must lie in [0,1]");
      out.push_back({EpsGreedyConfig{eps, sur}});
    }
  } else if (type == "hbbs") {
    const NormalGammaPrior prior = a.contains("prior") ? prior_from_json(a["prior"]) : NormalGammaPrior{};
    for (std::size_t k : grid_values<std::size_t>(a, "k", 10)) {
      if (k < 1) throw Error(Errc::ConfigInvalid, "hbbs k must be >= 1");
      HBBSConfig c;
      c.k = k;
      c.prior = prior;
      c.surrogate = sur;
      c.resample_tau = a.value("resample_tau", false);
      c.kmeans.n_init = a.value("kmeans_restarts", c.kmeans.n_init);
      out.push_back({c});
    }
  } else if (type == "gpucb") {
    const GPConfig gp = a.contains("gp") ? gp_from_json(a["gp"]) : GPConfig{};
    for (double beta : grid_values<double>(a, "beta", 1.0))
      for (std::size_t m : grid_values<std::size_t>(a, "refit_interval", 5)) {
        if (!(beta >= 0.0) || m < 1) throw Error(Errc::ConfigInvalid, "gpucb needs beta >= 0 and refit_interval >= 1");
        out.push_back({GPUCBConfig{beta, m, gp, sur}});
      }
  } else {
    throw Error(Errc::ConfigInvalid, "unknown agent type '" + type + "'");
  }
  return out;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  try {
    RunConfig rc;
    const auto& e = j.at("environment");
    const std::string type = e.value("type", std::string("cluster"));
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).string();
    };
    if (type == "cluster") {
      rc.environment.kind = EnvironmentSpec::Kind::Cluster;
      rc.environment.cluster = config_from_json(e);
      rc.environment.cluster.validate();
    } else if (type == "dataset") {
      rc.environment.kind = EnvironmentSpec::Kind::Dataset;
      rc.environment.path = resolve(e.at("path").get<std::string>());
      rc.environment.batch_size = e.at("batch_size").get<std::size_t>();
      rc.environment.normalize = e.value("normalize", true);
      rc.environment.alphabet = e.value("alphabet", std::string("dna"));
    } else if (type == "file") {
      rc.environment.kind = EnvironmentSpec::Kind::File;
      rc.environment.path = resolve(e.at("path").get<std::string>());
      rc.environment.batch_size = e.value("batch_size", std::size_t{0});
    } else {
      throw Error(Errc::ConfigInvalid, "unknown environment type '" + type + "'");
    }
    const SurrogateConfig sur = j.contains("surrogate") ? surrogate_config_from_json(j["surrogate"]) : SurrogateConfig{};
    for (const auto& a : j.at("agents")) {
      auto specs = detail::agents_from_json(a, sur);
      rc.agents.insert(rc.agents.end(), specs.begin(), specs.end());
    }
    if (rc.agents.empty()) throw Error(Errc::ConfigInvalid, "no agents configured");
    rc.steps = j.value("steps", rc.steps);
    rc.rho = j.value("rho", rc.rho);
    rc.trials = j.value("trials", rc.trials);
    rc.root_seed = j.value("root_seed", rc.root_seed);
    rc.workers = j.value("workers", rc.workers);
    rc.env_per_trial = j.value("env_per_trial", rc.env_per_trial);
    if (rc.steps < 1 || rc.trials < 1) throw Error(Errc::ConfigInvalid, "steps and trials must be >= 1");
    if (rc.env_per_trial && rc.environment.kind != EnvironmentSpec::Kind::Cluster)
      throw Error(Errc::ConfigInvalid, "env_per_trial requires a cluster environment");
    return rc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("run config: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open run config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, "run config '" + path + "': " + e.what());
  }
  return parse_run_config(j, std::filesystem::path(path).parent_path());
}

struct SweepEnvironment {
  std::string id;
  Environment env;
  std::optional<ClusterGroundTruth> truth;
};

inline SweepEnvironment build_environment(const EnvironmentSpec& spec, std::optional<std::uint64_t> seed = {}) {
  SweepEnvironment out;
  switch (spec.kind) {
    case EnvironmentSpec::Kind::Cluster: {
      ClusterEnvConfig cfg = spec.cluster;
      if (seed) cfg.seed = *seed;
      auto g = generate_cluster_env(cfg);
      out.id = "cluster:seed=" + std::to_string(cfg.seed);
      out.env = std::move(g.env);
      out.truth = std::move(g.truth);
      break;
    }
    case EnvironmentSpec::Kind::Dataset:
      out.id = "dataset:" + spec.path;
      out.env = load_dataset_env(spec.path, spec.batch_size, spec.normalize, Alphabet::from_name(spec.alphabet));
      break;
    case EnvironmentSpec::Kind::File: {
      auto b = load_environment(spec.path);
      out.id = "file:" + spec.path;
      if (spec.batch_size != 0) {
        std::vector<Sequence> seqs = b.env.pool().sequences();
        b.env = validate_environment(b.env.pool().alphabet(), seqs, b.env.labels(), spec.batch_size);
      }
      out.env = std::move(b.env);
      out.truth = std::move(b.truth);
      break;
    }
  }
  return out;
}

/// Builds a ModelFitter for one environment; the default ignores the
/// environment and trains the surrogate.
using FitterFactory = std::function<ModelFitter(const SweepEnvironment&)>;

inline FitterFactory default_fitter_factory() {
  return [](const SweepEnvironment&) -> ModelFitter { return fit_pool_model; };
}

inline void write_file_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::ParseError, "cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw Error(Errc::ParseError, "write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

/// Runs every (agent config × trial). Trial t uses seed derive_seed(root, t)
/// for all agents, so agents see the same D_0 and environment. Results come
/// back ordered by (agent, trial) regardless of worker count.
inline std::vector<TrialRecord> run_sweep(const RunConfig& rc, const FitterFactory& factory = default_fitter_factory(),
                                          const std::filesystem::path& trial_dir = {},
                                          const std::function<void(const TrialRecord&)>& on_trial = {}) {
  std::vector<SweepEnvironment> envs;
  if (rc.env_per_trial) {
    for (std::size_t t = 0; t < rc.trials; ++t)
      envs.push_back(build_environment(rc.environment, derive_seed(rc.environment.cluster.seed, t)));
  } else {
    envs.push_back(build_environment(rc.environment));
  }
  std::vector<ModelFitter> fitters;
  for (const auto& e : envs) fitters.push_back(factory(e));
  if (!trial_dir.empty()) std::filesystem::create_directories(trial_dir);

  const std::size_t n_jobs = rc.agents.size() * rc.trials;
  std::vector<TrialRecord> results(n_jobs);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= n_jobs || failed.load()) return;
      const std::size_t a = job / rc.trials, t = job % rc.trials;
      const std::size_t e = rc.env_per_trial ? t : 0;
      try {
        auto rec = run_trial(envs[e].env, rc.agents[a], rc.steps, rc.rho, derive_seed(rc.root_seed, t), fitters[e],
                             envs[e].id);
        if (!trial_dir.empty()) {
          std::ostringstream os;
          os << kResultsHeader << '\n';
          write_trial_rows(os, rec);
          std::string name = rec.agent + "__" + rec.config + "__trial" + std::to_string(t) + ".csv";
          std::replace(name.begin(), name.end(), ';', '_');
          write_file_atomically(trial_dir / name, os.str());
        }
        std::lock_guard<std::mutex> lock(mu);
        if (on_trial) on_trial(rec);
        results[job] = std::move(rec);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(rc.workers, n_jobs));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace hbbs
