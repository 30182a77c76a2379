#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hbbs/agents.hpp"
#include "hbbs/core.hpp"
#include "hbbs/environments.hpp"
#include "hbbs/harness.hpp"
#include "hbbs/rng.hpp"
#include "hbbs/surrogate.hpp"

namespace hbbs::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kConfig = 3, kRuntime = 4 };

/// Errors raised while reading inputs count as config/parse failures.
inline int exit_code_for(Errc c) {
  switch (c) {
    case Errc::ParseError:
    case Errc::ConfigInvalid:
    case Errc::AlphabetMismatch:
    case Errc::LabelRange:
    case Errc::UnequalLengths:
    case Errc::EmptyPool:
    case Errc::BatchTooLarge:
    case Errc::RhoDegenerate:
    case Errc::PoolExhausted:
      return kConfig;
    default:
      return kRuntime;
  }
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomically(path, text);
}

struct RunArgs {
  std::string config, out;
  std::optional<std::size_t> workers, steps, trials;
  std::optional<std::uint64_t> seed;
  std::optional<double> rho;
};

inline int do_run(const RunArgs& a, std::ostream& log) {
  RunConfig rc = load_run_config(a.config);
  if (a.workers) rc.workers = *a.workers;
  if (a.steps) rc.steps = *a.steps;
  if (a.trials) rc.trials = *a.trials;
  if (a.seed) rc.root_seed = *a.seed;
  if (a.rho) rc.rho = *a.rho;
  const std::filesystem::path out(a.out);
  std::filesystem::create_directories(out);
  auto records = run_sweep(rc, default_fitter_factory(), out / "trials", [&](const TrialRecord& r) {
    log << r.agent << " [" << r.config << "] seed " << r.seed << ": final regret " << fmt_double(r.final_regret())
        << '\n';
  });
  std::ostringstream results;
  write_results_csv(results, records);
  write_text(out / "results.csv", results.str());
  if (rc.trials >= 2) {
    std::ostringstream summary;
    write_summary_csv(summary, aggregate(records, 0.9));
    write_text(out / "summary.csv", summary.str());
  } else {
    log << "single trial per config; summary.csv not written\n";
  }
  return kOk;
}

inline int do_report(const std::string& results, const std::string& out, double confidence, std::ostream& stdout_) {
  std::filesystem::path path(results);
  if (std::filesystem::is_directory(path)) path /= "results.csv";
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open results '" + path.string() + "'");
  const auto summary = aggregate(read_results_csv(in), confidence);
  std::ostringstream os;
  write_summary_csv(os, summary);
  if (!out.empty()) write_text(out, os.str());
  stdout_ << os.str();
  return kOk;
}

struct ExportArgs {
  std::string env, out, surrogate_config;
  double train_fraction = 0.2;
  std::uint64_t seed = 0;
};

inline int do_export(const ExportArgs& a) {
  if (!(a.train_fraction > 0.0 && a.train_fraction <= 1.0))
    throw Error(Errc::ConfigInvalid, "--train-fraction must lie in (0,1]");
  auto bundle = load_environment(a.env);
  SurrogateConfig cfg;
  if (!a.surrogate_config.empty()) {
    std::ifstream in(a.surrogate_config);
    if (!in) throw Error(Errc::ParseError, "cannot open surrogate config '" + a.surrogate_config + "'");
    try {
      nlohmann::json j;
      in >> j;
      cfg = surrogate_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, std::string("surrogate config: ") + e.what());
    }
  }
  cfg.seed = a.seed;
  cfg.validate();
  const auto& env = bundle.env;
  const auto n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(a.train_fraction * static_cast<double>(env.size()))));
  std::vector<SeqIndex> all(env.size());
  std::iota(all.begin(), all.end(), SeqIndex{0});
  Rng rng(derive_seed(a.seed, 0x5b17));
  const auto log = seed_observations(env, sample_without_replacement(std::move(all), n_train, rng));
  const auto model = fit_surrogate(env.pool(), log, cfg);
  std::ostringstream os;
  write_embedding_csv(os, model.evaluate(env.pool()).embeddings, env.labels());
  write_text(a.out, os.str());
  return kOk;
}

}  // namespace detail

/// Parses argv and runs one subcommand. Diagnostics go to `err`.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Batched active search over sequence pools"};
  app.require_subcommand(1);

  ClusterEnvConfig gen;
  std::string gen_out;
  auto* g = app.add_subcommand("generate-env", "Generate a clustered synthetic environment");
  g->add_option("--clusters", gen.clusters, "number of clusters N")->capture_default_str();
  g->add_option("--per-cluster", gen.per_cluster, "sequences per cluster n")->capture_default_str();
  g->add_option("--sigma", gen.sigma, "label spread bound")->capture_default_str();
  g->add_option("--c", gen.c, "position-distribution exponent")->capture_default_str();
  g->add_option("--length", gen.length, "sequence length")->capture_default_str();
  g->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
  g->add_option("--batch-size", gen.batch_size, "batch size M")->capture_default_str();
  g->add_option("--out", gen_out, "output JSON file")->required();

  detail::RunArgs run;
  auto* r = app.add_subcommand("run", "Run a benchmark sweep from a config file");
  r->add_option("--config", run.config, "run config (JSON)")->required();
  r->add_option("--out", run.out, "output directory")->default_val("results");
  r->add_option("--workers", run.workers, "concurrent trials");
  r->add_option("--steps", run.steps, "steps T per trial");
  r->add_option("--trials", run.trials, "seeds per agent config");
  r->add_option("--seed", run.seed, "root seed");
  r->add_option("--rho", run.rho, "regret fraction");

  std::string rep_in, rep_out;
  double confidence = 0.9;
  auto* p = app.add_subcommand("report", "Summarize a results CSV");
  p->add_option("--results", rep_in, "results.csv or a run output directory")->required();
  p->add_option("--out", rep_out, "write the summary CSV here as well");
  p->add_option("--confidence", confidence, "two-sided confidence level")->capture_default_str();

  detail::ExportArgs ex;
  auto* e = app.add_subcommand("export-embedding", "Train a surrogate on a random labeled split and export embeddings");
  e->add_option("--env", ex.env, "environment JSON file")->required();
  e->add_option("--out", ex.out, "output CSV")->required();
  e->add_option("--train-fraction", ex.train_fraction, "fraction of the pool used as labels")->capture_default_str();
  e->add_option("--seed", ex.seed, "seed for the split and training")->capture_default_str();
  e->add_option("--surrogate-config", ex.surrogate_config, "surrogate hyperparameters (JSON)");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << '\n';
    return kUsage;
  }

  try {
    if (g->parsed()) {
      gen.validate();
      auto env = generate_cluster_env(gen);
      save_environment(gen_out, env.env, &env.truth, &env.config);
      err << "wrote " << gen_out << " (" << env.env.size() << " sequences)\n";
      return kOk;
    }
    if (r->parsed()) return detail::do_run(run, err);
    if (p->parsed()) return detail::do_report(rep_in, rep_out, confidence, out);
    if (e->parsed()) return detail::do_export(ex);
  } catch (const Error& ex_) {
    err << "error: " << ex_.what() << '\n';
    return exit_code_for(ex_.code());
  } catch (const std::exception& ex_) {
    err << "error: " << ex_.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace hbbs::cli
