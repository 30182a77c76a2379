#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hbbs/core.hpp"
#include "hbbs/rng.hpp"

namespace hbbs {

struct ClusterEnvConfig {
  std::size_t clusters = 10;      // N
  std::size_t per_cluster = 500;  // n
  double sigma = 0.1;
  double c = 0.2;
  std::size_t length = 100;  // ℓ
  std::uint64_t seed = 0;
  std::size_t batch_size = 100;

  void validate() const {
    if (clusters < 1) throw Error(Errc::ConfigInvalid, "clusters must be >= 1");
    if (per_cluster < 1) throw Error(Errc::ConfigInvalid, "per_cluster must be >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(Errc::ConfigInvalid, "sigma must be > 0");
    if (!(c > 0.0) || !std::isfinite(c)) throw Error(Errc::ConfigInvalid, "c must be > 0");
    if (length < 1) throw Error(Errc::ConfigInvalid, "length must be >= 1");
    if (batch_size < 1) throw Error(Errc::ConfigInvalid, "batch_size must be >= 1");
  }
};

using BaseDistribution = std::array<double, 4>;

struct ClusterTruth {
  double mean = 0.0;    // μ of the latent Gaussian
  double spread = 0.0;  // its standard deviation x
  std::vector<BaseDistribution> positions;
};

struct ClusterGroundTruth {
  std::vector<ClusterTruth> clusters;
  std::vector<std::size_t> cluster_of;  // indexed by pool position

  std::vector<SeqIndex> members(std::size_t cluster) const {
    std::vector<SeqIndex> out;
    for (SeqIndex i = 0; i < cluster_of.size(); ++i)
      if (cluster_of[i] == cluster) out.push_back(i);
    return out;
  }
};

/// Normalized |x_i|^{1/c} from four explicit draws.
inline BaseDistribution position_distribution_from_draws(const std::array<double, 4>& draws, double c) {
  if (!(c > 0.0)) throw Error(Errc::ConfigInvalid, "c must be > 0");
  BaseDistribution v{};
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    v[i] = draws[i] == 0.0 ? 0.0 : std::pow(std::abs(draws[i]), 1.0 / c);
    total += v[i];
  }
  if (!(total > 0.0) || !std::isfinite(total))
    throw Error(Errc::DegenerateDraw, "position draws have zero or non-finite mass");
  for (double& x : v) x /= total;
  return v;
}

inline BaseDistribution sample_position_distribution(double c, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    std::array<double, 4> draws{normal(rng), normal(rng), normal(rng), normal(rng)};
    try {
      return position_distribution_from_draws(draws, c);
    } catch (const Error& e) {
      if (e.code() != Errc::DegenerateDraw) throw;
    }
  }
}

inline double sigmoid(double y) { return 1.0 / (1.0 + std::exp(-y)); }

struct GeneratedEnv {
  Environment env;
  ClusterGroundTruth truth;
  ClusterEnvConfig config;
};

inline GeneratedEnv generate_cluster_env(const ClusterEnvConfig& cfg) {
  cfg.validate();
  static constexpr char kBases[] = {'A', 'C', 'G', 'T'};
  // Labels are kept strictly inside (0,1) even where the sigmoid rounds to an endpoint.
  constexpr double kLo = std::numeric_limits<double>::min();
  const double kHi = std::nextafter(1.0, 0.0);

  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ClusterGroundTruth truth;
  std::vector<Sequence> seqs;
  std::vector<double> labels;
  std::vector<std::size_t> source_cluster;
  seqs.reserve(cfg.clusters * cfg.per_cluster);
  labels.reserve(cfg.clusters * cfg.per_cluster);

  for (std::size_t k = 0; k < cfg.clusters; ++k) {
    ClusterTruth ct;
    ct.mean = unit(rng) - 0.5;
    do {
      ct.spread = cfg.sigma * unit(rng);
    } while (ct.spread <= 0.0);
    ct.positions.reserve(cfg.length);
    for (std::size_t j = 0; j < cfg.length; ++j) ct.positions.push_back(sample_position_distribution(cfg.c, rng));

    std::normal_distribution<double> latent(ct.mean, ct.spread);
    for (std::size_t s = 0; s < cfg.per_cluster; ++s) {
      Sequence seq;
      seq.residues.resize(cfg.length);
      for (std::size_t j = 0; j < cfg.length; ++j) {
        const auto& v = ct.positions[j];
        double u = unit(rng);
        std::size_t b = 0;
        double acc = v[0];
        while (b < 3 && u >= acc) acc += v[++b];
        seq.residues[j] = kBases[b];
      }
      seqs.push_back(std::move(seq));
      labels.push_back(std::clamp(sigmoid(latent(rng)), kLo, kHi));
      source_cluster.push_back(k);
    }
    truth.clusters.push_back(std::move(ct));
  }

  // Dedup happens here; the batch-size check is applied to the deduplicated pool.
  Environment env = validate_environment(Alphabet::dna(), seqs, labels, cfg.batch_size);
  truth.cluster_of.assign(env.size(), 0);
  std::vector<char> assigned(env.size(), 0);
  for (std::size_t src = 0; src < seqs.size(); ++src) {
    SeqIndex dst = env.source_to_pool()[src];
    if (!assigned[dst]) {
      truth.cluster_of[dst] = source_cluster[src];
      assigned[dst] = 1;
    }
  }
  return {std::move(env), std::move(truth), cfg};
}

/// Rank r (0-based, ascending, ties by input order) maps to r/(n-1); n = 1 maps to 0.5.
inline std::vector<double> rank_normalize(const std::vector<double>& scores) {
  const std::size_t n = scores.size();
  std::vector<double> out(n, 0.5);
  if (n <= 1) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  for (std::size_t r = 0; r < n; ++r) out[order[r]] = static_cast<double>(r) / static_cast<double>(n - 1);
  return out;
}

namespace detail {

inline std::string trim(std::string s) {
  auto issp = [](unsigned char ch) { return std::isspace(ch) != 0; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && issp(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno == 0 && std::isfinite(out);
}

}  // namespace detail

/// Parses a `sequence,score[,strand]` CSV stream into an Environment.
inline Environment parse_dataset(std::istream& in, std::size_t batch_size, bool normalize,
                                 const Alphabet& alphabet = Alphabet::dna()) {
  std::string line;
  std::size_t row = 0;
  if (!std::getline(in, line)) throw Error(Errc::ParseError, "row 1: missing header");
  ++row;
  auto header = detail::split_csv_line(line);
  if (!header.empty() && header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
    header[0] = header[0].substr(3);
  const bool with_strand = header.size() == 3 && header[2] == "strand";
  if (header.size() < 2 || header[0] != "sequence" || header[1] != "score" ||
      (header.size() == 3 && !with_strand) || header.size() > 3)
    throw Error(Errc::ParseError, "row 1: expected header 'sequence,score[,strand]'");

  std::vector<Sequence> seqs;
  std::vector<double> scores;
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cols = detail::split_csv_line(line);
    if (cols.size() != header.size())
      throw Error(Errc::ParseError, "row " + std::to_string(row) + ": expected " +
                                        std::to_string(header.size()) + " columns");
    Sequence seq;
    seq.residues = cols[0];
    for (char& ch : seq.residues) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (seq.residues.empty()) throw Error(Errc::ParseError, "row " + std::to_string(row) + ": empty sequence");
    for (char ch : seq.residues)
      if (!alphabet.contains(ch))
        throw Error(Errc::AlphabetMismatch,
                    "row " + std::to_string(row) + ": symbol '" + std::string(1, ch) + "' not in alphabet");
    double score = 0.0;
    if (!detail::parse_double(cols[1], score))
      throw Error(Errc::ParseError, "row " + std::to_string(row) + ": bad score '" + cols[1] + "'");
    if (with_strand) {
      if (cols[2] == "+") seq.strand = Strand::Plus;
      else if (cols[2] == "-") seq.strand = Strand::Minus;
      else throw Error(Errc::ParseError, "row " + std::to_string(row) + ": strand must be + or -");
    }
    if (!normalize && !(score >= 0.0 && score <= 1.0))
      throw Error(Errc::LabelRange, "row " + std::to_string(row) + ": score outside [0,1]");
    // First occurrence wins; later duplicates are dropped before normalizing.
    if (!seen.emplace(sequence_key(seq), seqs.size()).second) continue;
    seqs.push_back(std::move(seq));
    scores.push_back(score);
  }
  if (seqs.empty()) throw Error(Errc::EmptyPool, "dataset has no rows");
  std::vector<double> labels = normalize ? rank_normalize(scores) : scores;
  return validate_environment(alphabet, seqs, labels, batch_size);
}

inline Environment load_dataset_env(const std::string& path, std::size_t batch_size, bool normalize,
                                    const Alphabet& alphabet = Alphabet::dna()) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open dataset '" + path + "'");
  return parse_dataset(in, batch_size, normalize, alphabet);
}

// ---------------------------------------------------------------------------
// Environment files (JSON)

struct EnvironmentBundle {
  Environment env;
  std::optional<ClusterGroundTruth> truth;
  std::optional<ClusterEnvConfig> config;
};

inline nlohmann::json config_to_json(const ClusterEnvConfig& c) {
  return {{"clusters", c.clusters}, {"per_cluster", c.per_cluster}, {"sigma", c.sigma}, {"c", c.c},
          {"length", c.length},     {"seed", c.seed},               {"batch_size", c.batch_size}};
}

inline ClusterEnvConfig config_from_json(const nlohmann::json& j) {
  ClusterEnvConfig c;
  c.clusters = j.value("clusters", c.clusters);
  c.per_cluster = j.value("per_cluster", c.per_cluster);
  c.sigma = j.value("sigma", c.sigma);
  c.c = j.value("c", c.c);
  c.length = j.value("length", c.length);
  c.seed = j.value("seed", c.seed);
  c.batch_size = j.value("batch_size", c.batch_size);
  return c;
}

inline nlohmann::json environment_to_json(const Environment& env, const ClusterGroundTruth* truth = nullptr,
                                          const ClusterEnvConfig* cfg = nullptr) {
  nlohmann::json j;
  j["format"] = "hbbs-environment";
  j["version"] = 1;
  j["alphabet"] = env.pool().alphabet().symbols();
  j["batch_size"] = env.batch_size();
  auto& seqs = j["sequences"] = nlohmann::json::array();
  for (const auto& s : env.pool().sequences()) seqs.push_back(s.residues);
  if (env.pool().has_strand()) {
    std::string strands;
    for (const auto& s : env.pool().sequences()) strands.push_back(static_cast<char>(*s.strand));
    j["strands"] = strands;
  }
  j["labels"] = env.labels();
  if (cfg) {
    j["config"] = config_to_json(*cfg);
    j["seed"] = cfg->seed;
  }
  if (truth) {
    auto& gt = j["ground_truth"];
    gt["cluster_of"] = truth->cluster_of;
    auto& cl = gt["clusters"] = nlohmann::json::array();
    for (const auto& c : truth->clusters) {
      nlohmann::json pos = nlohmann::json::array();
      for (const auto& v : c.positions) pos.push_back(v);
      cl.push_back({{"mean", c.mean}, {"spread", c.spread}, {"positions", std::move(pos)}});
    }
  }
  return j;
}

inline EnvironmentBundle environment_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != "hbbs-environment")
      throw Error(Errc::ParseError, "not an environment file");
    Alphabet alphabet(j.at("alphabet").get<std::string>());
    auto residues = j.at("sequences").get<std::vector<std::string>>();
    auto labels = j.at("labels").get<std::vector<double>>();
    std::string strands = j.value("strands", std::string());
    if (!strands.empty() && strands.size() != residues.size())
      throw Error(Errc::ParseError, "strand string length differs from sequence count");
    std::vector<Sequence> seqs(residues.size());
    for (std::size_t i = 0; i < residues.size(); ++i) {
      seqs[i].residues = std::move(residues[i]);
      if (!strands.empty()) seqs[i].strand = static_cast<Strand>(strands[i]);
    }
    EnvironmentBundle b;
    b.env = validate_environment(alphabet, seqs, labels, j.at("batch_size").get<std::size_t>());
    if (j.contains("config")) b.config = config_from_json(j["config"]);
    if (j.contains("ground_truth")) {
      ClusterGroundTruth gt;
      const auto& g = j["ground_truth"];
      gt.cluster_of = g.at("cluster_of").get<std::vector<std::size_t>>();
      for (const auto& c : g.at("clusters")) {
        ClusterTruth ct;
        ct.mean = c.at("mean").get<double>();
        ct.spread = c.at("spread").get<double>();
        for (const auto& v : c.at("positions")) ct.positions.push_back(v.get<BaseDistribution>());
        gt.clusters.push_back(std::move(ct));
      }
      b.truth = std::move(gt);
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("environment file: ") + e.what());
  }
}

inline void save_environment(const std::string& path, const Environment& env,
                             const ClusterGroundTruth* truth = nullptr, const ClusterEnvConfig* cfg = nullptr) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::ParseError, "cannot write '" + path + "'");
  out << environment_to_json(env, truth, cfg).dump() << '\n';
  if (!out) throw Error(Errc::ParseError, "write failed for '" + path + "'");
}

inline EnvironmentBundle load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open environment file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, "environment file '" + path + "': " + e.what());
  }
  return environment_from_json(j);
}

}  // namespace hbbs
