#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hbbs {

enum class Errc {
  EmptyPool,
  UnequalLengths,
  LabelRange,
  BatchTooLarge,
  DuplicateSelection,
  OutOfPool,
  AlphabetMismatch,
  ConfigInvalid,
  ParseError,
  DegenerateDraw,
  EmptyLog,
  ShapeMismatch,
  KExceedsPoints,
  SingularKernel,
  InsufficientUnobserved,
  RhoDegenerate,
  SizeMismatch,
  NegativeStep,
  PoolExhausted,
  InsufficientTrials,
  NonpositiveTau,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::EmptyPool: return "EMPTY_POOL";
    case Errc::UnequalLengths: return "UNEQUAL_LENGTHS";
    case Errc::LabelRange: return "LABEL_RANGE";
    case Errc::BatchTooLarge: return "BATCH_TOO_LARGE";
    case Errc::DuplicateSelection: return "DUPLICATE_SELECTION";
    case Errc::OutOfPool: return "OUT_OF_POOL";
    case Errc::AlphabetMismatch: return "ALPHABET_MISMATCH";
    case Errc::ConfigInvalid: return "CONFIG_INVALID";
    case Errc::ParseError: return "PARSE_ERROR";
    case Errc::DegenerateDraw: return "DEGENERATE_DRAW";
    case Errc::EmptyLog: return "EMPTY_LOG";
    case Errc::ShapeMismatch: return "SHAPE_MISMATCH";
    case Errc::KExceedsPoints: return "K_EXCEEDS_POINTS";
    case Errc::SingularKernel: return "SINGULAR_KERNEL";
    case Errc::InsufficientUnobserved: return "INSUFFICIENT_UNOBSERVED";
    case Errc::RhoDegenerate: return "RHO_DEGENERATE";
    case Errc::SizeMismatch: return "SIZE_MISMATCH";
    case Errc::NegativeStep: return "NEGATIVE_STEP";
    case Errc::PoolExhausted: return "POOL_EXHAUSTED";
    case Errc::InsufficientTrials: return "INSUFFICIENT_TRIALS";
    case Errc::NonpositiveTau: return "NONPOSITIVE_TAU";
  }
  return "UNKNOWN";
}

/// Every failure in the library is reported through this type; `code()` is
/// stable and is what tests and the CLI branch on.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

using SeqIndex = std::size_t;

/// Ordered residue alphabet. Channel order of the one-hot encoding follows
/// the symbol order, so it must not change for the lifetime of a pool.
class Alphabet {
 public:
  Alphabet() = default;

  explicit Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
    if (symbols_.size() < 2) throw Error(Errc::ConfigInvalid, "alphabet needs at least 2 symbols");
    lookup_.fill(-1);
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      auto c = static_cast<unsigned char>(symbols_[i]);
      if (lookup_[c] != -1) throw Error(Errc::ConfigInvalid, "duplicate alphabet symbol");
      lookup_[c] = static_cast<int>(i);
    }
  }

  static Alphabet dna() { return Alphabet("ACGT"); }
  static Alphabet protein() { return Alphabet("ACDEFGHIKLMNPQRSTVWY"); }

  /// Resolves "dna", "protein", or a literal symbol string.
  static Alphabet from_name(std::string_view name) {
    if (name == "dna" || name == "DNA") return dna();
    if (name == "protein") return protein();
    return Alphabet(std::string(name));
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::string& symbols() const noexcept { return symbols_; }

  /// -1 when the character is not part of the alphabet.
  int index_of(char c) const noexcept { return lookup_[static_cast<unsigned char>(c)]; }
  bool contains(char c) const noexcept { return index_of(c) >= 0; }

  bool operator==(const Alphabet& o) const noexcept { return symbols_ == o.symbols_; }

 private:
  std::string symbols_;
  std::array<int, 256> lookup_{};
};

enum class Strand : char { Plus = '+', Minus = '-' };

struct Sequence {
  std::string residues;
  std::optional<Strand> strand;

  std::size_t length() const noexcept { return residues.size(); }
  bool operator==(const Sequence&) const = default;
};

class Environment;

/// Interned, deduplicated set of equal-length sequences.
class Pool {
 public:
  Pool() = default;

  const Alphabet& alphabet() const noexcept { return alphabet_; }
  std::size_t size() const noexcept { return seqs_.size(); }
  std::size_t length() const noexcept { return length_; }
  bool has_strand() const noexcept { return has_strand_; }
  const Sequence& operator[](SeqIndex i) const { return seqs_[i]; }
  const std::vector<Sequence>& sequences() const noexcept { return seqs_; }

 private:
  friend class Environment;
  friend Environment validate_environment(const Alphabet&, const std::vector<Sequence>&, const std::vector<double>&,
                                          std::size_t);
  Alphabet alphabet_;
  std::vector<Sequence> seqs_;
  std::size_t length_ = 0;
  bool has_strand_ = false;
};

/// The (S, f, M) triple. Immutable after construction; safe to share across
/// concurrent trials.
class Environment {
 public:
  Environment() = default;

  const Pool& pool() const noexcept { return pool_; }
  std::size_t size() const noexcept { return pool_.size(); }
  std::size_t batch_size() const noexcept { return batch_size_; }

  /// Ground-truth label. Agents never see this; only the harness, the
  /// observation path and test oracles read it.
  double label(SeqIndex i) const { return labels_.at(i); }
  const std::vector<double>& labels() const noexcept { return labels_; }

  /// Number of duplicate source rows collapsed at construction.
  std::size_t duplicates_dropped() const noexcept { return duplicates_dropped_; }

  /// Position of each source row in the deduplicated pool.
  const std::vector<SeqIndex>& source_to_pool() const noexcept { return source_to_pool_; }

  friend Environment validate_environment(const Alphabet&, const std::vector<Sequence>&,
                                          const std::vector<double>&, std::size_t);

 private:
  Pool pool_;
  std::vector<double> labels_;
  std::size_t batch_size_ = 0;
  std::size_t duplicates_dropped_ = 0;
  std::vector<SeqIndex> source_to_pool_;
};

inline std::string sequence_key(const Sequence& s) {
  std::string key = s.residues;
  if (s.strand) key.push_back(static_cast<char>(*s.strand));
  return key;
}

/// Builds an Environment. Duplicates keep the first label seen.
inline Environment validate_environment(const Alphabet& alphabet, const std::vector<Sequence>& seqs,
                                        const std::vector<double>& labels, std::size_t batch_size) {
  if (seqs.empty()) throw Error(Errc::EmptyPool, "pool is empty");
  if (labels.size() != seqs.size())
    throw Error(Errc::SizeMismatch, "label count differs from sequence count");
  if (batch_size == 0) throw Error(Errc::ConfigInvalid, "batch size must be positive");

  const std::size_t len = seqs.front().length();
  const bool stranded = seqs.front().strand.has_value();
  if (len == 0) throw Error(Errc::UnequalLengths, "sequences must be non-empty");
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i].length() != len)
      throw Error(Errc::UnequalLengths, "sequence " + std::to_string(i) + " has length " +
                                            std::to_string(seqs[i].length()) + ", expected " +
                                            std::to_string(len));
    if (seqs[i].strand.has_value() != stranded)
      throw Error(Errc::ConfigInvalid, "strand present on some sequences but not others");
    for (char c : seqs[i].residues)
      if (!alphabet.contains(c))
        throw Error(Errc::AlphabetMismatch,
                    "sequence " + std::to_string(i) + " has symbol '" + std::string(1, c) + "'");
    if (!(labels[i] >= 0.0 && labels[i] <= 1.0))
      throw Error(Errc::LabelRange, "label " + std::to_string(labels[i]) + " at row " +
                                        std::to_string(i) + " outside [0,1]");
  }

  Environment env;
  env.pool_.alphabet_ = alphabet;
  env.pool_.length_ = len;
  env.pool_.has_strand_ = stranded;
  env.source_to_pool_.reserve(seqs.size());
  std::unordered_map<std::string, SeqIndex> seen;
  seen.reserve(seqs.size() * 2);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto [it, inserted] = seen.emplace(sequence_key(seqs[i]), env.pool_.seqs_.size());
    if (inserted) {
      env.pool_.seqs_.push_back(seqs[i]);
      env.labels_.push_back(labels[i]);
    } else {
      ++env.duplicates_dropped_;
    }
    env.source_to_pool_.push_back(it->second);
  }
  if (batch_size > env.pool_.size())
    throw Error(Errc::BatchTooLarge, "batch size " + std::to_string(batch_size) +
                                         " exceeds pool size " + std::to_string(env.pool_.size()));
  env.batch_size_ = batch_size;
  return env;
}

struct Batch {
  std::vector<SeqIndex> selections;

  std::size_t size() const noexcept { return selections.size(); }
  bool operator==(const Batch&) const = default;
};

/// The observed set D_t. Value-like: observe() returns a new log.
class ObservationLog {
 public:
  ObservationLog() = default;
  explicit ObservationLog(std::size_t pool_size) : observed_(pool_size, 0) {}

  std::size_t pool_size() const noexcept { return observed_.size(); }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  std::size_t step() const noexcept { return step_; }
  std::size_t unobserved_count() const noexcept { return observed_.size() - indices_.size(); }

  bool contains(SeqIndex i) const { return i < observed_.size() && observed_[i] != 0; }

  const std::vector<SeqIndex>& indices() const noexcept { return indices_; }
  const std::vector<double>& labels() const noexcept { return labels_; }

  /// Unobserved pool indices in ascending order.
  std::vector<SeqIndex> unobserved() const {
    std::vector<SeqIndex> out;
    out.reserve(unobserved_count());
    for (SeqIndex i = 0; i < observed_.size(); ++i)
      if (!observed_[i]) out.push_back(i);
    return out;
  }

  friend ObservationLog observe(const Environment&, const ObservationLog&, const Batch&);
  friend ObservationLog seed_observations(const Environment&, const std::vector<SeqIndex>&);

 private:
  std::vector<char> observed_;
  std::vector<SeqIndex> indices_;
  std::vector<double> labels_;
  std::size_t step_ = 0;
};

/// Checks that a batch is drawn from the pool, is duplicate-free and is
/// disjoint from the log. Size is not checked here.
inline void check_batch(const ObservationLog& log, const Batch& batch) {
  std::vector<char> in_batch(log.pool_size(), 0);
  for (SeqIndex i : batch.selections) {
    if (i >= log.pool_size())
      throw Error(Errc::OutOfPool, "index " + std::to_string(i) + " is not in the pool");
    if (log.contains(i) || in_batch[i])
      throw Error(Errc::DuplicateSelection, "index " + std::to_string(i) + " already selected");
    in_batch[i] = 1;
  }
}

inline ObservationLog observe(const Environment& env, const ObservationLog& log, const Batch& batch) {
  if (log.pool_size() != env.size())
    throw Error(Errc::SizeMismatch, "log was created for a different pool");
  check_batch(log, batch);
  ObservationLog next = log;
  for (SeqIndex i : batch.selections) {
    next.observed_[i] = 1;
    next.indices_.push_back(i);
    next.labels_.push_back(env.label(i));
  }
  ++next.step_;
  return next;
}

/// D_0: observations present before the first agent action. Step stays 0.
inline ObservationLog seed_observations(const Environment& env, const std::vector<SeqIndex>& initial) {
  ObservationLog log(env.size());
  check_batch(log, Batch{initial});
  for (SeqIndex i : initial) {
    log.observed_[i] = 1;
    log.indices_.push_back(i);
    log.labels_.push_back(env.label(i));
  }
  return log;
}

}  // namespace hbbs
