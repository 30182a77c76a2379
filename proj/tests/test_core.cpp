#include <gtest/gtest.h>

#include "hbbs/core.hpp"
#include "hbbs/rng.hpp"

using namespace hbbs;

namespace {

std::vector<Sequence> seqs(std::initializer_list<const char*> s) {
  std::vector<Sequence> out;
  for (auto* r : s) out.push_back({r, std::nullopt});
  return out;
}

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::ParseError;
}

}  // namespace

TEST(Alphabet, DnaOrderAndLookup) {
  const auto a = Alphabet::dna();
  EXPECT_EQ(a.size(), 4u);
  EXPECT_EQ(a.index_of('A'), 0);
  EXPECT_EQ(a.index_of('T'), 3);
  EXPECT_FALSE(a.contains('Z'));
  EXPECT_EQ(Alphabet::protein().size(), 20u);
  EXPECT_EQ(code_of([] { Alphabet("AA"); }), Errc::ConfigInvalid);
  EXPECT_EQ(code_of([] { Alphabet("A"); }), Errc::ConfigInvalid);
}

TEST(Environment, AcceptsValidPool) {
  auto env = validate_environment(Alphabet::dna(), seqs({"ACGT", "AAAA", "CCCC"}), {0.1, 0.5, 0.9}, 2);
  EXPECT_EQ(env.size(), 3u);
  EXPECT_EQ(env.batch_size(), 2u);
  EXPECT_DOUBLE_EQ(env.label(2), 0.9);
}

TEST(Environment, RejectsInvalidInput) {
  EXPECT_EQ(code_of([] { validate_environment(Alphabet::dna(), seqs({"ACGT", "ACGTA"}), {0.1, 0.2}, 1); }),
            Errc::UnequalLengths);
  EXPECT_EQ(code_of([] { validate_environment(Alphabet::dna(), seqs({"AC", "CA", "GG"}), {0.1, 0.2, 0.3}, 4); }),
            Errc::BatchTooLarge);
  EXPECT_EQ(code_of([] { validate_environment(Alphabet::dna(), {}, {}, 1); }), Errc::EmptyPool);
  EXPECT_EQ(code_of([] { validate_environment(Alphabet::dna(), seqs({"AZ"}), {0.1}, 1); }), Errc::AlphabetMismatch);
  EXPECT_EQ(code_of([] { validate_environment(Alphabet::dna(), seqs({"AC"}), {1.5}, 1); }), Errc::LabelRange);
}

TEST(Environment, DuplicatesKeepFirstLabel) {
  auto env = validate_environment(Alphabet::dna(), seqs({"AC", "GT", "AC"}), {0.2, 0.4, 0.9}, 1);
  EXPECT_EQ(env.size(), 2u);
  EXPECT_EQ(env.duplicates_dropped(), 1u);
  EXPECT_DOUBLE_EQ(env.label(0), 0.2);
  EXPECT_EQ(env.source_to_pool()[2], 0u);
}

TEST(Environment, StrandDistinguishesSequences) {
  std::vector<Sequence> s{{"AC", Strand::Plus}, {"AC", Strand::Minus}};
  auto env = validate_environment(Alphabet::dna(), s, {0.2, 0.4}, 1);
  EXPECT_EQ(env.size(), 2u);
  EXPECT_TRUE(env.pool().has_strand());
}

TEST(Observe, AppendsLabelsAndStep) {
  auto env = validate_environment(Alphabet::dna(), seqs({"AA", "AC", "AG", "AT", "CA", "CC"}),
                                  {0.0, 0.1, 0.3, 0.2, 0.5, 0.7}, 2);
  ObservationLog log(env.size());
  auto next = observe(env, log, Batch{{2, 5}});
  EXPECT_EQ(next.step(), 1u);
  EXPECT_EQ(next.indices(), (std::vector<SeqIndex>{2, 5}));
  EXPECT_EQ(next.labels(), (std::vector<double>{0.3, 0.7}));
  EXPECT_EQ(log.size(), 0u);  // value semantics
  EXPECT_EQ(code_of([&] { observe(env, next, Batch{{2, 0}}); }), Errc::DuplicateSelection);
  EXPECT_EQ(code_of([&] { observe(env, next, Batch{{0, 0}}); }), Errc::DuplicateSelection);
  EXPECT_EQ(code_of([&] { observe(env, next, Batch{{0, 9}}); }), Errc::OutOfPool);
}

TEST(Observe, CardinalityGrowsByBatchSize) {
  std::vector<Sequence> s;
  std::vector<double> l;
  const std::string alpha = "ACGT";
  for (int i = 0; i < 64; ++i) {
    s.push_back({{alpha[i % 4], alpha[(i / 4) % 4], alpha[i / 16]}, std::nullopt});
    l.push_back(i / 64.0);
  }
  auto env = validate_environment(Alphabet::dna(), s, l, 4);
  ObservationLog log(env.size());
  for (std::size_t t = 0; t < 5; ++t) {
    Batch b;
    for (std::size_t j = 0; j < 4; ++j) b.selections.push_back(t * 4 + j);
    log = observe(env, log, b);
    EXPECT_EQ(log.size(), (t + 1) * 4);
    EXPECT_EQ(log.step(), t + 1);
  }
  for (std::size_t e = 0; e < log.size(); ++e) EXPECT_EQ(log.labels()[e], env.label(log.indices()[e]));
}

TEST(Rng, DeriveSeedIsDeterministicAndSpreads) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  Rng rng(4);
  auto s = sample_without_replacement(v, 20, rng);
  std::sort(s.begin(), s.end());
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
  EXPECT_EQ(s.size(), 20u);
}
