#include <gtest/gtest.h>

#include <filesystem>

#include "hbbs/environments.hpp"
#include "hbbs/surrogate.hpp"

using namespace hbbs;

namespace {

Environment small_env(const std::vector<std::string>& residues, const std::vector<double>& labels) {
  std::vector<Sequence> s;
  for (const auto& r : residues) s.push_back({r, std::nullopt});
  return validate_environment(Alphabet::dna(), s, labels, 1);
}

ObservationLog observe_all(const Environment& env) {
  std::vector<SeqIndex> all(env.size());
  std::iota(all.begin(), all.end(), SeqIndex{0});
  return seed_observations(env, all);
}

double recon_loss(const SurrogateNetwork& net, std::span<const double> p, const std::vector<OneHotMatrix>& xs) {
  auto ws = net.make_workspace();
  double total = 0.0;
  for (const auto& x : xs) {
    net.forward(p, x.data, ws);
    for (std::size_t j = 0; j < ws.hidden.size(); ++j)
      total += (ws.recon[j] - ws.hidden[j]) * (ws.recon[j] - ws.hidden[j]) / static_cast<double>(ws.hidden.size());
  }
  return total / static_cast<double>(xs.size());
}

}  // namespace

TEST(OneHot, IdentityForACGT) {
  auto m = one_hot_encode({"ACGT", std::nullopt}, Alphabet::dna());
  ASSERT_EQ(m.channels, 4u);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(m.at(c, p), c == p ? 1.0 : 0.0);
}

TEST(OneHot, RepeatedSymbolAndProtein) {
  auto m = one_hot_encode({"AAAA", std::nullopt}, Alphabet::dna());
  for (std::size_t p = 0; p < 4; ++p) {
    EXPECT_EQ(m.at(0, p), 1.0);
    for (std::size_t c = 1; c < 4; ++c) EXPECT_EQ(m.at(c, p), 0.0);
  }
  const auto prot = Alphabet::protein();
  auto q = one_hot_encode({"MA", std::nullopt}, prot);
  EXPECT_EQ(q.at(static_cast<std::size_t>(prot.index_of('M')), 0), 1.0);
}

TEST(OneHot, DecodeRoundTrip) {
  Rng rng(1);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int t = 0; t < 50; ++t) {
    Sequence s;
    for (int i = 0; i < 17; ++i) s.residues.push_back("ACGT"[pick(rng)]);
    s.strand = t % 2 ? Strand::Plus : Strand::Minus;
    EXPECT_EQ(decode_one_hot(one_hot_encode(s, Alphabet::dna(), true), Alphabet::dna(), true), s);
  }
  EXPECT_THROW(one_hot_encode({"AXA", std::nullopt}, Alphabet::dna()), Error);
}

namespace {

// Norm-wise relative error between analytic and central-difference gradients.
// In detached mode the feature parameters only see the prediction loss.
double gradient_error(bool joint) {
  SurrogateConfig cfg;
  cfg.conv_layers = {{3, 3}, {2, 5}};
  cfg.dense_hidden = 4;
  cfg.embedding_dim = 2;
  cfg.autoencoder_shapes_features = joint;
  SurrogateNetwork net(5, 6, cfg);
  std::vector<OneHotMatrix> xs{one_hot_encode({"ACGTAC", Strand::Plus}, Alphabet::dna(), true),
                               one_hot_encode({"TTGCAA", Strand::Minus}, Alphabet::dna(), true),
                               one_hot_encode({"GGGCAT", Strand::Plus}, Alphabet::dna(), true)};
  std::vector<const OneHotMatrix*> ptrs{&xs[0], &xs[1], &xs[2]};
  const std::vector<double> y{0.2, 0.9, 0.5};
  auto p = net.initial_parameters(11);
  // Nonzero biases exercise every parameter.
  Rng rng(2);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (double& v : p) v += u(rng);
  std::vector<double> g(p.size());
  net.loss_and_gradient(p, ptrs, y, g);
  const double h = 1e-6;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool full = joint || i >= net.autoencoder_offset();
    auto f = [&](const std::vector<double>& q) { return full ? net.loss(q, ptrs, y) : net.prediction_loss(q, ptrs, y); };
    auto q = p;
    q[i] += h;
    const double lp = f(q);
    q[i] -= 2 * h;
    const double lm = f(q);
    const double fd = (lp - lm) / (2 * h);
    num += (g[i] - fd) * (g[i] - fd);
    den += g[i] * g[i] + fd * fd;
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST(Surrogate, GradientMatchesFiniteDifferences) { EXPECT_LT(gradient_error(true), 1e-4); }

TEST(Surrogate, DetachedGradientMatchesFiniteDifferences) { EXPECT_LT(gradient_error(false), 1e-4); }

TEST(Surrogate, ConstantLabelsLearned) {
  std::vector<std::string> r;
  Rng rng(8);
  std::uniform_int_distribution<int> pick(0, 3);
  while (r.size() < 50) {
    std::string s;
    for (int i = 0; i < 12; ++i) s.push_back("ACGT"[pick(rng)]);
    r.push_back(s);
  }
  auto env = small_env(r, std::vector<double>(50, 0.7));
  SurrogateConfig cfg;
  cfg.conv_layers = {{8, 5}};
  cfg.dense_hidden = 16;
  cfg.epochs = 2000;
  auto model = fit_surrogate(env.pool(), observe_all(env), cfg);
  auto ev = model.evaluate(env.pool());
  const double mean = std::accumulate(ev.predictions.begin(), ev.predictions.end(), 0.0) / 50.0;
  EXPECT_NEAR(mean, 0.7, 0.05);
}

TEST(Surrogate, Deterministic) {
  ClusterEnvConfig c;
  c.clusters = 2;
  c.per_cluster = 30;
  c.length = 15;
  c.batch_size = 5;
  auto g = generate_cluster_env(c);
  SurrogateConfig cfg;
  cfg.conv_layers = {{4, 3}};
  cfg.dense_hidden = 8;
  cfg.epochs = 3;
  cfg.seed = 21;
  auto log = observe_all(g.env);
  auto a = fit_surrogate(g.env.pool(), log, cfg), b = fit_surrogate(g.env.pool(), log, cfg);
  EXPECT_EQ(a.parameters(), b.parameters());
  const auto& s = g.env.pool()[0];
  EXPECT_EQ(a.predict(s), a.predict(Sequence(s)));
  EXPECT_EQ(a.embed(s), b.embed(s));
  EXPECT_EQ(a.embed(s).size(), 5u);
  EXPECT_TRUE(std::isfinite(a.predict(s)));
  cfg.seed = 22;
  EXPECT_NE(fit_surrogate(g.env.pool(), log, cfg).parameters(), a.parameters());
}

TEST(Surrogate, SeparatesTwoSequences) {
  auto env = small_env({"AAAAAAAA", "CCCCCCCC"}, {0.1, 0.9});
  SurrogateConfig cfg;
  cfg.conv_layers = {{4, 3}};
  cfg.dense_hidden = 8;
  cfg.epochs = 2000;
  cfg.learning_rate = 1e-2;
  auto model = fit_surrogate(env.pool(), observe_all(env), cfg);
  EXPECT_LT(model.predict(env.pool()[0]), model.predict(env.pool()[1]));
  EXPECT_LE(model.loss_trace().back(), model.loss_trace().front());
}

TEST(Surrogate, LossAndReconstructionDecrease) {
  ClusterEnvConfig c;
  c.clusters = 3;
  c.per_cluster = 60;
  c.length = 20;
  c.batch_size = 5;
  c.seed = 3;
  auto g = generate_cluster_env(c);
  SurrogateConfig cfg;
  cfg.conv_layers = {{8, 5}};
  cfg.dense_hidden = 16;
  auto log = observe_all(g.env);
  auto model = fit_surrogate(g.env.pool(), log, cfg);
  EXPECT_LE(model.loss_trace().back(), model.loss_trace().front());
  std::vector<OneHotMatrix> xs;
  for (SeqIndex i : log.indices()) xs.push_back(one_hot_encode(g.env.pool()[i], Alphabet::dna()));
  const auto init = model.network().initial_parameters(derive_seed(cfg.seed, 1));
  EXPECT_LE(recon_loss(model.network(), model.parameters(), xs), recon_loss(model.network(), init, xs));
}

TEST(Surrogate, EmbeddingSeparatesClusters) {
  ClusterEnvConfig c;
  c.clusters = 2;
  c.per_cluster = 150;
  c.length = 30;
  c.c = 0.2;
  c.batch_size = 5;
  c.seed = 17;
  auto g = generate_cluster_env(c);
  SurrogateConfig cfg;
  cfg.conv_layers = {{8, 5}};
  cfg.dense_hidden = 16;
  auto log = observe_all(g.env);
  auto ev = fit_surrogate(g.env.pool(), log, cfg).evaluate(g.env.pool());
  double intra = 0, inter = 0;
  std::size_t ni = 0, nx = 0;
  for (SeqIndex i = 0; i < g.env.size(); ++i)
    for (SeqIndex j = i + 1; j < g.env.size(); ++j) {
      const double d = (ev.embeddings.row(static_cast<Eigen::Index>(i)) - ev.embeddings.row(static_cast<Eigen::Index>(j))).norm();
      if (g.truth.cluster_of[i] == g.truth.cluster_of[j]) {
        intra += d;
        ++ni;
      } else {
        inter += d;
        ++nx;
      }
    }
  EXPECT_GT(inter / static_cast<double>(nx), intra / static_cast<double>(ni));
}

TEST(Surrogate, RejectsMismatchedInputs) {
  auto env = small_env({"AAAA", "CCCC"}, {0.1, 0.9});
  SurrogateConfig cfg;
  cfg.conv_layers = {{2, 3}};
  cfg.dense_hidden = 4;
  cfg.epochs = 1;
  auto model = fit_surrogate(env.pool(), observe_all(env), cfg);
  EXPECT_THROW(model.predict({"AAAAA", std::nullopt}), Error);
  EXPECT_THROW(fit_surrogate(env.pool(), ObservationLog(env.size()), cfg), Error);
  cfg.learning_rate = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Surrogate, CheckpointRoundTrip) {
  auto env = small_env({"ACGA", "CCTC", "GATT"}, {0.1, 0.9, 0.4});
  SurrogateConfig cfg;
  cfg.conv_layers = {{2, 3}};
  cfg.dense_hidden = 4;
  cfg.epochs = 2;
  auto model = fit_surrogate(env.pool(), observe_all(env), cfg);
  auto p = std::filesystem::temp_directory_path() / "hbbs_test_ckpt.json";
  save_checkpoint(p.string(), model);
  auto back = load_checkpoint(p.string());
  EXPECT_EQ(back.parameters(), model.parameters());
  EXPECT_EQ(back.predict(env.pool()[2]), model.predict(env.pool()[2]));
  std::filesystem::remove(p);
}
