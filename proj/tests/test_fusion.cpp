#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "actauth/fusion.hpp"

using namespace actauth;

TEST(FusionWeights, PaperValues) {
  DetectorStats s{Modality::Text, 0.1, 0.05};
  EXPECT_NEAR(weight_for(s, Decision::Accept), std::log(9.5), 1e-12);
  EXPECT_NEAR(weight_for(s, Decision::Reject), std::log(18.0), 1e-12);
  EXPECT_THROW(weight_for(s, Decision::Abstain), ContractViolation);
}

TEST(FusionWeights, ClampedAtFloor) {
  DetectorStats perfect{Modality::App, 0.0, 0.0};
  EXPECT_NEAR(weight_for(perfect, Decision::Accept), std::log((1 - 1e-4) / 1e-4), 1e-12);
  EXPECT_NEAR(weight_for(perfect, Decision::Reject), std::log((1 - 1e-4) / 1e-4), 1e-12);
}

TEST(Fusion, WorkedExample) {
  std::vector<LocalVote> votes = {{{Modality::Text, 0.1, 0.05}, Decision::Accept},
                                  {{Modality::App, 0.2, 0.1}, Decision::Reject},
                                  {{Modality::Web, 0.3, 0.3}, Decision::Abstain}};
  const double expected = std::log(9.5) - std::log(0.8 / 0.1);
  auto g = fuse(votes, 0.0);
  EXPECT_NEAR(g.score, expected, 1e-12);
  EXPECT_EQ(g.u, expected > 0 ? Decision::Accept : Decision::Reject);
  EXPECT_EQ(g.contributing.size(), 2u);
  auto shifted = fuse(votes, -1.0);
  EXPECT_NEAR(shifted.score, expected - 1.0, 1e-12);
  EXPECT_EQ(shifted.u, Decision::Reject);
}

TEST(Fusion, AllAbstainAndTies) {
  std::vector<LocalVote> none = {{{Modality::Text, 0.1, 0.1}, Decision::Abstain}};
  EXPECT_EQ(fuse(none, 5.0).u, Decision::Abstain);
  EXPECT_FALSE(vote_sum(none).has_value());
  std::vector<LocalVote> one = {{{Modality::Text, 0.1, 0.1}, Decision::Accept}};
  const double w = std::log(0.9 / 0.1);
  EXPECT_EQ(fuse(one, -w).u, Decision::Reject);
  EXPECT_NEAR(prior_term(0.5, 0.5), 0.0, 1e-15);
}

TEST(Fusion, MatchesBruteForceBayes) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rate(0.01, 0.4), prior(0.2, 0.8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 5;
    std::vector<DetectorStats> stats;
    for (std::size_t i = 0; i < n; ++i) stats.push_back({Modality::Text, rate(rng), rate(rng)});
    const double p1 = prior(rng);
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<LocalVote> votes;
      double l1 = p1, l0 = 1 - p1;
      for (std::size_t i = 0; i < n; ++i) {
        const bool acc = mask & (1u << i);
        votes.push_back({stats[i], acc ? Decision::Accept : Decision::Reject});
        l1 *= acc ? 1 - stats[i].p_m : stats[i].p_m;
        l0 *= acc ? stats[i].p_f : 1 - stats[i].p_f;
      }
      if (std::abs(l1 - l0) < 1e-12 * (l1 + l0)) continue;
      EXPECT_EQ(fuse(votes, prior_term(p1, 1 - p1)).u, l1 > l0 ? Decision::Accept : Decision::Reject);
    }
  }
}

TEST(FusionAuthenticate, SilentDetectorsSkipped) {
  UserModels models;
  models.text = train_text(U"hello world", 4);
  std::vector<RawEvent> ev;
  const std::string s = "hello";
  for (std::size_t i = 0; i < s.size(); ++i) ev.push_back({"u", static_cast<Seconds>(i), Modality::Text, s.substr(i, 1)});
  auto tl = compress_idle(ev);
  std::array<std::optional<DetectorStats>, kModalityCount> stats{};
  stats[0] = DetectorStats{Modality::Text, 0.1, 0.05};
  stats[1] = DetectorStats{Modality::App, 0.1, 0.05};
  auto r = authenticate(tl, 4, 60, models, stats, 0.0);
  EXPECT_EQ(r.locals[0], Decision::Accept);
  EXPECT_EQ(r.locals[1], Decision::Abstain);
  EXPECT_EQ(r.global.u, Decision::Accept);
  EXPECT_NEAR(r.global.score, std::log(9.5), 1e-12);
}

TEST(FusionTrace, Format) {
  TraceRecord r;
  r.user = "a";
  r.source = "b";
  r.experiment = 2;
  r.omega = 60;
  r.t_now = 120;
  r.locals = {Decision::Accept, Decision::Abstain, Decision::Reject, Decision::Abstain};
  r.weights = {1.5, 0, 2.25, 0};
  r.score = -0.75;
  r.global = Decision::Reject;
  EXPECT_EQ(format_trace(r), "2\ta\tb\t60\t120\t+1:1.500000\t-\t-1:2.250000\t-\t-0.750000\t-1");
}
