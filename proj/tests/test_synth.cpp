#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include "actauth/evaluation.hpp"
#include "actauth/synth.hpp"

using namespace actauth;

namespace {

synth::SynthConfig config(std::size_t users, double hours, double overlap, std::uint64_t seed = 7) {
  synth::SynthConfig c;
  c.n_users = users;
  c.active_hours = hours;
  c.overlap = overlap;
  c.seed = seed;
  return c;
}

std::string serialize(const synth::Population& p) {
  std::ostringstream out;
  write_log(out, synth::merged_log(p));
  return out.str();
}

double jaccard_top20(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> x(a.begin(), a.begin() + std::min<std::size_t>(20, a.size()));
  std::set<std::string> y(b.begin(), b.begin() + std::min<std::size_t>(20, b.size()));
  std::size_t inter = 0;
  for (const auto& s : x) inter += y.count(s);
  return static_cast<double>(inter) / static_cast<double>(x.size() + y.size() - inter);
}

}  // namespace

TEST(Synth, SameSeedSameBytes) {
  auto a = synth::generate_population(config(4, 6, 0.3));
  auto b = synth::generate_population(config(4, 6, 0.3));
  EXPECT_EQ(serialize(a), serialize(b));
  auto c = synth::generate_population(config(4, 6, 0.3, 8));
  EXPECT_NE(serialize(a), serialize(c));
}

TEST(Synth, RatesWithinTwentyPercent) {
  auto pop = synth::generate_population(config(20, 72, 0.0));
  std::array<double, kModalityCount> mean{};
  for (std::size_t u = 0; u < pop.users.size(); ++u) {
    auto tl = compress_idle(pop.events[u]);
    const double hours = static_cast<double>(tl.total_active_duration()) / 3600.0;
    for (auto m : kAllModalities) {
      const double rate = static_cast<double>(tl.positions(m).size()) / hours;
      const double target = synth::kPaperRates[index_of(m)];
      mean[index_of(m)] += rate / static_cast<double>(pop.users.size());
      // GPS episodes are too few per user for a per-user bound on LOCATION.
      if (m != Modality::Location) {
        EXPECT_NEAR(rate, target, 0.2 * target) << pop.users[u].user_id << " " << to_string(m);
      }
    }
  }
  for (auto m : kAllModalities) {
    const double target = synth::kPaperRates[index_of(m)];
    EXPECT_NEAR(mean[index_of(m)], target, 0.2 * target) << to_string(m);
  }
}

TEST(Synth, DistinctAnchorsBarelyOverlap) {
  auto pop = synth::generate_population(config(2, 72, 0.0));
  for (std::size_t u = 0; u < 2; ++u) {
    const auto other = synth::effective_anchors(pop, 1 - u);
    std::size_t fixes = 0, inside = 0;
    for (const auto& e : pop.events[u]) {
      if (e.modality != Modality::Location) continue;
      ++fixes;
      for (const auto& a : other) {
        const double d = std::hypot(e.location().lat - a.center.lat, e.location().lon - a.center.lon);
        if (d <= 3 * a.sigma) {
          ++inside;
          break;
        }
      }
    }
    ASSERT_GT(fixes, 0u);
    EXPECT_LT(static_cast<double>(inside) / static_cast<double>(fixes), 0.05);
  }
  const auto a = synth::effective_anchors(pop, 0), b = synth::effective_anchors(pop, 1);
  for (const auto& x : a) {
    for (const auto& y : b) {
      EXPECT_GE(std::hypot(x.center.lat - y.center.lat, x.center.lon - y.center.lon), 0.02);
    }
  }
}

TEST(Synth, OverlapZeroDisjointVocabularies) {
  auto pop = synth::generate_population(config(6, 2, 0.0));
  for (std::size_t u = 0; u < 6; ++u) {
    for (std::size_t v = u + 1; v < 6; ++v) {
      EXPECT_EQ(jaccard_top20(synth::effective_app_vocab(pop, u), synth::effective_app_vocab(pop, v)), 0.0);
      EXPECT_EQ(jaccard_top20(synth::effective_web_vocab(pop, u), synth::effective_web_vocab(pop, v)), 0.0);
    }
  }
}

TEST(Synth, OverlapHalfIntermediateJaccard) {
  auto base = synth::generate_population(config(6, 2, 0.0));
  auto pop = synth::overlap_knob(base, 0.5);
  for (std::size_t u = 0; u < 6; ++u) {
    for (std::size_t v = u + 1; v < 6; ++v) {
      const double j = jaccard_top20(synth::effective_app_vocab(pop, u), synth::effective_app_vocab(pop, v));
      EXPECT_GT(j, 0.2);
      EXPECT_LT(j, 0.8);
    }
  }
}

TEST(Synth, OverlapOneIdenticalProfiles) {
  auto pop = synth::overlap_knob(synth::generate_population(config(3, 2, 0.0)), 1.0);
  EXPECT_EQ(synth::effective_app_vocab(pop, 0), synth::effective_app_vocab(pop, 1));
  EXPECT_EQ(synth::effective_web_vocab(pop, 0), synth::effective_web_vocab(pop, 2));
  EXPECT_THROW(synth::overlap_knob(pop, 1.5), std::invalid_argument);
}

TEST(Synth, OverlapOneForcesChanceCharacterization) {
  auto pop = synth::generate_population(config(6, 24, 1.0, 11));
  std::map<std::string, std::vector<RawEvent>> users;
  for (std::size_t u = 0; u < pop.users.size(); ++u) users[pop.users[u].user_id] = pop.events[u];
  eval::EvalConfig c;
  c.windows = {300};
  c.trace_windows = {};
  auto report = eval::evaluate(users, c);
  for (auto m : kAllModalities) {
    double far = 0, frr = 0;
    std::size_t n = 0;
    for (const auto& u : report.users) {
      for (const auto& x : u.by_window.at(300)) {
        const auto& e = x.characterization[index_of(m)];
        if (!e.supported()) continue;
        far += e.far;
        frr += e.frr;
        ++n;
      }
    }
    ASSERT_GT(n, 0u) << to_string(m);
    EXPECT_NEAR(far / static_cast<double>(n), 0.5, 0.1) << to_string(m);
    EXPECT_NEAR(frr / static_cast<double>(n), 0.5, 0.1) << to_string(m);
  }
}

TEST(Synth, LogRoundTrip) {
  auto pop = synth::generate_population(config(3, 3, 0.2));
  std::istringstream in(serialize(pop));
  auto data = ingest_log(in);
  EXPECT_TRUE(data.errors.empty());
  for (std::size_t u = 0; u < pop.users.size(); ++u) EXPECT_EQ(data.users.at(pop.users[u].user_id), pop.events[u]);
}

TEST(Synth, Preconditions) {
  EXPECT_THROW(synth::generate_population(config(1, 5, 0.0)), std::invalid_argument);
  EXPECT_THROW(synth::generate_population(config(3, 0, 0.0)), std::invalid_argument);
}
