#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "actauth/evaluation.hpp"
#include "actauth/synth.hpp"

using namespace actauth;
using namespace actauth::eval;

namespace {

ActiveTimeline steady_timeline(Seconds duration, Seconds step) {
  std::vector<RawEvent> ev;
  for (Seconds t = 0; t <= duration; t += step) ev.push_back({"u", t, Modality::Text, std::string("a")});
  return compress_idle(ev);
}

std::map<std::string, std::vector<RawEvent>> small_population(double overlap, std::size_t users, double hours,
                                                              std::uint64_t seed = 3) {
  synth::SynthConfig c;
  c.n_users = users;
  c.active_hours = hours;
  c.seed = seed;
  c.overlap = overlap;
  auto pop = synth::generate_population(c);
  std::map<std::string, std::vector<RawEvent>> out;
  for (std::size_t u = 0; u < pop.users.size(); ++u) out[pop.users[u].user_id] = pop.events[u];
  return out;
}

EvalConfig quick_config() {
  EvalConfig c;
  c.windows = {60, 600, 1800};
  return c;
}

}  // namespace

TEST(Folds, HundredHoursSplitAtTwentyHourMarks) {
  auto tl = steady_timeline(360000, 300);
  auto plan = plan_folds(tl);
  const Seconds h = 3600;
  EXPECT_EQ(plan.bounds, (std::array<Seconds, 6>{0, 20 * h, 40 * h, 60 * h, 80 * h, 100 * h}));
  EXPECT_EQ(plan.fold_of(20 * h - 1), 0);
  EXPECT_EQ(plan.fold_of(20 * h), 1);
  EXPECT_EQ(plan.fold_of(100 * h), 4);
  EXPECT_EQ(plan.fold_of(100 * h + 1), -1);
}

TEST(Folds, InsufficientActivity) {
  std::vector<RawEvent> ev = {{"u", 0, Modality::Text, std::string("a")}, {"u", 1, Modality::Text, std::string("b")}};
  EXPECT_THROW(plan_folds(compress_idle(ev)), InsufficientActivity);
}

TEST(Folds, RotationMatchesSchedule) {
  // 1-based folds: experiment 2 trains on {2,3,4}, characterizes on 5, tests on 1.
  auto r = rotation(1);
  EXPECT_EQ(r.train, (std::array<int, 3>{1, 2, 3}));
  EXPECT_EQ(r.characterize, 4);
  EXPECT_EQ(r.test, 0);
  std::multiset<int> tests, chars;
  for (int e = 0; e < kExperiments; ++e) {
    auto x = rotation(e);
    tests.insert(x.test);
    chars.insert(x.characterize);
    std::set<int> all(x.train.begin(), x.train.end());
    all.insert(x.characterize);
    all.insert(x.test);
    EXPECT_EQ(all.size(), 5u);
  }
  for (int f = 0; f < kFolds; ++f) {
    EXPECT_EQ(tests.count(f), 1u);
    EXPECT_EQ(chars.count(f), 1u);
  }
  EXPECT_THROW(rotation(5), std::out_of_range);
}

TEST(Folds, PartitionWithoutLeakage) {
  std::mt19937_64 rng(1);
  std::vector<RawEvent> ev;
  Seconds t = 0;
  for (int i = 0; i < 5000; ++i) {
    t += static_cast<Seconds>(rng() % 400);
    ev.push_back({"u", t, Modality::Text, std::string("a")});
  }
  auto tl = compress_idle(ev);
  auto plan = plan_folds(tl);
  for (int e = 0; e < kExperiments; ++e) {
    auto r = rotation(e);
    std::set<const TimedEvent*> seen;
    std::size_t total = 0;
    std::vector<int> folds(r.train.begin(), r.train.end());
    folds.push_back(r.characterize);
    folds.push_back(r.test);
    for (int f : folds) {
      auto s = plan.slice(tl, f);
      for (const auto& te : s.events()) {
        EXPECT_EQ(plan.fold_of(te.active_time), f);
      }
      total += s.size();
    }
    EXPECT_EQ(total, tl.size());
  }
}

TEST(Errors, CountingExcludesAbstentions) {
  std::vector<Decision> imp(7, Decision::Reject);
  imp.insert(imp.end(), 3, Decision::Accept);
  imp.insert(imp.end(), 5, Decision::Abstain);
  std::vector<Decision> gen = {Decision::Accept, Decision::Reject, Decision::Abstain, Decision::Accept};
  auto e = estimate_errors(gen, imp);
  EXPECT_DOUBLE_EQ(e.far, 0.3);
  EXPECT_EQ(e.n_impostor, 10u);
  EXPECT_DOUBLE_EQ(e.frr, 1.0 / 3.0);
  EXPECT_TRUE(e.supported());
  std::vector<Decision> only_abstain = {Decision::Abstain};
  EXPECT_FALSE(estimate_errors(gen, only_abstain).supported());
  std::vector<Decision> accepts(4, Decision::Accept);
  auto acceptor = estimate_errors(accepts, accepts);
  EXPECT_DOUBLE_EQ(acceptor.far, 1.0);
  EXPECT_DOUBLE_EQ(acceptor.frr, 0.0);
}

TEST(Errors, DecisionPointsStrideOmega) {
  EXPECT_EQ(decision_points(100, 400, 100), (std::vector<Seconds>{200, 300, 400}));
  EXPECT_TRUE(decision_points(0, 50, 60).empty());
}

TEST(Threshold, EqualizesErrors) {
  std::vector<double> gen = {0.6, 0.7, 0.8, 0.9}, imp = {0.1, 0.2, 0.3, 0.65};
  const double theta = tune_threshold(gen, imp);
  // at 0.65 one genuine score falls below and one impostor score reaches it: FAR = FRR = 1/4
  EXPECT_DOUBLE_EQ(theta, 0.65);
  std::vector<double> sep_g = {0.8, 0.9}, sep_i = {0.1, 0.2};
  EXPECT_DOUBLE_EQ(tune_threshold(sep_g, sep_i), 0.8);
}

TEST(Contribution, HandComputedCases) {
  EXPECT_DOUBLE_EQ(*contribution(0.01, 0.02), 0.5);
  EXPECT_DOUBLE_EQ(*contribution(0.02, 0.01), -1.0);
  EXPECT_DOUBLE_EQ(*contribution(0.03, 0.03), 0.0);
  EXPECT_FALSE(contribution(0.0, 0.0).has_value());
}

TEST(Roc, ExtremesAndMonotone) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(2.0, 2.0), i(-2.0, 2.0);
  std::vector<double> gen, imp;
  for (int k = 0; k < 500; ++k) {
    gen.push_back(g(rng));
    imp.push_back(i(rng));
  }
  auto grid = make_grid(-40, 40, 0.05);
  EXPECT_EQ(grid.size(), 1601u);
  auto roc = roc_sweep(gen, imp, grid);
  EXPECT_DOUBLE_EQ(roc.front().far, 0.0);
  EXPECT_DOUBLE_EQ(roc.front().frr, 1.0);
  EXPECT_DOUBLE_EQ(roc.back().far, 1.0);
  EXPECT_DOUBLE_EQ(roc.back().frr, 0.0);
  for (std::size_t k = 1; k < roc.size(); ++k) {
    EXPECT_GE(roc[k].far, roc[k - 1].far);
    EXPECT_LE(roc[k].frr, roc[k - 1].frr);
  }
  auto eer = equal_error_rate(roc);
  ASSERT_TRUE(eer.has_value());
  EXPECT_EQ(eer->upper, eer->lower + 1);
  EXPECT_NEAR(eer->eer, 0.16, 0.04);
}

TEST(Roc, InterpolationBetweenStraddlingPoints) {
  std::vector<RocPoint> roc = {{-1, 0.0, 0.6}, {0, 0.2, 0.4}, {1, 0.6, 0.1}};
  auto e = equal_error_rate(roc);
  ASSERT_TRUE(e.has_value());
  // d goes -0.2 -> 0.5, t = 2/7; FAR = 0.2 + 0.4 * 2/7
  EXPECT_NEAR(e->eer, 0.2 + 0.4 * 2.0 / 7.0, 1e-15);
  EXPECT_EQ(e->lower, 1u);
  EXPECT_EQ(e->upper, 2u);
}

TEST(Roc, WeightedScoresMatchExpanded) {
  VariantScores w;
  w.genuine = {1.0, -0.5};
  w.genuine_weight = {3, 1};
  w.impostor = {-2.0, 0.5};
  w.impostor_weight = {2, 2};
  std::vector<double> gen = {1, 1, 1, -0.5}, imp = {-2, -2, 0.5, 0.5};
  auto grid = make_grid(-3, 3, 0.25);
  auto a = roc_sweep(w, grid);
  auto b = roc_sweep(gen, imp, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_DOUBLE_EQ(a[k].far, b[k].far);
    EXPECT_DOUBLE_EQ(a[k].frr, b[k].frr);
  }
  // ties reject: score exactly -a0 is not accepted
  std::vector<double> zero = {0.0}, none;
  std::vector<double> at = {0.0};
  EXPECT_DOUBLE_EQ(roc_sweep(zero, none, at)[0].frr, 1.0);
}

TEST(Patterns, EncodeDecodeAndVariants) {
  for (std::size_t p = 0; p < kPatternCount; ++p) EXPECT_EQ(encode_pattern(decode_pattern(p)), p);
  EXPECT_EQ(encode_pattern({Decision::Abstain, Decision::Abstain, Decision::Abstain, Decision::Abstain}), 0u);
  EXPECT_EQ(variant_mask(Variant::Full), 0xFu);
  EXPECT_EQ(variant_mask(without(Modality::Web)), 0xBu);
  EXPECT_EQ(variant_mask(only(Modality::Location)), 0x8u);
  EXPECT_EQ(variant_name(without(Modality::Text)), "without_TEXT");

  ExperimentOutcome x;
  x.in_fusion = {true, true, false, true};
  x.characterization[0].far = 0.1;
  x.characterization[0].frr = 0.05;
  x.characterization[1].far = 0.2;
  x.characterization[1].frr = 0.1;
  const auto p = encode_pattern({Decision::Accept, Decision::Reject, Decision::Accept, Decision::Abstain});
  EXPECT_NEAR(*x.variant_sum(p, 0xF), std::log(9.5) - std::log(8.0), 1e-12);
  EXPECT_FALSE(x.variant_sum(p, variant_mask(only(Modality::Web))).has_value());
}

TEST(Protocol, FiveVariantsAndLeaveOneOut) {
  auto report = evaluate(small_population(0.3, 5, 12), quick_config());
  ASSERT_EQ(report.windows.size(), 3u);
  for (const auto& w : report.windows) {
    std::size_t full_and_ablations = 0;
    for (const auto& v : w.variants) {
      const auto i = static_cast<int>(v.variant);
      if (i <= 4) ++full_and_ablations;
      for (std::size_t k = 1; k < v.roc.size(); ++k) {
        EXPECT_GE(v.roc[k].far, v.roc[k - 1].far);
        EXPECT_LE(v.roc[k].frr, v.roc[k - 1].frr);
      }
    }
    EXPECT_EQ(full_and_ablations, 5u);
    EXPECT_TRUE(w.variants[0].eer.has_value());
    EXPECT_EQ(w.users_in_roc, 5u);
  }
}

TEST(Protocol, KernelScoringMatchesReference) {
  auto users = small_population(0.3, 4, 10);
  auto fast = quick_config();
  auto ref = quick_config();
  ref.reference_windows = true;
  auto a = evaluate(users, fast);
  auto b = evaluate(users, ref);
  ASSERT_EQ(a.users.size(), b.users.size());
  for (std::size_t u = 0; u < a.users.size(); ++u) {
    for (const auto& [omega, exps] : a.users[u].by_window) {
      const auto& other = b.users[u].by_window.at(omega);
      for (int e = 0; e < kExperiments; ++e) {
        const auto& x = exps[static_cast<std::size_t>(e)];
        const auto& y = other[static_cast<std::size_t>(e)];
        EXPECT_EQ(x.windows, y.windows);
        EXPECT_EQ(x.theta, y.theta);
        for (std::size_t k = 0; k < kModalityCount; ++k) {
          EXPECT_EQ(x.characterization[k].far, y.characterization[k].far);
          EXPECT_EQ(x.characterization[k].frr, y.characterization[k].frr);
        }
      }
    }
  }
  EXPECT_EQ(a.traces, b.traces);
}

TEST(Protocol, ThreadCountDoesNotChangeResults) {
  auto users = small_population(0.3, 4, 8);
  auto one = quick_config();
  one.jobs = 1;
  auto three = quick_config();
  three.jobs = 3;
  auto a = evaluate(users, one);
  auto b = evaluate(users, three);
  for (std::size_t w = 0; w < a.windows.size(); ++w) {
    for (std::size_t v = 0; v < kVariantCount; ++v) {
      const auto& ea = a.windows[w].variants[v].eer;
      const auto& eb = b.windows[w].variants[v].eer;
      ASSERT_EQ(ea.has_value(), eb.has_value());
      if (ea) EXPECT_EQ(ea->eer, eb->eer);
    }
  }
  EXPECT_EQ(a.traces, b.traces);
  EXPECT_EQ(a.notes, b.notes);
}

TEST(Protocol, UserWithoutLocationFusesThree) {
  auto users = small_population(0.3, 4, 8);
  auto& first = users.begin()->second;
  first.erase(std::remove_if(first.begin(), first.end(),
                             [](const RawEvent& e) { return e.modality == Modality::Location; }),
              first.end());
  auto report = evaluate(users, quick_config());
  bool noted = false;
  for (const auto& n : report.notes) noted |= n.find(users.begin()->first) != std::string::npos &&
                                               n.find("LOCATION unsupported") != std::string::npos;
  EXPECT_TRUE(noted);
  const auto& u = report.users.front();
  for (const auto& [omega, exps] : u.by_window) {
    for (const auto& x : exps) {
      EXPECT_FALSE(x.in_fusion[index_of(Modality::Location)]);
      EXPECT_TRUE(x.in_fusion[index_of(Modality::Text)]);
    }
  }
  EXPECT_TRUE(report.windows[0].variants[0].eer.has_value());
}

TEST(Protocol, CommonBasisCounts) {
  auto report = evaluate(small_population(0.3, 3, 8), quick_config());
  const auto& u = report.users.front();
  const Seconds omega = 600;
  std::size_t voted = 0;
  for (const auto& x : u.by_window.at(omega)) {
    for (std::size_t p = 0; p < kPatternCount; ++p) {
      if (x.variant_sum(p, 0xF)) voted += x.windows[p][0] + x.windows[p][1];
    }
  }
  for (std::size_t v = 0; v < kVariantCount; ++v) {
    auto s = variant_scores(u, omega, static_cast<Variant>(v));
    std::size_t total = 0;
    for (auto w : s.genuine_weight) total += w;
    for (auto w : s.impostor_weight) total += w;
    EXPECT_EQ(total, voted);
  }
}

TEST(Protocol, LargerWindowsDoNotHurtIndividualDetectors) {
  EvalConfig c;
  c.windows = {60, 300, 1800};
  auto report = evaluate(small_population(0.3, 6, 24), c);
  for (std::size_t k = 0; k < kModalityCount; ++k) {
    for (std::size_t w = 1; w < report.windows.size(); ++w) {
      const auto& small = report.windows[w - 1].modality_errors[k];
      const auto& large = report.windows[w].modality_errors[k];
      EXPECT_LE((large.far_mean + large.frr_mean) / 2, (small.far_mean + small.frr_mean) / 2 + 0.02)
          << to_string(kAllModalities[k]) << " omega " << report.windows[w].omega;
    }
  }
}
