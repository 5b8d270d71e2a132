#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "actauth/entity_classifier.hpp"

using namespace actauth;

namespace {

ActiveTimeline app_timeline(const std::vector<std::string>& names) {
  std::vector<RawEvent> ev;
  for (std::size_t i = 0; i < names.size(); ++i) {
    ev.push_back({"u", static_cast<Seconds>(i), Modality::App, names[i]});
  }
  return compress_idle(ev);
}

}  // namespace

TEST(EntityExtract, HostsKeepSubdomains) {
  RawEvent m{"u", 0, Modality::Web, std::string("http://m.facebook.com/story.php?id=1")};
  RawEvent w{"u", 0, Modality::Web, std::string("https://www.facebook.com/")};
  RawEvent a{"u", 0, Modality::App, std::string("com.whatsapp")};
  EXPECT_EQ(extract_entity(m), "m.facebook.com");
  EXPECT_EQ(extract_entity(w), "www.facebook.com");
  EXPECT_EQ(extract_entity(a), "com.whatsapp");
  EXPECT_EQ(url_host("HTTPS://user:pw@Mail.Example.COM:8443/x"), "mail.example.com");
  EXPECT_EQ(url_host("example.org/path"), "example.org");
  EXPECT_THROW(url_host("http:///nohost"), std::invalid_argument);
  EXPECT_THROW(url_host("http://bad host/"), std::invalid_argument);
  RawEvent t{"u", 0, Modality::Text, std::string("a")};
  EXPECT_THROW(extract_entity(t), ContractViolation);
}

TEST(EntityTrain, Normalization) {
  auto m = train_entity(Modality::App, {{"a", 3}, {"b", 1}}, {{"a", 1}, {"b", 1}});
  ASSERT_EQ(m.degree(), 2u);
  EXPECT_EQ(m.entities(), (std::vector<std::string>{"a", "b"}));
  EXPECT_NEAR(m.p_valid()[0], 0.75, 1e-12);
  EXPECT_NEAR(m.p_valid()[1], 0.25, 1e-12);
}

TEST(EntityTrain, WorkedExampleKEqualsTwo) {
  auto m = train_entity(Modality::App, {{"a", 6}, {"b", 3}, {"c", 1}}, {{"a", 1}, {"b", 1}, {"c", 8}}, 2, 1e-6);
  EXPECT_EQ(m.entities(), (std::vector<std::string>{"a", "b"}));
  EXPECT_NEAR(m.p_valid()[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.p_valid()[1], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.p_invalid()[0], 0.5, 1e-12);
  EXPECT_NEAR(m.p_invalid()[1], 0.5, 1e-12);

  auto tl = app_timeline({"a", "c", "b", "a"});
  auto w = window_at(tl, 3, 10);
  const double expected = 2 * std::log((2.0 / 3.0) / 0.5) + std::log((1.0 / 3.0) / 0.5);
  EXPECT_NEAR(*window_log_ratio(m, w), expected, 1e-12);
  EXPECT_NEAR(expected, 0.170, 5e-4);
  EXPECT_EQ(window_decide_entity(m, w), Decision::Accept);
}

TEST(EntityTrain, ZeroImpostorCountFloored) {
  auto m = train_entity(Modality::App, {{"a", 5}, {"b", 5}}, {{"b", 4}}, 20, 1e-6);
  const auto ia = *m.find("a");
  const auto ib = *m.find("b");
  EXPECT_DOUBLE_EQ(m.p_invalid()[ia], 1e-6);
  EXPECT_NEAR(m.p_invalid()[ib], 1.0 - 1e-6, 1e-15);
  for (double p : m.p_valid()) EXPECT_GE(p, 1e-6);
}

TEST(EntityTrain, TopKTiesLexicographic) {
  auto m = train_entity(Modality::Web, {{"z", 2}, {"b", 2}, {"a", 2}, {"q", 1}}, {}, 2);
  EXPECT_EQ(m.entities(), (std::vector<std::string>{"a", "b"}));
  EXPECT_THROW(train_entity(Modality::Web, {}, {}), std::invalid_argument);
}

TEST(EntityDecide, OutliersIgnoredAndAbstain) {
  auto m = train_entity(Modality::App, {{"a", 9}, {"b", 1}}, {{"a", 1}, {"b", 9}});
  EXPECT_EQ(window_decide_entity(m, window_at(app_timeline({"x", "y"}), 1, 10)), Decision::Abstain);
  EXPECT_EQ(window_decide_entity(m, window_at(app_timeline({"a"}), 0, 10)), Decision::Accept);
  EXPECT_EQ(window_decide_entity(m, window_at(app_timeline({"b", "x"}), 1, 10)), Decision::Reject);
}

TEST(EntityDecide, PermutationAndDuplicationInvariance) {
  auto m = train_entity(Modality::App, {{"a", 5}, {"b", 3}, {"c", 2}}, {{"a", 2}, {"b", 5}, {"c", 3}});
  std::mt19937_64 rng(3);
  const std::vector<std::string> names = {"a", "b", "c", "x"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> seq;
    for (std::size_t i = 0; i < 1 + rng() % 12; ++i) seq.push_back(names[rng() % names.size()]);
    auto base = window_decide_entity(m, window_at(app_timeline(seq), 100, 1000));
    auto shuffled = seq;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(window_decide_entity(m, window_at(app_timeline(shuffled), 100, 1000)), base);
    auto doubled = seq;
    doubled.insert(doubled.end(), seq.begin(), seq.end());
    EXPECT_EQ(window_decide_entity(m, window_at(app_timeline(doubled), 100, 1000)), base);
  }
}

TEST(EntityModelFile, RoundTrip) {
  auto m = train_entity(Modality::Web, {{"m.example.com", 4}, {"www.example.com", 1}}, {{"m.example.com", 1}}, 20);
  std::stringstream s;
  save_entity_model(s, m);
  auto q = load_entity_model(s);
  EXPECT_EQ(q.modality(), m.modality());
  EXPECT_EQ(q.entities(), m.entities());
  EXPECT_EQ(q.p_valid(), m.p_valid());
  EXPECT_EQ(q.p_invalid(), m.p_invalid());
  EXPECT_EQ(q.k(), m.k());
}
