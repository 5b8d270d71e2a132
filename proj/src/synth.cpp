#include "actauth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace actauth::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMeanBurstChars = 40.0;
constexpr double kMeanKeyIntervalSecs = 0.3;
constexpr double kMeanGpsEpisodeFixes = 4.0;
constexpr Seconds kGpsIntervalSecs = 60;
constexpr double kShortGapProbability = 0.25;
constexpr double kMeanLongGapSecs = 2.0 * 3600.0;
constexpr std::size_t kSharedAnchors = 4;
// Idle before a session's first event and after its last one is partly lost to
// compression; measured share of in-session time that survives.
constexpr double kSessionEdgeRetention = 0.915;

// Rendering streams are offset so profile building and event rendering never share a seed.
constexpr std::uint64_t kRenderStream = 1u << 20;

std::vector<double> dirichlet(std::mt19937_64& rng, std::size_t k, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> v(k);
  double sum = 0.0;
  for (auto& x : v) sum += (x = gamma(rng));
  if (sum <= 0.0) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::fill(v.begin(), v.end(), 0.0);
    v[pick(rng)] = 1.0;
    return v;
  }
  for (auto& x : v) x /= sum;
  return v;
}

std::vector<std::vector<double>> transition_matrix(std::mt19937_64& rng, std::size_t k, double alpha) {
  std::vector<std::vector<double>> m;
  m.reserve(k);
  for (std::size_t i = 0; i < k; ++i) m.push_back(dirichlet(rng, k, alpha));
  return m;
}

GeoPoint point_in_disk(std::mt19937_64& rng, const GeoPoint& center, double radius) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = radius * std::sqrt(u(rng));
  const double theta = 2.0 * kPi * u(rng);
  return {center.lat + r * std::cos(theta), center.lon + r * std::sin(theta)};
}

double geo_distance(const GeoPoint& a, const GeoPoint& b) { return std::hypot(a.lat - b.lat, a.lon - b.lon); }

GeoPoint clamp_geo(GeoPoint p) {
  p.lat = std::clamp(p.lat, -90.0, 90.0);
  p.lon = std::clamp(p.lon, -180.0, 180.0);
  return p;
}

std::vector<bool> shared_slots(std::uint64_t seed, std::size_t vocab, double degree) {
  std::vector<std::size_t> order(vocab);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto count = static_cast<std::size_t>(std::lround(degree * static_cast<double>(vocab)));
  std::vector<bool> slots(vocab, false);
  for (std::size_t i = 0; i < count && i < vocab; ++i) slots[order[i]] = true;
  return slots;
}

std::vector<std::string> blend_vocab(const std::vector<std::string>& own, const std::vector<std::string>& shared,
                                     const std::vector<bool>& slots) {
  std::vector<std::string> out(own);
  for (std::size_t r = 0; r < out.size() && r < shared.size(); ++r) {
    if (slots[r]) out[r] = shared[r];
  }
  return out;
}

std::vector<double> zipf_weights(std::size_t n, double s) {
  std::vector<double> w(n);
  for (std::size_t r = 0; r < n; ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), s);
  return w;
}

// Renders one user's event stream on the wall-clock axis until the compressed
// (active) duration reaches the configured number of hours.
std::vector<RawEvent> render_user(const Population& pop, std::size_t u) {
  const auto& cfg = pop.config;
  const auto& user = pop.users[u];
  std::mt19937_64 rng(derive_seed(cfg.seed, kRenderStream + u));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double d = cfg.overlap;
  const auto& alpha = alphabet();
  const std::size_t k = alpha.size();
  std::vector<std::discrete_distribution<std::size_t>> next_char;
  next_char.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> row(k);
    for (std::size_t j = 0; j < k; ++j) {
      row[j] = (1.0 - d) * user.text_transitions[i][j] + d * pop.shared.text_transitions[i][j];
    }
    next_char.emplace_back(row.begin(), row.end());
  }
  const auto apps = effective_app_vocab(pop, u);
  const auto webs = effective_web_vocab(pop, u);
  const auto anchors = effective_anchors(pop, u);
  auto app_w = zipf_weights(apps.size(), cfg.zipf_exponent);
  auto web_w = zipf_weights(webs.size(), cfg.zipf_exponent);
  std::discrete_distribution<std::size_t> pick_app(app_w.begin(), app_w.end());
  std::discrete_distribution<std::size_t> pick_web(web_w.begin(), web_w.end());
  std::vector<double> anchor_w;
  for (const auto& a : anchors) anchor_w.push_back(a.weight);
  std::discrete_distribution<std::size_t> pick_anchor(anchor_w.begin(), anchor_w.end());

  // Events only occur inside sessions, so in-session intensity is inflated by the
  // expected share of active time spent between sessions.
  const double mean_session = cfg.mean_session_minutes * 60.0;
  const double mean_gap_active = kShortGapProbability * 130.0 + (1.0 - kShortGapProbability) * 300.0;
  const double inflation = (mean_session + mean_gap_active) / mean_session;
  std::array<double, kModalityCount> per_sec{};
  for (std::size_t m = 0; m < kModalityCount; ++m) per_sec[m] = user.rates[m] / 3600.0 * inflation * kSessionEdgeRetention;

  std::exponential_distribution<double> session_len(1.0 / mean_session);
  std::exponential_distribution<double> key_interval(1.0 / kMeanKeyIntervalSecs);
  std::geometric_distribution<int> burst_extra(1.0 / kMeanBurstChars);
  std::geometric_distribution<int> gps_extra(1.0 / kMeanGpsEpisodeFixes);
  std::uniform_int_distribution<std::size_t> any_char(0, k - 1);
  std::uniform_int_distribution<int> path_id(1, 9999);
  std::normal_distribution<double> jitter(0.0, 1.0);

  const Seconds target_active = static_cast<Seconds>(std::llround(cfg.active_hours * 3600.0));
  Seconds wall = cfg.start_time + static_cast<Seconds>(unit(rng) * 3600.0);
  Seconds active = 0;
  Seconds last_event = -1;
  std::size_t state = any_char(rng);
  std::vector<RawEvent> out;
  std::vector<RawEvent> session;

  auto poisson = [&](double mean) { return std::poisson_distribution<int>(mean)(rng); };

  while (active < target_active) {
    const double len = std::max(60.0, session_len(rng));
    Anchor place;
    if (unit(rng) < cfg.errand_probability) {
      place = {point_in_disk(rng, cfg.city_center, cfg.city_radius_deg), cfg.anchor_sigma_deg, 0.0};
    } else {
      place = anchors[pick_anchor(rng)];
    }
    session.clear();
    auto at = [&](double offset) { return wall + static_cast<Seconds>(std::floor(offset)); };

    const int bursts = poisson(per_sec[0] * len / kMeanBurstChars);
    for (int b = 0; b < bursts; ++b) {
      double t = unit(rng) * len;
      const int chars = 1 + burst_extra(rng);
      for (int c = 0; c < chars; ++c) {
        state = next_char[state](rng);
        session.push_back({user.user_id, at(t), Modality::Text, encode_utf8(std::u32string(1, alpha[state]))});
        t += key_interval(rng);
      }
    }
    const int app_events = poisson(per_sec[1] * len);
    for (int i = 0; i < app_events; ++i) {
      session.push_back({user.user_id, at(unit(rng) * len), Modality::App, apps[pick_app(rng)]});
    }
    const int web_events = poisson(per_sec[2] * len);
    for (int i = 0; i < web_events; ++i) {
      auto url = fmt::format("https://{}/p/{}", webs[pick_web(rng)], path_id(rng));
      session.push_back({user.user_id, at(unit(rng) * len), Modality::Web, std::move(url)});
    }
    const int episodes = poisson(per_sec[3] * len / kMeanGpsEpisodeFixes);
    for (int e = 0; e < episodes; ++e) {
      double t = unit(rng) * len;
      const int fixes = 1 + gps_extra(rng);
      for (int f = 0; f < fixes; ++f) {
        GeoPoint p{place.center.lat + place.sigma * jitter(rng), place.center.lon + place.sigma * jitter(rng)};
        session.push_back({user.user_id, at(t), Modality::Location, clamp_geo(p)});
        t += static_cast<double>(kGpsIntervalSecs);
      }
    }
    std::stable_sort(session.begin(), session.end(),
                     [](const RawEvent& a, const RawEvent& b) { return a.wall_time < b.wall_time; });
    for (auto& e : session) {
      if (last_event >= 0) {
        Seconds gap = e.wall_time - last_event;
        active += gap > 300 ? 300 : gap;
      }
      last_event = e.wall_time;
      out.push_back(std::move(e));
    }

    Seconds gap;
    if (unit(rng) < kShortGapProbability) {
      gap = 20 + static_cast<Seconds>(unit(rng) * 220.0);
    } else {
      gap = 301 + static_cast<Seconds>(std::exponential_distribution<double>(1.0 / kMeanLongGapSecs)(rng));
    }
    wall = std::max(wall + static_cast<Seconds>(len), last_event + 1) + gap;
  }
  return out;
}

}  // namespace

const std::u32string& alphabet() {
  static const std::u32string chars = U"abcdefghijklmnopqrstuvwxyz '.,";
  return chars;
}

std::vector<std::string> effective_app_vocab(const Population& p, std::size_t u) {
  return blend_vocab(p.users[u].app_vocab, p.shared.app_vocab, p.shared.shared_app_slots);
}

std::vector<std::string> effective_web_vocab(const Population& p, std::size_t u) {
  return blend_vocab(p.users[u].web_vocab, p.shared.web_vocab, p.shared.shared_web_slots);
}

std::vector<Anchor> effective_anchors(const Population& p, std::size_t u) {
  const double d = p.config.overlap;
  std::vector<Anchor> out;
  if (d < 1.0) {
    for (auto a : p.users[u].anchors) {
      a.weight *= 1.0 - d;
      out.push_back(a);
    }
  }
  if (d > 0.0) {
    const double share = d / static_cast<double>(p.shared.anchors.size());
    for (const auto& c : p.shared.anchors) out.push_back({c, p.config.anchor_sigma_deg, share});
  }
  return out;
}

Population generate_population(const SynthConfig& config) {
  if (config.n_users < 2) throw std::invalid_argument("population needs at least two users (impostor pool)");
  if (!(config.active_hours > 0.0)) throw std::invalid_argument("duration must be positive");
  if (config.overlap < 0.0 || config.overlap > 1.0) throw std::invalid_argument("overlap must lie in [0,1]");
  for (double r : config.rates) {
    if (!(r > 0.0)) throw std::invalid_argument("modality rates must be positive");
  }

  Population pop;
  pop.config = config;
  const std::size_t k = alphabet().size();

  std::mt19937_64 shared_rng(derive_seed(config.seed, 0xC0FFEE));
  pop.shared.text_transitions = transition_matrix(shared_rng, k, config.text_concentration);
  for (std::size_t j = 0; j < config.app_vocab; ++j) pop.shared.app_vocab.push_back(fmt::format("com.common.app{:02}", j));
  for (std::size_t j = 0; j < config.web_vocab; ++j) {
    pop.shared.web_vocab.push_back(fmt::format("{}.common{:02}.com", j % 3 == 0 ? "m" : "www", j));
  }
  for (std::size_t a = 0; a < kSharedAnchors; ++a) {
    pop.shared.anchors.push_back(point_in_disk(shared_rng, config.city_center, config.city_radius_deg * 0.5));
  }
  pop.shared.shared_app_slots = shared_slots(derive_seed(config.seed, 0xA99), config.app_vocab, config.overlap);
  pop.shared.shared_web_slots = shared_slots(derive_seed(config.seed, 0x3EB), config.web_vocab, config.overlap);

  std::vector<GeoPoint> placed;
  for (std::size_t u = 0; u < config.n_users; ++u) {
    UserProfile user;
    user.user_id = fmt::format("user{:02}", u);
    user.seed = derive_seed(config.seed, u);
    std::mt19937_64 rng(user.seed);
    user.text_transitions = transition_matrix(rng, k, config.text_concentration);
    for (std::size_t j = 0; j < config.app_vocab; ++j) user.app_vocab.push_back(fmt::format("com.u{:02}.app{:02}", u, j));
    for (std::size_t j = 0; j < config.web_vocab; ++j) {
      user.web_vocab.push_back(fmt::format("{}.u{:02}site{:02}.com", j % 3 == 0 ? "m" : "www", u, j));
    }
    std::uniform_int_distribution<int> anchor_count(2, 4);
    const int anchors = anchor_count(rng);
    auto weights = dirichlet(rng, static_cast<std::size_t>(anchors), 2.0);
    for (int a = 0; a < anchors; ++a) {
      GeoPoint c{};
      for (int attempt = 0; attempt < 10000; ++attempt) {
        c = point_in_disk(rng, config.city_center, config.city_radius_deg);
        bool clear = std::all_of(placed.begin(), placed.end(), [&](const GeoPoint& q) {
          return geo_distance(c, q) >= config.min_anchor_separation_deg;
        });
        if (clear) break;
      }
      placed.push_back(c);
      user.anchors.push_back({c, config.anchor_sigma_deg, weights[static_cast<std::size_t>(a)]});
    }
    user.rates = config.rates;
    if (config.rate_dispersion > 0.0) {
      std::lognormal_distribution<double> dispersion(0.0, config.rate_dispersion);
      for (auto& r : user.rates) r *= dispersion(rng);
    }
    pop.users.push_back(std::move(user));
  }

  pop.events.resize(pop.users.size());
  const auto n = static_cast<long>(pop.users.size());
#pragma omp parallel for schedule(dynamic)
  for (long u = 0; u < n; ++u) pop.events[static_cast<std::size_t>(u)] = render_user(pop, static_cast<std::size_t>(u));
  return pop;
}

Population overlap_knob(const Population& population, double degree) {
  if (degree < 0.0 || degree > 1.0) throw std::invalid_argument("overlap degree must lie in [0,1]");
  auto config = population.config;
  config.overlap = degree;
  return generate_population(config);
}

std::vector<RawEvent> merged_log(const Population& p) {
  std::vector<RawEvent> all;
  for (const auto& user_events : p.events) all.insert(all.end(), user_events.begin(), user_events.end());
  std::stable_sort(all.begin(), all.end(), [](const RawEvent& a, const RawEvent& b) { return a.wall_time < b.wall_time; });
  return all;
}

}  // namespace actauth::synth
