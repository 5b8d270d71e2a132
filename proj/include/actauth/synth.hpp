#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "actauth/events.hpp"
#include "actauth/seeding.hpp"

namespace actauth::synth {

// Target firing rates per active hour: TEXT, APP, WEB, LOCATION.
inline constexpr std::array<double, kModalityCount> kPaperRates = {557.8, 23.2, 5.6, 3.5};

struct SynthConfig {
  std::size_t n_users = 20;
  double active_hours = 72.0;
  std::uint64_t seed = 1;
  double overlap = 0.0;          // 0 = disjoint behavior, 1 = identical population
  double rate_dispersion = 0.0;  // sigma of the per-user lognormal rate multiplier
  std::array<double, kModalityCount> rates = kPaperRates;

  std::size_t app_vocab = 30;
  std::size_t web_vocab = 30;
  double zipf_exponent = 1.0;
  double text_concentration = 0.15;  // Dirichlet parameter of the character transition rows

  GeoPoint city_center{39.9526, -75.1652};
  double city_radius_deg = 0.15;
  double anchor_sigma_deg = 0.002;
  double min_anchor_separation_deg = 0.02;
  double errand_probability = 0.08;  // sessions away from habitual places

  double mean_session_minutes = 12.0;
  Seconds start_time = 1420070400;
};

struct Anchor {
  GeoPoint center;
  double sigma = 0.0;
  double weight = 0.0;
};

// Behavior components private to one user, before blending with the shared population profile.
struct UserProfile {
  std::string user_id;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> text_transitions;  // alphabet x alphabet, rows sum to 1
  std::vector<std::string> app_vocab;                 // rank order
  std::vector<std::string> web_vocab;                 // hosts, rank order
  std::vector<Anchor> anchors;
  std::array<double, kModalityCount> rates{};
};

struct SharedProfile {
  std::vector<std::vector<double>> text_transitions;
  std::vector<std::string> app_vocab;
  std::vector<std::string> web_vocab;
  std::vector<GeoPoint> anchors;
  std::vector<bool> shared_app_slots;  // vocabulary ranks taken from the shared list
  std::vector<bool> shared_web_slots;
};

struct Population {
  SynthConfig config;
  SharedProfile shared;
  std::vector<UserProfile> users;
  std::vector<std::vector<RawEvent>> events;  // per user, sorted by wall time
};

// Characters used by the synthetic typists.
const std::u32string& alphabet();

Population generate_population(const SynthConfig& config);

// Re-blends every user toward the shared profile by `degree` and regenerates the events.
Population overlap_knob(const Population& population, double degree);

// Effective (blended) behavior of user `u` at the population's overlap degree.
std::vector<std::string> effective_app_vocab(const Population& p, std::size_t u);
std::vector<std::string> effective_web_vocab(const Population& p, std::size_t u);
std::vector<Anchor> effective_anchors(const Population& p, std::size_t u);

// All events of the population merged by (wall time, user order).
std::vector<RawEvent> merged_log(const Population& p);

}  // namespace actauth::synth
