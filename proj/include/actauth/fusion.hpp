#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actauth/decision.hpp"
#include "actauth/entity_classifier.hpp"
#include "actauth/events.hpp"
#include "actauth/location_classifier.hpp"
#include "actauth/text_classifier.hpp"

namespace actauth {

inline constexpr double kRateFloor = 1e-4;

// Error rates of one fixed local detector, estimated on the characterization fold.
struct DetectorStats {
  Modality classifier = Modality::Text;
  double p_f = 0.5;  // false accept rate
  double p_m = 0.5;  // false reject rate

  DetectorStats clamped(double floor = kRateFloor) const;
};

// Log-likelihood weight of a +1 / -1 vote; stats are clamped first.
double weight_for(const DetectorStats& stats, Decision u);

struct LocalVote {
  DetectorStats stats;
  Decision u = Decision::Abstain;
};

struct Contribution {
  Modality classifier;
  Decision u;
  double weight;
};

struct GlobalDecision {
  Decision u = Decision::Abstain;
  double score = 0.0;  // a0 + sum a_i u_i
  std::vector<Contribution> contributing;
};

// a0 = log(P1/P0) when priors are known.
double prior_term(double p1, double p0);

// Weighted vote over the non-abstaining detectors; Abstain when none voted. Ties reject.
GlobalDecision fuse(std::span<const LocalVote> votes, double a0);

// Bare sum over votes, a0 excluded; nullopt when every vote abstains.
std::optional<double> vote_sum(std::span<const LocalVote> votes);

// The four per-user models; any may be missing (unsupported for that user).
struct UserModels {
  std::optional<NGramProfile> text;
  std::optional<EntityModel> app;
  std::optional<EntityModel> web;
  std::optional<LocationModel> location;
};

struct AuthenticationResult {
  GlobalDecision global;
  std::array<Decision, kModalityCount> locals{Decision::Abstain, Decision::Abstain, Decision::Abstain,
                                              Decision::Abstain};
};

// Local decision of one modality's model for the window ending at t_now.
Decision local_decision(const UserModels& models, Modality m, const ActiveTimeline& timeline, Seconds t_now,
                        Seconds omega);

// Windows every modality at t_now, collects local votes and fuses them. Detectors without a
// model or without stats are treated as silent.
AuthenticationResult authenticate(const ActiveTimeline& timeline, Seconds t_now, Seconds omega,
                                  const UserModels& models,
                                  const std::array<std::optional<DetectorStats>, kModalityCount>& stats, double a0);

struct TraceRecord {
  std::string user;
  std::string source;  // user whose activity filled the window
  int experiment = 0;
  Seconds omega = 0;
  Seconds t_now = 0;
  std::array<Decision, kModalityCount> locals{};
  std::array<double, kModalityCount> weights{};
  double score = 0.0;
  Decision global = Decision::Abstain;
};

std::string trace_header();
std::string format_trace(const TraceRecord& r);

}  // namespace actauth
