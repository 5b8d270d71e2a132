#include "actauth/fusion.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace actauth {

DetectorStats DetectorStats::clamped(double floor) const {
  return {classifier, std::clamp(p_f, floor, 1.0 - floor), std::clamp(p_m, floor, 1.0 - floor)};
}

double weight_for(const DetectorStats& stats, Decision u) {
  const auto s = stats.clamped();
  switch (u) {
    case Decision::Accept: return std::log((1.0 - s.p_m) / s.p_f);
    case Decision::Reject: return std::log((1.0 - s.p_f) / s.p_m);
    case Decision::Abstain: break;
  }
  throw ContractViolation("abstaining detectors carry no weight");
}

double prior_term(double p1, double p0) { return std::log(p1 / p0); }

std::optional<double> vote_sum(std::span<const LocalVote> votes) {
  double sum = 0.0;
  bool any = false;
  for (const auto& v : votes) {
    if (v.u == Decision::Abstain) continue;
    sum += weight_for(v.stats, v.u) * sign(v.u);
    any = true;
  }
  if (!any) return std::nullopt;
  return sum;
}

GlobalDecision fuse(std::span<const LocalVote> votes, double a0) {
  GlobalDecision g;
  double sum = 0.0;
  for (const auto& v : votes) {
    if (v.u == Decision::Abstain) continue;
    const double w = weight_for(v.stats, v.u);
    g.contributing.push_back({v.stats.classifier, v.u, w});
    sum += w * sign(v.u);
  }
  if (g.contributing.empty()) return g;
  g.score = a0 + sum;
  g.u = g.score > 0.0 ? Decision::Accept : Decision::Reject;
  return g;
}

Decision local_decision(const UserModels& models, Modality m, const ActiveTimeline& timeline, Seconds t_now,
                        Seconds omega) {
  auto window = window_at(timeline, t_now, omega, m);
  switch (m) {
    case Modality::Text:
      return models.text ? decide_text(*models.text, window_text(window)) : Decision::Abstain;
    case Modality::App:
      return models.app ? window_decide_entity(*models.app, window) : Decision::Abstain;
    case Modality::Web:
      return models.web ? window_decide_entity(*models.web, window) : Decision::Abstain;
    case Modality::Location:
      return models.location ? window_decide_location(*models.location, window) : Decision::Abstain;
  }
  return Decision::Abstain;
}

AuthenticationResult authenticate(const ActiveTimeline& timeline, Seconds t_now, Seconds omega,
                                  const UserModels& models,
                                  const std::array<std::optional<DetectorStats>, kModalityCount>& stats, double a0) {
  AuthenticationResult result;
  std::vector<LocalVote> votes;
  for (auto m : kAllModalities) {
    const auto k = index_of(m);
    if (!stats[k]) continue;
    result.locals[k] = local_decision(models, m, timeline, t_now, omega);
    votes.push_back({*stats[k], result.locals[k]});
  }
  result.global = fuse(votes, a0);
  return result;
}

std::string trace_header() {
  return "experiment\tuser\tsource\tomega_s\tt_now\tTEXT\tAPP\tWEB\tLOCATION\tscore\tglobal";
}

std::string format_trace(const TraceRecord& r) {
  std::string out = fmt::format("{}\t{}\t{}\t{}\t{}", r.experiment, escape_field(r.user), escape_field(r.source),
                                r.omega, r.t_now);
  for (std::size_t k = 0; k < kModalityCount; ++k) {
    if (r.locals[k] == Decision::Abstain) {
      out += "\t-";
    } else {
      out += fmt::format("\t{}:{:.6f}", to_string(r.locals[k]), r.weights[k]);
    }
  }
  out += fmt::format("\t{:.6f}\t{}", r.score, to_string(r.global));
  return out;
}

}  // namespace actauth
