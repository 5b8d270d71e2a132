#include "actauth/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "actauth/seeding.hpp"

namespace actauth::eval {

namespace {

using WindowScores = std::array<std::optional<double>, kModalityCount>;
using Scorer = std::function<WindowScores(Seconds, Seconds)>;

constexpr unsigned kAllDetectors = 0xF;

// Window scores from per-event quantities precomputed once per (model, fold).
class SegmentKernel {
 public:
  SegmentKernel(const FoldData& fold, const UserModels& models) : fold_(fold) {
    if (models.text) {
      has_[0] = true;
      n_ = models.text->n;
      const auto& text = fold.text;
      prefix_.assign(text.size() + 1, 0);
      std::u32string gram;
      for (std::size_t p = 0; p < text.size(); ++p) {
        std::uint32_t hit = 0;
        if (p + 1 >= n_) {
          gram.assign(text, p + 1 - n_, n_);
          hit = models.text->grams.count(gram) ? 1u : 0u;
        }
        prefix_[p + 1] = prefix_[p] + hit;
      }
    }
    auto entity_ratios = [](const EntityModel& model, const std::vector<std::optional<std::string>>& entities) {
      std::vector<double> lr(entities.size(), std::numeric_limits<double>::quiet_NaN());
      for (std::size_t i = 0; i < entities.size(); ++i) {
        if (!entities[i]) continue;
        if (auto r = model.log_ratio(*entities[i])) lr[i] = *r;
      }
      return lr;
    };
    if (models.app) {
      has_[1] = true;
      lr_[1] = entity_ratios(*models.app, fold.app);
    }
    if (models.web) {
      has_[2] = true;
      lr_[2] = entity_ratios(*models.web, fold.web);
    }
    if (models.location) {
      has_[3] = true;
      auto raw = models.location->svm.decisions(fold.locations);
      lr_[3].resize(raw.size());
      for (std::size_t i = 0; i < raw.size(); ++i) lr_[3][i] = models.location->log_ratio_of_score(raw[i]);
    }
  }

  WindowScores operator()(Seconds t_now, Seconds omega) const {
    WindowScores out;
    for (std::size_t m = 0; m < kModalityCount; ++m) {
      if (!has_[m]) continue;
      const auto& times = fold_.times[m];
      const auto lo = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t_now - omega) - times.begin());
      const auto hi = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t_now) - times.begin());
      if (m == 0) {
        const std::size_t count = hi - lo;
        if (count < n_) continue;
        const std::size_t tokens = count - n_ + 1;
        const std::size_t hits = prefix_[hi] - prefix_[lo + n_ - 1];
        out[m] = static_cast<double>(hits) / static_cast<double>(tokens);
      } else {
        double sum = 0.0;
        bool any = false;
        for (std::size_t i = lo; i < hi; ++i) {
          if (std::isnan(lr_[m][i])) continue;
          sum += lr_[m][i];
          any = true;
        }
        if (any) out[m] = sum;
      }
    }
    return out;
  }

 private:
  const FoldData& fold_;
  std::array<bool, kModalityCount> has_{};
  std::size_t n_ = 0;
  std::vector<std::uint32_t> prefix_;
  std::array<std::vector<double>, kModalityCount> lr_;
};

Decision decide(Modality m, const std::optional<double>& score, double theta) {
  if (!score) return Decision::Abstain;
  const double threshold = m == Modality::Text ? theta : 0.0;
  return *score >= threshold ? Decision::Accept : Decision::Reject;
}

struct TaskResult {
  std::map<Seconds, ExperimentOutcome> by_window;
  std::vector<std::string> notes;
  std::vector<std::string> traces;
  std::string error;
};

TaskResult run_experiment(std::span<const PreparedUser> users, std::size_t target, int experiment,
                          const EvalConfig& config) {
  TaskResult result;
  const auto roles = rotation(experiment);
  std::array<std::string, kModalityCount> failures;
  const auto models = train_user_models(users, target, experiment, config, failures);
  for (auto m : kAllModalities) {
    if (!failures[index_of(m)].empty()) {
      result.notes.push_back(fmt::format("user {} experiment {}: {} unsupported: {}", users[target].id, experiment + 1,
                                         to_string(m), failures[index_of(m)]));
    }
  }

  auto make_scorers = [&](int fold) {
    std::vector<Scorer> scorers;
    for (const auto& u : users) {
      const auto& fd = u.folds[static_cast<std::size_t>(fold)];
      if (config.reference_windows) {
        scorers.emplace_back([&models, &fd](Seconds t, Seconds omega) {
          WindowScores s;
          for (auto m : kAllModalities) s[index_of(m)] = window_score(models, m, fd.slice, t, omega);
          return s;
        });
      } else {
        scorers.emplace_back(SegmentKernel(fd, models));
      }
    }
    return scorers;
  };
  const auto char_scorers = make_scorers(roles.characterize);
  const auto test_scorers = make_scorers(roles.test);

  const std::set<Seconds> traced(config.trace_windows.begin(), config.trace_windows.end());

  for (Seconds omega : config.windows) {
    ExperimentOutcome outcome;

    std::array<std::vector<double>, kModalityCount> gen_scores, imp_scores;
    std::array<std::vector<std::optional<double>>, kModalityCount> gen_raw, imp_raw;
    for (std::size_t b = 0; b < users.size(); ++b) {
      const auto& fd = users[b].folds[static_cast<std::size_t>(roles.characterize)];
      for (Seconds t : decision_points(fd.begin, fd.end, omega)) {
        auto s = char_scorers[b](t, omega);
        for (std::size_t m = 0; m < kModalityCount; ++m) {
          (b == target ? gen_raw : imp_raw)[m].push_back(s[m]);
          if (s[m]) (b == target ? gen_scores : imp_scores)[m].push_back(*s[m]);
        }
      }
    }
    for (auto m : kAllModalities) {
      const auto k = index_of(m);
      if (m == Modality::Text) outcome.theta[k] = models.text ? tune_threshold(gen_scores[k], imp_scores[k]) : 0.5;
      std::vector<Decision> gen, imp;
      for (const auto& s : gen_raw[k]) gen.push_back(decide(m, s, outcome.theta[k]));
      for (const auto& s : imp_raw[k]) imp.push_back(decide(m, s, outcome.theta[k]));
      outcome.characterization[k] = estimate_errors(gen, imp);
      outcome.in_fusion[k] = outcome.characterization[k].supported();
    }

    const bool trace = traced.count(omega) != 0;
    for (std::size_t b = 0; b < users.size(); ++b) {
      const auto& fd = users[b].folds[static_cast<std::size_t>(roles.test)];
      const std::size_t label = b == target ? 0 : 1;
      for (Seconds t : decision_points(fd.begin, fd.end, omega)) {
        auto s = test_scorers[b](t, omega);
        std::array<Decision, kModalityCount> locals{};
        for (auto m : kAllModalities) locals[index_of(m)] = decide(m, s[index_of(m)], outcome.theta[index_of(m)]);
        const auto pattern = encode_pattern(locals);
        ++outcome.windows[pattern][label];
        if (!trace) continue;
        auto sum = outcome.variant_sum(pattern, kAllDetectors);
        if (!sum) continue;
        TraceRecord rec;
        rec.user = users[target].id;
        rec.source = users[b].id;
        rec.experiment = experiment + 1;
        rec.omega = omega;
        rec.t_now = t;
        rec.locals = locals;
        for (auto m : kAllModalities) {
          const auto k = index_of(m);
          if (locals[k] != Decision::Abstain && outcome.in_fusion[k]) {
            rec.weights[k] = weight_for(outcome.characterization[k].stats(m), locals[k]);
          }
        }
        rec.score = *sum;
        rec.global = *sum > 0.0 ? Decision::Accept : Decision::Reject;
        result.traces.push_back(format_trace(rec));
      }
    }
    result.by_window.emplace(omega, outcome);
  }
  return result;
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

// ---- Folds -------------------------------------------------------------------

int FoldPlan::fold_of(Seconds active_time) const {
  if (active_time < bounds[0] || active_time > bounds[kFolds]) return -1;
  for (int k = 0; k < kFolds; ++k) {
    if (active_time < bounds[static_cast<std::size_t>(k) + 1]) return k;
  }
  return kFolds - 1;
}

ActiveTimeline FoldPlan::slice(const ActiveTimeline& timeline, int fold) const {
  if (fold < 0 || fold >= kFolds) throw std::out_of_range("fold index out of range");
  const auto f = static_cast<std::size_t>(fold);
  return timeline.slice(bounds[f], bounds[f + 1], fold == kFolds - 1);
}

FoldPlan plan_folds(const ActiveTimeline& timeline) {
  if (timeline.size() < static_cast<std::size_t>(kFolds)) {
    throw InsufficientActivity(fmt::format("insufficient activity: {} events", timeline.size()));
  }
  const Seconds total = timeline.total_active_duration();
  if (total <= 0) throw InsufficientActivity("insufficient activity: zero active duration");
  FoldPlan plan;
  const Seconds origin = timeline.events().front().active_time;
  for (int k = 0; k <= kFolds; ++k) plan.bounds[static_cast<std::size_t>(k)] = origin + total * k / kFolds;
  return plan;
}

ExperimentRoles rotation(int experiment) {
  if (experiment < 0 || experiment >= kExperiments) throw std::out_of_range("experiment index out of range");
  ExperimentRoles r;
  for (int i = 0; i < 3; ++i) r.train[static_cast<std::size_t>(i)] = (experiment + i) % kFolds;
  r.characterize = (experiment + 3) % kFolds;
  r.test = (experiment + 4) % kFolds;
  return r;
}

FoldData extract_fold(const ActiveTimeline& timeline, const FoldPlan& plan, int fold) {
  FoldData fd;
  fd.begin = plan.bounds[static_cast<std::size_t>(fold)];
  fd.end = plan.bounds[static_cast<std::size_t>(fold) + 1];
  fd.slice = plan.slice(timeline, fold);
  for (const auto& te : fd.slice.events()) {
    const auto& e = te.event;
    fd.times[index_of(e.modality)].push_back(te.active_time);
    switch (e.modality) {
      case Modality::Text: fd.text += decode_utf8(e.text()); break;
      case Modality::App:
        fd.app.emplace_back(e.text());
        ++fd.app_counts[e.text()];
        break;
      case Modality::Web: {
        std::optional<std::string> host;
        try {
          host = url_host(e.text());
          ++fd.web_counts[*host];
        } catch (const std::invalid_argument&) {
        }
        fd.web.push_back(std::move(host));
        break;
      }
      case Modality::Location: fd.locations.push_back(e.location()); break;
    }
  }
  return fd;
}

std::vector<PreparedUser> prepare_users(const std::map<std::string, std::vector<RawEvent>>& users, IdlePolicy idle,
                                        std::vector<std::string>& notes) {
  std::vector<PreparedUser> out;
  for (const auto& [id, events] : users) {
    PreparedUser u;
    u.id = id;
    u.timeline = compress_idle(events, idle);
    try {
      u.plan = plan_folds(u.timeline);
    } catch (const InsufficientActivity& e) {
      notes.push_back(fmt::format("user {} skipped: {}", id, e.what()));
      continue;
    }
    for (int f = 0; f < kFolds; ++f) u.folds[static_cast<std::size_t>(f)] = extract_fold(u.timeline, u.plan, f);
    out.push_back(std::move(u));
  }
  return out;
}

UserModels train_user_models(std::span<const PreparedUser> users, std::size_t target, int experiment,
                             const EvalConfig& config, std::array<std::string, kModalityCount>& failures) {
  const auto roles = rotation(experiment);
  const auto& owner = users[target];
  UserModels models;

  std::vector<std::u32string> segments;
  EntityCounts app_valid, web_valid, app_impostor, web_impostor;
  std::vector<GeoPoint> loc_valid, loc_impostor;
  for (int f : roles.train) {
    const auto& fd = owner.folds[static_cast<std::size_t>(f)];
    segments.push_back(fd.text);
    for (const auto& [k, v] : fd.app_counts) app_valid[k] += v;
    for (const auto& [k, v] : fd.web_counts) web_valid[k] += v;
    loc_valid.insert(loc_valid.end(), fd.locations.begin(), fd.locations.end());
    for (std::size_t b = 0; b < users.size(); ++b) {
      if (b == target) continue;
      const auto& other = users[b].folds[static_cast<std::size_t>(f)];
      for (const auto& [k, v] : other.app_counts) app_impostor[k] += v;
      for (const auto& [k, v] : other.web_counts) web_impostor[k] += v;
      loc_impostor.insert(loc_impostor.end(), other.locations.begin(), other.locations.end());
    }
  }

  try {
    models.text = train_text(std::span<const std::u32string>(segments), config.ngram);
  } catch (const InsufficientText& e) {
    failures[index_of(Modality::Text)] = e.what();
  }
  if (app_valid.empty()) {
    failures[index_of(Modality::App)] = "no APP events in training folds";
  } else {
    models.app = train_entity(Modality::App, app_valid, app_impostor, config.top_k, config.epsilon);
  }
  if (web_valid.empty()) {
    failures[index_of(Modality::Web)] = "no WEB events in training folds";
  } else {
    models.web = train_entity(Modality::Web, web_valid, web_impostor, config.top_k, config.epsilon);
  }

  const std::uint64_t stream = static_cast<std::uint64_t>(target) * kExperiments + static_cast<std::uint64_t>(experiment);
  if (loc_valid.empty()) {
    failures[index_of(Modality::Location)] = "no LOCATION events in training folds";
  } else if (loc_impostor.empty()) {
    failures[index_of(Modality::Location)] = "no impostor LOCATION events";
  } else {
    std::mt19937_64 rng(derive_seed(config.seed, 2 * stream));
    const std::size_t cap = config.impostor_ratio * loc_valid.size();
    if (loc_impostor.size() > cap) {
      std::shuffle(loc_impostor.begin(), loc_impostor.end(), rng);
      loc_impostor.resize(cap);
    }
    try {
      models.location = train_location(loc_valid, loc_impostor, config.svm, derive_seed(config.seed, 2 * stream + 1));
    } catch (const std::exception& e) {
      failures[index_of(Modality::Location)] = e.what();
    }
  }
  return models;
}

// ---- Characterization --------------------------------------------------------

ErrorEstimate estimate_errors(std::span<const Decision> genuine, std::span<const Decision> impostor) {
  ErrorEstimate est;
  for (auto d : genuine) {
    if (d == Decision::Abstain) continue;
    ++est.n_genuine;
    if (d == Decision::Reject) ++est.genuine_rejected;
  }
  for (auto d : impostor) {
    if (d == Decision::Abstain) continue;
    ++est.n_impostor;
    if (d == Decision::Accept) ++est.impostor_accepted;
  }
  if (est.n_genuine) est.frr = static_cast<double>(est.genuine_rejected) / static_cast<double>(est.n_genuine);
  if (est.n_impostor) est.far = static_cast<double>(est.impostor_accepted) / static_cast<double>(est.n_impostor);
  return est;
}

std::vector<Seconds> decision_points(Seconds begin, Seconds end, Seconds omega) {
  if (omega <= 0) throw ContractViolation("window length must be positive");
  std::vector<Seconds> out;
  for (Seconds t = begin + omega; t <= end; t += omega) out.push_back(t);
  return out;
}

std::optional<double> window_score(const UserModels& models, Modality m, const ActiveTimeline& timeline, Seconds t_now,
                                   Seconds omega) {
  auto window = window_at(timeline, t_now, omega, m);
  switch (m) {
    case Modality::Text:
      if (!models.text) return std::nullopt;
      return coverage_score(*models.text, window_text(window));
    case Modality::App:
      if (!models.app) return std::nullopt;
      return window_log_ratio(*models.app, window);
    case Modality::Web:
      if (!models.web) return std::nullopt;
      return window_log_ratio(*models.web, window);
    case Modality::Location:
      if (!models.location) return std::nullopt;
      return window_log_ratio(*models.location, window);
  }
  return std::nullopt;
}

ErrorEstimate characterize(const UserModels& models, Modality m, const ActiveTimeline& genuine_fold,
                           std::pair<Seconds, Seconds> genuine_span, std::span<const ActiveTimeline> impostor_folds,
                           std::span<const std::pair<Seconds, Seconds>> impostor_spans, Seconds omega) {
  if (impostor_folds.size() != impostor_spans.size()) throw std::invalid_argument("impostor folds and spans differ");
  std::vector<Decision> gen, imp;
  for (Seconds t : decision_points(genuine_span.first, genuine_span.second, omega)) {
    gen.push_back(local_decision(models, m, genuine_fold, t, omega));
  }
  for (std::size_t i = 0; i < impostor_folds.size(); ++i) {
    for (Seconds t : decision_points(impostor_spans[i].first, impostor_spans[i].second, omega)) {
      imp.push_back(local_decision(models, m, impostor_folds[i], t, omega));
    }
  }
  return estimate_errors(gen, imp);
}

double tune_threshold(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty() && impostor.empty()) return 0.5;
  std::vector<double> gen(genuine.begin(), genuine.end()), imp(impostor.begin(), impostor.end());
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> candidates(gen);
  candidates.insert(candidates.end(), imp.begin(), imp.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double best = candidates.front();
  double best_gap = std::numeric_limits<double>::infinity(), best_sum = best_gap;
  for (double theta : candidates) {
    const auto gen_below = static_cast<double>(std::lower_bound(gen.begin(), gen.end(), theta) - gen.begin());
    const auto imp_below = static_cast<double>(std::lower_bound(imp.begin(), imp.end(), theta) - imp.begin());
    const double frr = gen.empty() ? 0.0 : gen_below / static_cast<double>(gen.size());
    const double far = imp.empty() ? 0.0 : 1.0 - imp_below / static_cast<double>(imp.size());
    const double gap = std::abs(far - frr), sum = far + frr;
    if (gap < best_gap || (gap == best_gap && sum < best_sum)) {
      best = theta;
      best_gap = gap;
      best_sum = sum;
    }
  }
  return best;
}

// ---- ROC / EER ---------------------------------------------------------------

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw std::invalid_argument("invalid sweep grid");
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  grid.reserve(count);
  for (std::size_t i = 0; i < count; ++i) grid.push_back(lo + static_cast<double>(i) * step);
  return grid;
}

std::vector<RocPoint> roc_sweep(const VariantScores& scores, std::span<const double> a0_grid) {
  auto sorted = [](const std::vector<double>& s, const std::vector<std::size_t>& w) {
    std::vector<std::pair<double, std::size_t>> v;
    for (std::size_t i = 0; i < s.size(); ++i) v.emplace_back(s[i], w.empty() ? 1 : w[i]);
    std::sort(v.begin(), v.end());
    std::vector<double> keys(v.size());
    std::vector<double> suffix(v.size() + 1, 0.0);
    for (std::size_t i = v.size(); i-- > 0;) {
      keys[i] = v[i].first;
      suffix[i] = suffix[i + 1] + static_cast<double>(v[i].second);
    }
    return std::pair{keys, suffix};
  };
  const auto [gen_keys, gen_suffix] = sorted(scores.genuine, scores.genuine_weight);
  const auto [imp_keys, imp_suffix] = sorted(scores.impostor, scores.impostor_weight);
  const double gen_total = gen_suffix.front(), imp_total = imp_suffix.front();

  std::vector<RocPoint> roc;
  roc.reserve(a0_grid.size());
  for (double a0 : a0_grid) {
    // accepted iff a0 + s > 0, i.e. s > -a0
    auto accepted = [&](const std::vector<double>& keys, const std::vector<double>& suffix) {
      auto idx = std::upper_bound(keys.begin(), keys.end(), -a0) - keys.begin();
      return suffix[static_cast<std::size_t>(idx)];
    };
    RocPoint p{a0, 0.0, 0.0};
    p.far = imp_total > 0.0 ? accepted(imp_keys, imp_suffix) / imp_total : 0.0;
    p.frr = gen_total > 0.0 ? 1.0 - accepted(gen_keys, gen_suffix) / gen_total : 0.0;
    roc.push_back(p);
  }
  return roc;
}

std::vector<RocPoint> roc_sweep(std::span<const double> genuine, std::span<const double> impostor,
                                std::span<const double> a0_grid) {
  VariantScores s;
  s.genuine.assign(genuine.begin(), genuine.end());
  s.impostor.assign(impostor.begin(), impostor.end());
  return roc_sweep(s, a0_grid);
}

std::optional<EerResult> equal_error_rate(std::span<const RocPoint> roc) {
  for (std::size_t i = 0; i < roc.size(); ++i) {
    const double d1 = roc[i].far - roc[i].frr;
    if (d1 < 0.0) continue;
    if (i == 0) return EerResult{(roc[0].far + roc[0].frr) / 2.0, 0, 0};
    const double d0 = roc[i - 1].far - roc[i - 1].frr;
    const double t = d1 == d0 ? 0.0 : -d0 / (d1 - d0);
    return EerResult{roc[i - 1].far + t * (roc[i].far - roc[i - 1].far), i - 1, i};
  }
  return std::nullopt;
}

std::optional<double> contribution(double e_full, double e_without) {
  if (e_without == 0.0) return std::nullopt;
  return (e_without - e_full) / e_without;
}

// ---- Variants ----------------------------------------------------------------

std::string variant_name(Variant v) {
  const auto i = static_cast<int>(v);
  if (i == 0) return "full";
  if (i <= 4) return fmt::format("without_{}", to_string(kAllModalities[i - 1]));
  return fmt::format("only_{}", to_string(kAllModalities[i - 5]));
}

unsigned variant_mask(Variant v) {
  const auto i = static_cast<int>(v);
  if (i == 0) return kAllDetectors;
  if (i <= 4) return kAllDetectors & ~(1u << (i - 1));
  return 1u << (i - 5);
}

Variant without(Modality m) { return static_cast<Variant>(1 + static_cast<int>(index_of(m))); }
Variant only(Modality m) { return static_cast<Variant>(5 + static_cast<int>(index_of(m))); }

std::size_t encode_pattern(const std::array<Decision, kModalityCount>& locals) {
  std::size_t code = 0;
  for (std::size_t k = kModalityCount; k-- > 0;) {
    const std::size_t digit = locals[k] == Decision::Abstain ? 0 : locals[k] == Decision::Accept ? 1 : 2;
    code = code * 3 + digit;
  }
  return code;
}

std::array<Decision, kModalityCount> decode_pattern(std::size_t code) {
  std::array<Decision, kModalityCount> locals{};
  for (std::size_t k = 0; k < kModalityCount; ++k) {
    const auto digit = code % 3;
    locals[k] = digit == 0 ? Decision::Abstain : digit == 1 ? Decision::Accept : Decision::Reject;
    code /= 3;
  }
  return locals;
}

std::optional<double> ExperimentOutcome::variant_sum(std::size_t pattern, unsigned mask) const {
  const auto locals = decode_pattern(pattern);
  std::vector<LocalVote> votes;
  for (auto m : kAllModalities) {
    const auto k = index_of(m);
    if (!(mask & (1u << k)) || !in_fusion[k]) continue;
    votes.push_back({characterization[k].stats(m), locals[k]});
  }
  return vote_sum(votes);
}

VariantScores variant_scores(const UserOutcome& user, Seconds omega, Variant v) {
  VariantScores out;
  auto it = user.by_window.find(omega);
  if (it == user.by_window.end()) return out;
  const unsigned mask = variant_mask(v);
  for (const auto& exp : it->second) {
    for (std::size_t p = 0; p < kPatternCount; ++p) {
      const auto& counts = exp.windows[p];
      if (counts[0] == 0 && counts[1] == 0) continue;
      if (!exp.variant_sum(p, kAllDetectors)) continue;
      const double s = exp.variant_sum(p, mask).value_or(0.0);
      if (counts[0]) {
        out.genuine.push_back(s);
        out.genuine_weight.push_back(counts[0]);
      }
      if (counts[1]) {
        out.impostor.push_back(s);
        out.impostor_weight.push_back(counts[1]);
      }
    }
  }
  return out;
}

std::vector<RocPoint> averaged_roc(std::span<const UserOutcome> users, Seconds omega, Variant v,
                                   std::span<const double> a0_grid) {
  std::vector<RocPoint> acc;
  std::size_t n = 0;
  for (const auto& u : users) {
    auto scores = variant_scores(u, omega, v);
    if (scores.genuine.empty() || scores.impostor.empty()) continue;
    auto roc = roc_sweep(scores, a0_grid);
    if (acc.empty()) {
      acc = roc;
    } else {
      for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i].far += roc[i].far;
        acc[i].frr += roc[i].frr;
      }
    }
    ++n;
  }
  for (auto& p : acc) {
    p.far /= static_cast<double>(n);
    p.frr /= static_cast<double>(n);
  }
  return acc;
}

// ---- Protocol ----------------------------------------------------------------

EvaluationReport evaluate(const std::map<std::string, std::vector<RawEvent>>& users, const EvalConfig& config) {
  if (config.windows.empty()) throw std::invalid_argument("no window sizes given");
  for (Seconds w : config.windows) {
    if (w <= 0) throw std::invalid_argument("window sizes must be positive");
  }
  EvaluationReport report;
  const auto prepared = prepare_users(users, config.idle, report.notes);
  if (prepared.size() < 2) throw std::runtime_error("evaluation needs at least two users with enough activity");

  const auto tasks = static_cast<long>(prepared.size() * kExperiments);
  std::vector<TaskResult> results(static_cast<std::size_t>(tasks));
#ifdef _OPENMP
  const int threads = config.jobs > 0 ? config.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (long t = 0; t < tasks; ++t) {
    auto& r = results[static_cast<std::size_t>(t)];
    try {
      r = run_experiment(prepared, static_cast<std::size_t>(t / kExperiments), static_cast<int>(t % kExperiments),
                         config);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  }

  for (std::size_t u = 0; u < prepared.size(); ++u) {
    UserOutcome outcome;
    outcome.user = prepared[u].id;
    for (int e = 0; e < kExperiments; ++e) {
      auto& r = results[u * kExperiments + static_cast<std::size_t>(e)];
      if (!r.error.empty()) {
        throw std::runtime_error(fmt::format("user {} experiment {} failed: {}", outcome.user, e + 1, r.error));
      }
      for (auto& [omega, exp] : r.by_window) outcome.by_window[omega][static_cast<std::size_t>(e)] = exp;
      report.notes.insert(report.notes.end(), r.notes.begin(), r.notes.end());
      report.traces.insert(report.traces.end(), std::make_move_iterator(r.traces.begin()),
                           std::make_move_iterator(r.traces.end()));
    }
    report.users.push_back(std::move(outcome));
  }

  const auto grid = make_grid(config.tau_min, config.tau_max, config.tau_step);
  for (Seconds omega : config.windows) {
    WindowReport wr;
    wr.omega = omega;
    for (auto m : kAllModalities) {
      const auto k = index_of(m);
      std::vector<double> fars, frrs;
      std::size_t both = 0;
      for (const auto& u : report.users) {
        std::size_t gv = 0, gr = 0, iv = 0, ia = 0;
        for (const auto& exp : u.by_window.at(omega)) {
          for (std::size_t p = 0; p < kPatternCount; ++p) {
            const auto d = decode_pattern(p)[k];
            if (d == Decision::Abstain) continue;
            gv += exp.windows[p][0];
            iv += exp.windows[p][1];
            if (d == Decision::Reject) gr += exp.windows[p][0];
            if (d == Decision::Accept) ia += exp.windows[p][1];
          }
        }
        if (gv) frrs.push_back(static_cast<double>(gr) / static_cast<double>(gv));
        if (iv) fars.push_back(static_cast<double>(ia) / static_cast<double>(iv));
        if (gv && iv) ++both;
      }
      auto& me = wr.modality_errors[k];
      me.modality = m;
      me.far_mean = mean_of(fars);
      me.far_std = sample_std(fars, me.far_mean);
      me.frr_mean = mean_of(frrs);
      me.frr_std = sample_std(frrs, me.frr_mean);
      me.users = both;
    }
    for (std::size_t v = 0; v < kVariantCount; ++v) {
      auto& curve = wr.variants[v];
      curve.variant = static_cast<Variant>(v);
      curve.roc = averaged_roc(report.users, omega, curve.variant, grid);
      curve.eer = equal_error_rate(curve.roc);
    }
    for (const auto& u : report.users) {
      auto s = variant_scores(u, omega, Variant::Full);
      if (!s.genuine.empty() && !s.impostor.empty()) ++wr.users_in_roc;
    }
    const auto& full = wr.variants[0].eer;
    for (auto m : kAllModalities) {
      const auto& drop = wr.variants[static_cast<std::size_t>(without(m))].eer;
      if (full && drop) wr.contributions[index_of(m)] = contribution(full->eer, drop->eer);
    }
    report.windows.push_back(std::move(wr));
  }
  return report;
}

}  // namespace actauth::eval
