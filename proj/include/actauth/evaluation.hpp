#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "actauth/events.hpp"
#include "actauth/fusion.hpp"

namespace actauth::eval {

inline constexpr int kFolds = 5;
inline constexpr int kExperiments = 5;

// Five contiguous spans of active time, each 20% of the user's active duration.
struct FoldPlan {
  std::array<Seconds, kFolds + 1> bounds{};  // fold k = [bounds[k], bounds[k+1]), the last one closed

  int fold_of(Seconds active_time) const;
  ActiveTimeline slice(const ActiveTimeline& timeline, int fold) const;
};

struct ExperimentRoles {
  std::array<int, 3> train{};
  int characterize = 0;
  int test = 0;
};

class InsufficientActivity : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

FoldPlan plan_folds(const ActiveTimeline& timeline);

// Experiment e (0-based) trains on folds e, e+1, e+2, characterizes on e+3 and tests on e+4 (mod 5).
ExperimentRoles rotation(int experiment);

struct ErrorEstimate {
  double far = 0.0;
  double frr = 0.0;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
  std::size_t genuine_rejected = 0;
  std::size_t impostor_accepted = 0;

  // FAR and FRR are only meaningful with both kinds of window present.
  bool supported() const { return n_genuine > 0 && n_impostor > 0; }
  DetectorStats stats(Modality m) const { return {m, far, frr}; }
};

// Counts decisions; abstentions are excluded from the denominators.
ErrorEstimate estimate_errors(std::span<const Decision> genuine, std::span<const Decision> impostor);

// Decision points t_now = begin + k*omega (k >= 1) not exceeding end.
std::vector<Seconds> decision_points(Seconds begin, Seconds end, Seconds omega);

// Raw window score of one modality: TEXT n-gram coverage, otherwise the summed log
// likelihood ratio. nullopt when the detector abstains.
std::optional<double> window_score(const UserModels& models, Modality m, const ActiveTimeline& timeline, Seconds t_now,
                                   Seconds omega);

// Slides non-overlapping windows over the folds with the direct (reference) window classifiers.
ErrorEstimate characterize(const UserModels& models, Modality m, const ActiveTimeline& genuine_fold,
                           std::pair<Seconds, Seconds> genuine_span, std::span<const ActiveTimeline> impostor_folds,
                           std::span<const std::pair<Seconds, Seconds>> impostor_spans, Seconds omega);

// Threshold on window scores (accept iff score >= theta) minimizing |FAR - FRR|;
// ties go to the smaller FAR + FRR, then the smaller threshold.
double tune_threshold(std::span<const double> genuine, std::span<const double> impostor);

// ---- ROC / EER ---------------------------------------------------------------

struct RocPoint {
  double a0 = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

struct EerResult {
  double eer = 0.0;
  std::size_t lower = 0;  // straddling sweep indices
  std::size_t upper = 0;
};

// Scores are fusion sums without a0: accepted iff a0 + score > 0.
std::vector<RocPoint> roc_sweep(std::span<const double> genuine, std::span<const double> impostor,
                                std::span<const double> a0_grid);

// Linear interpolation between the sweep points where FAR - FRR changes sign.
// Expects points ordered by a0 ascending (FAR non-decreasing).
std::optional<EerResult> equal_error_rate(std::span<const RocPoint> roc);

std::vector<double> make_grid(double lo, double hi, double step);

// (E_i - E) / E_i; nullopt when E_i is zero.
std::optional<double> contribution(double e_full, double e_without);

// ---- Full protocol -----------------------------------------------------------

struct EvalConfig {
  std::vector<Seconds> windows = {60, 120, 300, 600, 900, 1200, 1500, 1800, 2700, 3600};
  IdlePolicy idle;
  std::size_t ngram = 4;
  std::size_t top_k = 20;
  double epsilon = 1e-6;
  SvmParams svm;
  std::size_t impostor_ratio = 10;
  double tau_min = -40.0;
  double tau_max = 40.0;
  double tau_step = 0.05;
  std::uint64_t seed = 1;
  int jobs = 0;                     // 0: OpenMP default
  bool reference_windows = false;   // direct per-window classifiers instead of the scoring kernels
  std::vector<Seconds> trace_windows = {1800};
};

// Detector subsets evaluated on a common window basis.
enum class Variant : int {
  Full = 0,
  WithoutText, WithoutApp, WithoutWeb, WithoutLocation,
  OnlyText, OnlyApp, OnlyWeb, OnlyLocation,
};
inline constexpr std::size_t kVariantCount = 9;
std::string variant_name(Variant v);
unsigned variant_mask(Variant v);
Variant without(Modality m);
Variant only(Modality m);

// 4 detectors, each abstain / accept / reject: 3^4 window patterns.
inline constexpr std::size_t kPatternCount = 81;
std::size_t encode_pattern(const std::array<Decision, kModalityCount>& locals);
std::array<Decision, kModalityCount> decode_pattern(std::size_t code);

// Window counts of one (user, experiment, omega) test run, keyed by local decision pattern.
struct ExperimentOutcome {
  std::array<ErrorEstimate, kModalityCount> characterization{};
  std::array<bool, kModalityCount> in_fusion{};
  std::array<double, kModalityCount> theta{};  // TEXT threshold in slot 0
  std::array<std::array<std::size_t, 2>, kPatternCount> windows{};  // [pattern][0 genuine, 1 impostor]

  // Fusion sum of a variant for a pattern; nullopt when none of the variant's detectors voted.
  std::optional<double> variant_sum(std::size_t pattern, unsigned mask) const;
};

struct UserOutcome {
  std::string user;
  std::map<Seconds, std::array<ExperimentOutcome, kExperiments>> by_window;
};

struct ModalityError {
  Modality modality;
  double far_mean = 0.0, far_std = 0.0;
  double frr_mean = 0.0, frr_std = 0.0;
  std::size_t users = 0;
};

struct VariantCurve {
  Variant variant = Variant::Full;
  std::vector<RocPoint> roc;
  std::optional<EerResult> eer;
};

struct WindowReport {
  Seconds omega = 0;
  std::array<ModalityError, kModalityCount> modality_errors{};
  std::array<VariantCurve, kVariantCount> variants{};
  std::array<std::optional<double>, kModalityCount> contributions{};
  std::size_t users_in_roc = 0;
};

struct EvaluationReport {
  std::vector<WindowReport> windows;
  std::vector<UserOutcome> users;
  std::vector<std::string> notes;
  std::vector<std::string> traces;
};

// Per-user genuine/impostor fusion sums for one variant, on the full system's window basis.
struct VariantScores {
  std::vector<double> genuine;
  std::vector<double> impostor;
  std::vector<std::size_t> genuine_weight;
  std::vector<std::size_t> impostor_weight;
};
VariantScores variant_scores(const UserOutcome& user, Seconds omega, Variant v);
std::vector<RocPoint> roc_sweep(const VariantScores& scores, std::span<const double> a0_grid);

// Sweep averaged over users (each user weighted equally).
std::vector<RocPoint> averaged_roc(std::span<const UserOutcome> users, Seconds omega, Variant v,
                                   std::span<const double> a0_grid);

// Per-fold views of one user's activity, extracted once and shared by every experiment.
struct FoldData {
  Seconds begin = 0;
  Seconds end = 0;
  ActiveTimeline slice;
  std::array<std::vector<Seconds>, kModalityCount> times;  // active time of each event, per modality
  std::u32string text;
  std::vector<std::optional<std::string>> app;  // entity per event; nullopt when unparseable
  std::vector<std::optional<std::string>> web;
  std::vector<GeoPoint> locations;
  EntityCounts app_counts;
  EntityCounts web_counts;
};

struct PreparedUser {
  std::string id;
  ActiveTimeline timeline;
  FoldPlan plan;
  std::array<FoldData, kFolds> folds;
};

FoldData extract_fold(const ActiveTimeline& timeline, const FoldPlan& plan, int fold);

// Compresses idle time and plans folds; users that cannot be folded are reported in `notes`.
std::vector<PreparedUser> prepare_users(const std::map<std::string, std::vector<RawEvent>>& users, IdlePolicy idle,
                                        std::vector<std::string>& notes);

// Trains the four detectors of `users[target]` on the experiment's training folds, with the other
// users' training folds as the impostor class. Failed modalities stay empty and are described in `failures`.
UserModels train_user_models(std::span<const PreparedUser> users, std::size_t target, int experiment,
                             const EvalConfig& config, std::array<std::string, kModalityCount>& failures);

// Events of every user, keyed by user id; users with too little activity are reported in notes.
EvaluationReport evaluate(const std::map<std::string, std::vector<RawEvent>>& users, const EvalConfig& config);

// Delimited tables: modality_errors.tsv, roc.tsv, eer.tsv, contributions.tsv, characterization.tsv,
// traces.tsv. Files are written atomically.
void write_report(const std::string& directory, const EvaluationReport& report);

}  // namespace actauth::eval
