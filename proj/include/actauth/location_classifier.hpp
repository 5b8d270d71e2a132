#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "actauth/decision.hpp"
#include "actauth/events.hpp"
#include "actauth/kernels.hpp"

namespace actauth {

class DegenerateData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-dimension standardization of (lat, lon).
struct FeatureScaler {
  double mean_lat = 0.0, mean_lon = 0.0;
  double scale_lat = 1.0, scale_lon = 1.0;

  static FeatureScaler fit(std::span<const GeoPoint> points);
  Point2 apply(const GeoPoint& p) const { return {(p.lat - mean_lat) / scale_lat, (p.lon - mean_lon) / scale_lon}; }
};

struct SvmParams {
  double c = 1.0;
  std::optional<double> gamma;  // median heuristic when unset
  double tolerance = 1e-3;
  bool balance_classes = true;
  std::size_t max_iterations = 10'000'000;
};

// Dual solution of the RBF support vector classifier, kept in standardized feature space.
struct RbfSvmModel {
  FeatureScaler scaler;
  double gamma = 1.0;
  double c = 1.0;
  double bias = 0.0;
  std::vector<Point2> support;
  std::vector<double> alphas;  // alpha_i * y_i
  bool converged = true;

  double decision(const GeoPoint& p) const;
  double decision_scaled(const Point2& z) const;
  // Batch scoring; uses the OpenMP kernel when `parallel` is set.
  std::vector<double> decisions(std::span<const GeoPoint> points, bool parallel = true) const;
};

// Full training output: every training point with its dual variable, for KKT inspection.
struct SvmSolution {
  RbfSvmModel model;
  std::vector<Point2> points;  // standardized
  std::vector<int> labels;     // +1 valid, -1 impostor
  std::vector<double> alpha;   // unsigned dual variables
  std::vector<double> box;     // per-point upper bound
  std::size_t iterations = 0;
};

SvmSolution solve_svm(std::span<const GeoPoint> valid, std::span<const GeoPoint> impostor, const SvmParams& params);
RbfSvmModel train_svm(std::span<const GeoPoint> valid, std::span<const GeoPoint> impostor, const SvmParams& params);

// Largest violation of the margin/alpha complementarity conditions over the training set.
double kkt_residual(const SvmSolution& solution);

double median_heuristic_gamma(std::span<const Point2> points);

// p(genuine | s) = 1 / (1 + exp(a*s + b))
struct PlattCalibration {
  double a = 0.0;
  double b = 0.0;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;

  double probability(double score) const;
  // log(p / (1 - p)) evaluated without forming p.
  double log_odds(double score) const { return -(a * score + b); }
};

// Regularized negative log-likelihood the Platt fit minimizes (smoothed targets).
double platt_loss(std::span<const double> scores, std::span<const int> labels, double a, double b);
PlattCalibration fit_platt(std::span<const double> scores, std::span<const int> labels);

struct LocationModel {
  RbfSvmModel svm;
  PlattCalibration platt;
  double prior_log_odds = 0.0;  // log(N+ / N-) of the calibration set

  double probability(const GeoPoint& p) const { return platt.probability(svm.decision(p)); }
  // Calibrated posterior odds divided by the calibration set's class odds.
  double log_ratio_of_score(double s) const { return platt.log_odds(s) - prior_log_odds; }
  double log_ratio(const GeoPoint& p) const { return log_ratio_of_score(svm.decision(p)); }
};

// SVM on all points; Platt scaling on scores from an internal stratified k-fold split.
LocationModel train_location(std::span<const GeoPoint> valid, std::span<const GeoPoint> impostor,
                             const SvmParams& params, std::uint64_t seed, std::size_t calibration_folds = 3);

std::optional<double> window_log_ratio(const LocationModel& model, const Window& window);
Decision window_decide_location(const LocationModel& model, const Window& window);

void save_location_model(std::ostream& out, const LocationModel& model);
LocationModel load_location_model(std::istream& in);

}  // namespace actauth
