#include "actauth/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace actauth::kernels {

namespace {

inline double decision_at(std::span<const Point2> support, std::span<const double> coef, double gamma,
                          double bias, const Point2& probe) {
  double sum = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    sum += coef[i] * std::exp(-gamma * squared_distance(support[i], probe));
  }
  return sum + bias;
}

void check_gram(std::span<const Point2> points, std::span<double> out) {
  if (out.size() != points.size() * points.size()) throw std::invalid_argument("gram buffer has wrong size");
}

void check_decision(std::span<const Point2> support, std::span<const double> coef, std::span<const Point2> probes,
                    std::span<double> out) {
  if (coef.size() != support.size() || out.size() != probes.size()) {
    throw std::invalid_argument("decision buffers have mismatched sizes");
  }
}

}  // namespace

void rbf_gram_serial(std::span<const Point2> points, double gamma, std::span<double> out) {
  check_gram(points, out);
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = std::exp(-gamma * squared_distance(points[i], points[j]));
  }
}

void rbf_gram_parallel(std::span<const Point2> points, double gamma, std::span<double> out) {
  check_gram(points, out);
  const auto n = static_cast<long>(points.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) out[i * n + j] = std::exp(-gamma * squared_distance(points[i], points[j]));
  }
}

void decision_values_serial(std::span<const Point2> support, std::span<const double> coef, double gamma,
                            double bias, std::span<const Point2> probes, std::span<double> out) {
  check_decision(support, coef, probes, out);
  for (std::size_t k = 0; k < probes.size(); ++k) out[k] = decision_at(support, coef, gamma, bias, probes[k]);
}

void decision_values_parallel(std::span<const Point2> support, std::span<const double> coef, double gamma,
                              double bias, std::span<const Point2> probes, std::span<double> out) {
  check_decision(support, coef, probes, out);
  const auto m = static_cast<long>(probes.size());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < m; ++k) out[k] = decision_at(support, coef, gamma, bias, probes[k]);
}

}  // namespace actauth::kernels
