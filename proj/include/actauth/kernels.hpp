#pragma once

// Data-parallel RBF kernels. Each OpenMP version has a serial twin used as the
// reference in tests and benchmarks; both must produce bit-identical output.

#include <span>

namespace actauth {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double squared_distance(const Point2& a, const Point2& b) {
  double dx = a.x - b.x;
  double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

namespace kernels {

// Row-major n x n Gram matrix exp(-gamma * |p_i - p_j|^2).
void rbf_gram_serial(std::span<const Point2> points, double gamma, std::span<double> out);
void rbf_gram_parallel(std::span<const Point2> points, double gamma, std::span<double> out);

// out[k] = bias + sum_i coef[i] * exp(-gamma * |sv_i - probe_k|^2)
void decision_values_serial(std::span<const Point2> support, std::span<const double> coef, double gamma,
                            double bias, std::span<const Point2> probes, std::span<double> out);
void decision_values_parallel(std::span<const Point2> support, std::span<const double> coef, double gamma,
                              double bias, std::span<const Point2> probes, std::span<double> out);

}  // namespace kernels
}  // namespace actauth
