#include "actauth/location_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "model_io.hpp"

namespace actauth {

namespace {

constexpr double kTau = 1e-12;
constexpr std::size_t kFullGramLimit = 4096;
constexpr std::size_t kMedianSampleLimit = 2000;

// Rows of the kernel matrix, either precomputed or evaluated on demand.
class KernelRows {
 public:
  KernelRows(std::span<const Point2> points, double gamma) : points_(points), gamma_(gamma) {
    const auto n = points.size();
    if (n <= kFullGramLimit) {
      gram_.resize(n * n);
      kernels::rbf_gram_parallel(points, gamma, gram_);
    } else {
      buffers_[0].resize(n);
      buffers_[1].resize(n);
    }
  }

  // `slot` selects one of two scratch buffers so two rows can be live at once.
  std::span<const double> row(std::size_t i, int slot) {
    const auto n = points_.size();
    if (!gram_.empty()) return {gram_.data() + i * n, n};
    auto& buf = buffers_[slot];
    for (std::size_t j = 0; j < n; ++j) buf[j] = std::exp(-gamma_ * squared_distance(points_[i], points_[j]));
    return buf;
  }

 private:
  std::span<const Point2> points_;
  double gamma_;
  std::vector<double> gram_;
  std::vector<double> buffers_[2];
};

bool in_up(int y, double a, double c) { return (y > 0 && a < c) || (y < 0 && a > 0.0); }
bool in_low(int y, double a, double c) { return (y > 0 && a > 0.0) || (y < 0 && a < c); }

}  // namespace

FeatureScaler FeatureScaler::fit(std::span<const GeoPoint> points) {
  FeatureScaler s;
  if (points.empty()) return s;
  const double n = static_cast<double>(points.size());
  for (const auto& p : points) {
    s.mean_lat += p.lat;
    s.mean_lon += p.lon;
  }
  s.mean_lat /= n;
  s.mean_lon /= n;
  double var_lat = 0.0, var_lon = 0.0;
  for (const auto& p : points) {
    var_lat += (p.lat - s.mean_lat) * (p.lat - s.mean_lat);
    var_lon += (p.lon - s.mean_lon) * (p.lon - s.mean_lon);
  }
  s.scale_lat = var_lat > 0.0 ? std::sqrt(var_lat / n) : 1.0;
  s.scale_lon = var_lon > 0.0 ? std::sqrt(var_lon / n) : 1.0;
  return s;
}

double RbfSvmModel::decision_scaled(const Point2& z) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) sum += alphas[i] * std::exp(-gamma * squared_distance(support[i], z));
  return sum + bias;
}

double RbfSvmModel::decision(const GeoPoint& p) const { return decision_scaled(scaler.apply(p)); }

std::vector<double> RbfSvmModel::decisions(std::span<const GeoPoint> points, bool parallel) const {
  std::vector<Point2> probes(points.size());
  std::transform(points.begin(), points.end(), probes.begin(), [this](const GeoPoint& p) { return scaler.apply(p); });
  std::vector<double> out(points.size());
  if (parallel) {
    kernels::decision_values_parallel(support, alphas, gamma, bias, probes, out);
  } else {
    kernels::decision_values_serial(support, alphas, gamma, bias, probes, out);
  }
  return out;
}

double median_heuristic_gamma(std::span<const Point2> points) {
  std::vector<Point2> sample;
  const std::size_t stride = std::max<std::size_t>(1, (points.size() + kMedianSampleLimit - 1) / kMedianSampleLimit);
  for (std::size_t i = 0; i < points.size(); i += stride) sample.push_back(points[i]);
  std::vector<double> d2;
  d2.reserve(sample.size() * (sample.size() - 1) / 2);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    for (std::size_t j = i + 1; j < sample.size(); ++j) d2.push_back(squared_distance(sample[i], sample[j]));
  }
  auto median_of = [](std::vector<double>& v) {
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  };
  if (d2.empty()) throw DegenerateData("inseparable degenerate data: fewer than two points");
  double med = median_of(d2);
  if (med <= 0.0) {
    std::erase_if(d2, [](double v) { return v <= 0.0; });
    if (d2.empty()) throw DegenerateData("inseparable degenerate data: all points identical");
    med = median_of(d2);
  }
  return 1.0 / (2.0 * med);
}

SvmSolution solve_svm(std::span<const GeoPoint> valid, std::span<const GeoPoint> impostor, const SvmParams& params) {
  if (valid.empty() || impostor.empty()) throw std::invalid_argument("SVM training needs both classes");
  if (!(params.c > 0.0)) throw std::invalid_argument("SVM box constraint must be positive");

  std::vector<GeoPoint> raw(valid.begin(), valid.end());
  raw.insert(raw.end(), impostor.begin(), impostor.end());
  if (std::all_of(raw.begin(), raw.end(), [&](const GeoPoint& p) { return p == raw.front(); })) {
    throw DegenerateData("inseparable degenerate data: all points identical across both classes");
  }

  SvmSolution sol;
  auto& model = sol.model;
  model.scaler = FeatureScaler::fit(raw);
  model.c = params.c;
  const std::size_t n = raw.size();
  sol.points.resize(n);
  std::transform(raw.begin(), raw.end(), sol.points.begin(), [&](const GeoPoint& p) { return model.scaler.apply(p); });
  sol.labels.assign(n, -1);
  std::fill_n(sol.labels.begin(), valid.size(), +1);
  model.gamma = params.gamma ? *params.gamma : median_heuristic_gamma(sol.points);
  if (!(model.gamma > 0.0) || !std::isfinite(model.gamma)) throw std::invalid_argument("gamma must be positive");

  // Inverse-frequency weighting, normalized so the minority class keeps the full box c.
  double c_pos = params.c, c_neg = params.c;
  if (params.balance_classes) {
    const double np = static_cast<double>(valid.size()), nn = static_cast<double>(impostor.size());
    const double minority = std::min(np, nn);
    c_pos = params.c * minority / np;
    c_neg = params.c * minority / nn;
  }
  sol.box.resize(n);
  for (std::size_t t = 0; t < n; ++t) sol.box[t] = sol.labels[t] > 0 ? c_pos : c_neg;

  const auto& y = sol.labels;
  const auto& box = sol.box;
  auto& alpha = sol.alpha;
  alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);
  KernelRows rows(sol.points, model.gamma);
  const std::size_t max_iter = std::max(params.max_iterations, 100 * n);

  model.converged = false;
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(y[t], alpha[t], box[t]) && -y[t] * grad[t] >= gmax) {
        gmax = -y[t] * grad[t];
        i = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (i < 0) {
      model.converged = true;
      break;
    }
    auto ki = rows.row(static_cast<std::size_t>(i), 0);
    double gmax2 = -std::numeric_limits<double>::infinity();
    double obj_min = std::numeric_limits<double>::infinity();
    std::ptrdiff_t j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(y[t], alpha[t], box[t])) continue;
      const double yg = y[t] * grad[t];
      gmax2 = std::max(gmax2, yg);
      const double diff = gmax + yg;
      if (diff > 0.0) {
        double quad = 2.0 - 2.0 * ki[t];  // K_ii = K_tt = 1 for RBF
        if (quad <= 0.0) quad = kTau;
        const double obj = -(diff * diff) / quad;
        if (obj <= obj_min) {
          obj_min = obj;
          j = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    if (gmax + gmax2 < params.tolerance || j < 0) {
      model.converged = true;
      break;
    }

    const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
    auto kj = rows.row(uj, 1);
    const double ci = box[ui], cj = box[uj];
    const double old_ai = alpha[ui], old_aj = alpha[uj];
    double ai = old_ai, aj = old_aj;
    const double qij = y[ui] * y[uj] * ki[uj];
    if (y[ui] != y[uj]) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[ui] - grad[uj]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > ci - cj) {
        if (ai > ci) { ai = ci; aj = ci - diff; }
      } else {
        if (aj > cj) { aj = cj; ai = cj + diff; }
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[ui] - grad[uj]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > ci) {
        if (ai > ci) { ai = ci; aj = sum - ci; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > cj) {
        if (aj > cj) { aj = cj; ai = sum - cj; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }
    alpha[ui] = ai;
    alpha[uj] = aj;
    const double dai = ai - old_ai, daj = aj - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[ui] * ki[t] * dai + y[uj] * kj[t] * daj);
    }
  }
  sol.iterations = iter;

  // Offset from free vectors, or the midpoint of the feasible interval when none are free.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t nr_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= box[t]) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++nr_free;
      sum_free += yg;
    }
  }
  const double rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free) : (ub + lb) / 2.0;
  model.bias = -rho;

  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      model.support.push_back(sol.points[t]);
      model.alphas.push_back(alpha[t] * y[t]);
    }
  }
  return sol;
}

RbfSvmModel train_svm(std::span<const GeoPoint> valid, std::span<const GeoPoint> impostor, const SvmParams& params) {
  return solve_svm(valid, impostor, params).model;
}

double kkt_residual(const SvmSolution& solution) {
  const auto& m = solution.model;
  double worst = 0.0;
  for (std::size_t t = 0; t < solution.points.size(); ++t) {
    const double margin = solution.labels[t] * m.decision_scaled(solution.points[t]);
    double violation;
    if (solution.alpha[t] <= 0.0) {
      violation = std::max(0.0, 1.0 - margin);
    } else if (solution.alpha[t] >= solution.box[t]) {
      violation = std::max(0.0, margin - 1.0);
    } else {
      violation = std::abs(margin - 1.0);
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

// ---- Platt scaling -----------------------------------------------------------

double PlattCalibration::probability(double score) const {
  const double f = a * score + b;
  return f >= 0.0 ? std::exp(-f) / (1.0 + std::exp(-f)) : 1.0 / (1.0 + std::exp(f));
}

namespace {

struct SmoothedTargets {
  std::vector<double> t;
  double hi = 0.0, lo = 0.0;
  double prior_pos = 0.0, prior_neg = 0.0;
};

SmoothedTargets smoothed_targets(std::span<const int> labels) {
  SmoothedTargets st;
  for (int y : labels) (y > 0 ? st.prior_pos : st.prior_neg) += 1.0;
  st.hi = (st.prior_pos + 1.0) / (st.prior_pos + 2.0);
  st.lo = 1.0 / (st.prior_neg + 2.0);
  st.t.reserve(labels.size());
  for (int y : labels) st.t.push_back(y > 0 ? st.hi : st.lo);
  return st;
}

double loss_with_targets(std::span<const double> scores, std::span<const double> t, double a, double b) {
  double f = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double z = scores[i] * a + b;
    f += z >= 0.0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
  }
  return f;
}

}  // namespace

double platt_loss(std::span<const double> scores, std::span<const int> labels, double a, double b) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  return loss_with_targets(scores, smoothed_targets(labels).t, a, b);
}

PlattCalibration fit_platt(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  auto st = smoothed_targets(labels);
  if (st.prior_pos == 0.0 || st.prior_neg == 0.0) throw std::invalid_argument("Platt scaling needs both classes");

  constexpr std::size_t kMaxIter = 200;
  constexpr double kMinStep = 1e-12;
  constexpr double kSigma = 1e-12;
  constexpr double kGradTol = 1e-8;

  PlattCalibration cal;
  double a = 0.0, b = std::log((st.prior_neg + 1.0) / (st.prior_pos + 1.0));
  double fval = loss_with_targets(scores, st.t, a, b);
  std::size_t it = 0;
  double gnorm = 0.0;
  for (; it < kMaxIter; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double z = scores[i] * a + b;
      double p, q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = st.t[i] - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    gnorm = std::hypot(g1, g2);
    if (gnorm <= kGradTol) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    bool moved = false;
    while (step >= kMinStep) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = loss_with_targets(scores, st.t, na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;  // line search exhausted: at the precision floor
  }
  cal.a = a;
  cal.b = b;
  cal.iterations = it;
  cal.gradient_norm = gnorm;
  return cal;
}

// ---- Location model ----------------------------------------------------------

LocationModel train_location(std::span<const GeoPoint> valid, std::span<const GeoPoint> impostor,
                             const SvmParams& params, std::uint64_t seed, std::size_t calibration_folds) {
  LocationModel out;
  out.svm = train_svm(valid, impostor, params);

  const std::size_t folds = std::min({calibration_folds, valid.size(), impostor.size()});
  std::vector<double> scores;
  std::vector<int> labels;
  if (folds < 2) {
    scores = out.svm.decisions(valid);
    auto neg = out.svm.decisions(impostor);
    labels.assign(scores.size(), +1);
    scores.insert(scores.end(), neg.begin(), neg.end());
    labels.resize(scores.size(), -1);
  } else {
    std::mt19937_64 rng(seed);
    auto assign = [&](std::size_t count) {
      std::vector<std::size_t> fold(count);
      for (std::size_t i = 0; i < count; ++i) fold[i] = i % folds;
      std::shuffle(fold.begin(), fold.end(), rng);
      return fold;
    };
    auto valid_fold = assign(valid.size());
    auto impostor_fold = assign(impostor.size());
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<GeoPoint> tv, ti, hv, hi;
      for (std::size_t i = 0; i < valid.size(); ++i) (valid_fold[i] == f ? hv : tv).push_back(valid[i]);
      for (std::size_t i = 0; i < impostor.size(); ++i) (impostor_fold[i] == f ? hi : ti).push_back(impostor[i]);
      RbfSvmModel fold_model;
      try {
        fold_model = train_svm(tv, ti, params);
      } catch (const DegenerateData&) {
        continue;
      }
      for (double s : fold_model.decisions(hv)) {
        scores.push_back(s);
        labels.push_back(+1);
      }
      for (double s : fold_model.decisions(hi)) {
        scores.push_back(s);
        labels.push_back(-1);
      }
    }
  }
  out.platt = fit_platt(scores, labels);
  const auto positives = static_cast<double>(std::count(labels.begin(), labels.end(), +1));
  out.prior_log_odds = std::log(positives / (static_cast<double>(labels.size()) - positives));
  return out;
}

std::optional<double> window_log_ratio(const LocationModel& model, const Window& window) {
  double sum = 0.0;
  bool any = false;
  for (const auto* e : window.events) {
    if (e->event.modality != Modality::Location) continue;
    sum += model.log_ratio(e->event.location());
    any = true;
  }
  if (!any) return std::nullopt;
  return sum;
}

Decision window_decide_location(const LocationModel& model, const Window& window) {
  auto lr = window_log_ratio(model, window);
  if (!lr) return Decision::Abstain;
  return *lr >= 0.0 ? Decision::Accept : Decision::Reject;
}

void save_location_model(std::ostream& out, const LocationModel& model) {
  using io::format_double;
  const auto& svm = model.svm;
  out << "rbf-svm v1\n";
  out << "scaler " << format_double(svm.scaler.mean_lat) << ' ' << format_double(svm.scaler.mean_lon) << ' '
      << format_double(svm.scaler.scale_lat) << ' ' << format_double(svm.scaler.scale_lon) << '\n';
  out << "gamma " << format_double(svm.gamma) << '\n';
  out << "c " << format_double(svm.c) << '\n';
  out << "bias " << format_double(svm.bias) << '\n';
  out << "platt " << format_double(model.platt.a) << ' ' << format_double(model.platt.b) << '\n';
  out << "prior " << format_double(model.prior_log_odds) << '\n';
  out << "support " << svm.support.size() << '\n';
  for (std::size_t i = 0; i < svm.support.size(); ++i) {
    out << format_double(svm.support[i].x) << '\t' << format_double(svm.support[i].y) << '\t'
        << format_double(svm.alphas[i]) << '\n';
  }
}

LocationModel load_location_model(std::istream& in) {
  io::LineReader r(in, "location");
  r.expect_header("rbf-svm v1");
  LocationModel m;
  auto sc = r.keyed("scaler", 4);
  m.svm.scaler = {r.to_double(sc[0]), r.to_double(sc[1]), r.to_double(sc[2]), r.to_double(sc[3])};
  m.svm.gamma = r.keyed_double("gamma");
  m.svm.c = r.keyed_double("c");
  m.svm.bias = r.keyed_double("bias");
  auto pl = r.keyed("platt", 2);
  m.platt.a = r.to_double(pl[0]);
  m.platt.b = r.to_double(pl[1]);
  m.prior_log_odds = r.keyed_double("prior");
  auto count = r.keyed_size("support");
  for (std::size_t i = 0; i < count; ++i) {
    auto line = r.next();
    auto cols = io::split(line, '\t');
    if (cols.size() != 3) r.fail("expected z_lat, z_lon, alpha");
    m.svm.support.push_back({r.to_double(cols[0]), r.to_double(cols[1])});
    m.svm.alphas.push_back(r.to_double(cols[2]));
  }
  return m;
}

}  // namespace actauth
