#include "vega/charging.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "vega/errors.hpp"

namespace vega {

namespace {
constexpr double kGridStepPct = 0.1;
constexpr double kBisectTolPct = 1e-6;
}  // namespace

ChargeCurve::ChargeCurve(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) throw InvalidArgument("charge curve needs at least one coefficient");
  for (double c : w_) {
    if (!std::isfinite(c)) throw InvalidArgument("charge curve coefficient not finite");
  }
  double prev = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double b = i * kGridStepPct;
    const double t = time_from_empty_min(b);
    if (!(t > prev)) {
      throw InvariantViolation("charge curve not strictly increasing near " +
                               std::to_string(b) + "%");
    }
    prev = t;
  }
}

double ChargeCurve::time_from_empty_min(double soc_pct) const {
  // Horner on t(b) = b * (w0 + b*(w1 + ...)).
  double acc = 0.0;
  for (auto it = w_.rbegin(); it != w_.rend(); ++it) {
    acc = acc * soc_pct + *it;
  }
  return acc * soc_pct;
}

ChargeCurve ChargeCurve::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("w") || !j.at("w").is_array()) {
    throw ParseError("charge curve JSON must be an object with array field 'w'");
  }
  std::vector<double> w;
  for (const auto& c : j.at("w")) {
    if (!c.is_number()) throw ParseError("charge curve 'w' entries must be numbers");
    w.push_back(c.get<double>());
  }
  return ChargeCurve(std::move(w));
}

nlohmann::json ChargeCurve::to_json() const { return nlohmann::json{{"w", w_}}; }

ChargeCurve ChargeCurve::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open curve file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return from_json(j);
}

void ChargeCurve::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open file for writing: " + path);
  out << to_json().dump(2) << '\n';
}

double charge_time_min(const ChargeCurve& curve, double b_i_pct, double b_f_pct) {
  if (!(b_i_pct >= 0.0) || !(b_f_pct <= 100.0) || b_i_pct > b_f_pct) {
    throw InvalidArgument("charge_time_min requires 0 <= b_i <= b_f <= 100");
  }
  return curve.time_from_empty_min(b_f_pct) - curve.time_from_empty_min(b_i_pct);
}

double soc_after_charging(const ChargeCurve& curve, double b_i_pct, double minutes) {
  if (!(b_i_pct >= 0.0) || !(b_i_pct <= 100.0)) {
    throw InvalidArgument("soc_after_charging: b_i out of [0, 100]");
  }
  if (!(minutes >= 0.0)) {
    throw InvalidArgument("soc_after_charging: minutes must be nonnegative");
  }
  if (minutes == 0.0) return b_i_pct;
  if (charge_time_min(curve, b_i_pct, 100.0) <= minutes) return 100.0;
  double lo = b_i_pct, hi = 100.0;
  while (hi - lo > kBisectTolPct) {
    const double mid = 0.5 * (lo + hi);
    if (charge_time_min(curve, b_i_pct, mid) < minutes) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ChargeCurve fit_charge_curve(const std::vector<ChargeSample>& samples,
                             double ridge_lambda, const std::vector<int>& degrees) {
  if (samples.size() < 8) {
    throw InsufficientData("charge-curve fit needs at least 8 samples");
  }
  if (!(ridge_lambda >= 0.0)) throw InvalidArgument("ridge_lambda must be >= 0");
  if (degrees.empty()) throw InvalidArgument("no candidate degrees");
  std::vector<ChargeSample> pts(samples.begin(), samples.end());
  std::sort(pts.begin(), pts.end(),
            [](const ChargeSample& a, const ChargeSample& b) { return a.soc_pct < b.soc_pct; });
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].soc_pct < 0.0 || pts[i].soc_pct > 100.0 || pts[i].minutes_from_empty < 0.0) {
      throw InsufficientData("charge sample out of range");
    }
    if (i > 0) {
      if (pts[i].soc_pct == pts[i - 1].soc_pct) {
        throw InsufficientData("duplicate SoC value in charge samples");
      }
      if (pts[i].minutes_from_empty < pts[i - 1].minutes_from_empty) {
        throw InsufficientData("charge-sample times must be nondecreasing in SoC");
      }
    }
  }

  const int n = static_cast<int>(pts.size());
  double best_score = std::numeric_limits<double>::infinity();
  int best_degree = -1;
  std::vector<double> best_w;

  for (int degree : degrees) {
    if (degree < 1) throw InvalidArgument("candidate degree must be >= 1");
    if (degree >= n) continue;  // not enough data to cross-validate this degree
    Eigen::MatrixXd x(n, degree);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      const double u = pts[i].soc_pct / 100.0;
      double p = u;
      for (int k = 0; k < degree; ++k) {
        x(i, k) = p;
        p *= u;
      }
      y(i) = pts[i].minutes_from_empty;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Eigen::VectorXd shrink(sv.size());
    for (int k = 0; k < sv.size(); ++k) {
      const double s2 = sv(k) * sv(k) + ridge_lambda;
      shrink(k) = s2 > 0.0 ? sv(k) / s2 : 0.0;
    }
    const Eigen::VectorXd uty = svd.matrixU().transpose() * y;
    const Eigen::VectorXd w_scaled = svd.matrixV() * shrink.cwiseProduct(uty).eval();
    const Eigen::VectorXd fitted = x * w_scaled;

    // LOOCV via the hat-matrix diagonal: h_ii = sum_k U_ik^2 s_k^2/(s_k^2+l).
    double score = 0.0;
    bool degenerate = false;
    for (int i = 0; i < n; ++i) {
      double hii = 0.0;
      for (int k = 0; k < sv.size(); ++k) {
        const double s2 = sv(k) * sv(k);
        const double uik = svd.matrixU()(i, k);
        hii += uik * uik * (s2 / (s2 + ridge_lambda));
      }
      const double denom = 1.0 - hii;
      if (denom <= 1e-12) {
        degenerate = true;
        break;
      }
      const double e = (y(i) - fitted(i)) / denom;
      score += e * e;
    }
    if (degenerate) continue;
    if (score < best_score - 1e-12) {
      best_score = score;
      best_degree = degree;
      best_w.assign(w_scaled.data(), w_scaled.data() + w_scaled.size());
    }
  }

  if (best_degree < 0) {
    throw InsufficientData("no candidate degree could be cross-validated");
  }
  // Undo basis scaling: coefficient for b^(k+1) is w_scaled[k] / 100^(k+1).
  std::vector<double> w(best_w.size());
  double scale = 100.0;
  for (std::size_t k = 0; k < best_w.size(); ++k) {
    w[k] = best_w[k] / scale;
    scale *= 100.0;
  }
  try {
    return ChargeCurve(std::move(w));
  } catch (const InvariantViolation& e) {
    throw NonMonotoneFit(std::string("fitted curve rejected: ") + e.what());
  }
}

const std::vector<ChargeSample>& default_charge_samples() {
  static const std::vector<ChargeSample> samples = {
      {0.0, 0.0},    {5.0, 1.32},   {10.0, 2.51},  {20.0, 4.97},
      {30.0, 7.88},  {40.0, 11.31}, {50.0, 15.14}, {60.0, 19.25},
      {70.0, 23.82}, {80.0, 29.49}, {90.0, 37.6},  {100.0, 50.46},
  };
  return samples;
}

const ChargeCurve& default_charge_curve() {
  static const ChargeCurve curve =
      fit_charge_curve(default_charge_samples(), 1e-9, {4, 5, 6});
  return curve;
}

std::vector<ChargeSample> load_charge_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open charge-sample file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  std::vector<ChargeSample> samples;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b)) {
      throw ParseError(path + ": row " + std::to_string(row) + ": expected 'soc_pct,minutes'");
    }
    try {
      samples.push_back({std::stod(a), std::stod(b)});
    } catch (const std::exception&) {
      throw ParseError(path + ": row " + std::to_string(row) + ": invalid number");
    }
  }
  return samples;
}

}  // namespace vega
