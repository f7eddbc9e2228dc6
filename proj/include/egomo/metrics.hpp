#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "egomo/error.hpp"
#include "egomo/geometry.hpp"
#include "egomo/normal_flow.hpp"
#include "egomo/raster.hpp"
#include "egomo/reconstruction.hpp"

namespace egomo {

/// Neumaier-compensated sum.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct AngularError {
  double mean_deg = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;  // pairs with a zero-norm vector
};

template <typename V>
AngularError aae_detail(const std::vector<V>& est, const std::vector<V>& truth) {
  if (est.size() != truth.size())
    throw Error(Errc::LengthMismatch, "aae: argument lengths differ");
  KahanSum sum;
  AngularError out;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double ne = est[i].norm();
    const double nt = truth[i].norm();
    if (!(ne > 0.0) || !(nt > 0.0)) {
      ++out.skipped;
      continue;
    }
    const auto a = (est[i] / ne).eval();
    const auto b = (truth[i] / nt).eval();
    sum.add(rad2deg(2.0 * std::atan2((a - b).norm(), (a + b).norm())));
    ++out.used;
  }
  out.mean_deg = out.used ? sum.value() / static_cast<double>(out.used) : 0.0;
  return out;
}

/// Average angular error in degrees; zero-norm pairs are skipped.
template <typename V>
double aae(const std::vector<V>& est, const std::vector<V>& truth) {
  return aae_detail(est, truth).mean_deg;
}

inline double aae(const Vec3& est, const Vec3& truth) {
  return aae(std::vector<Vec3>{est}, std::vector<Vec3>{truth});
}

/// Average endpoint error.
template <typename V>
double epe(const std::vector<V>& est, const std::vector<V>& truth) {
  if (est.size() != truth.size())
    throw Error(Errc::LengthMismatch, "epe: argument lengths differ");
  if (est.empty()) return 0.0;
  KahanSum sum;
  for (std::size_t i = 0; i < est.size(); ++i) sum.add((est[i] - truth[i]).norm());
  return sum.value() / static_cast<double>(est.size());
}

inline double epe(const Vec3& est, const Vec3& truth) { return (est - truth).norm(); }

namespace detail {

inline void check_same(const ImageF& est, const ImageF& truth, const Mask* mask) {
  if (!est.same_shape(truth) || (mask != nullptr && !est.same_shape(*mask)))
    throw Error(Errc::InconsistentDimensions, "metric rasters differ in size");
}

}  // namespace detail

/// Mean absolute difference over masked pixels (all pixels if mask is null).
inline double mae(const ImageF& est, const ImageF& truth, const Mask* mask = nullptr) {
  detail::check_same(est, truth, mask);
  KahanSum sum;
  std::size_t n = 0;
  for (std::size_t k = 0; k < est.data().size(); ++k) {
    if (mask != nullptr && !mask->data()[k]) continue;
    sum.add(std::abs(est.data()[k] - truth.data()[k]));
    ++n;
  }
  if (n == 0) throw Error(Errc::EmptyMask, "mae: mask selects no pixels");
  return sum.value() / static_cast<double>(n);
}

inline double mae(const std::vector<double>& est, const std::vector<double>& truth) {
  if (est.size() != truth.size()) throw Error(Errc::LengthMismatch, "mae: lengths differ");
  if (est.empty()) throw Error(Errc::EmptyMask, "mae: no points");
  KahanSum sum;
  for (std::size_t i = 0; i < est.size(); ++i) sum.add(std::abs(est[i] - truth[i]));
  return sum.value() / static_cast<double>(est.size());
}

/// Fraction of masked pixels whose absolute error exceeds `threshold`.
inline double pobp(const ImageF& est, const ImageF& truth, const Mask* mask = nullptr,
                   double threshold = 1.0) {
  detail::check_same(est, truth, mask);
  std::size_t n = 0;
  std::size_t bad = 0;
  for (std::size_t k = 0; k < est.data().size(); ++k) {
    if (mask != nullptr && !mask->data()[k]) continue;
    ++n;
    bad += std::abs(est.data()[k] - truth.data()[k]) > threshold ? 1 : 0;
  }
  if (n == 0) throw Error(Errc::EmptyMask, "pobp: mask selects no pixels");
  return static_cast<double>(bad) / static_cast<double>(n);
}

/// Bad masked pixels as a fraction of the whole raster.
inline double pobp_full(const ImageF& est, const ImageF& truth, const Mask& mask,
                        double threshold = 1.0) {
  detail::check_same(est, truth, &mask);
  std::size_t bad = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < est.data().size(); ++k) {
    if (!mask.data()[k]) continue;
    ++n;
    bad += std::abs(est.data()[k] - truth.data()[k]) > threshold ? 1 : 0;
  }
  if (n == 0) throw Error(Errc::EmptyMask, "pobp: mask selects no pixels");
  return static_cast<double>(bad) / static_cast<double>(est.data().size());
}

inline double pobp(const std::vector<double>& est, const std::vector<double>& truth,
                   double threshold = 1.0) {
  if (est.size() != truth.size()) throw Error(Errc::LengthMismatch, "pobp: lengths differ");
  if (est.empty()) throw Error(Errc::EmptyMask, "pobp: no points");
  std::size_t bad = 0;
  for (std::size_t i = 0; i < est.size(); ++i) bad += std::abs(est[i] - truth[i]) > threshold;
  return static_cast<double>(bad) / static_cast<double>(est.size());
}

inline double density(const NormalFlowField& nf) {
  const double total = static_cast<double>(nf.width) * nf.height;
  return total > 0.0 ? static_cast<double>(nf.size()) / total : 0.0;
}

inline double density(const SparseStructure& s) {
  const double total = static_cast<double>(s.width) * s.height;
  return total > 0.0 ? static_cast<double>(s.valid_count()) / total : 0.0;
}

struct ErrorReport {
  static constexpr int kSchemaVersion = 1;

  double trans_aae = 0.0;  // degrees
  double rot_aae = 0.0;    // degrees
  double rot_epe = 0.0;    // degrees/frame
  std::optional<double> mae;
  std::optional<double> pobp;  // fraction
  double density = 0.0;
  int n_points = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["trans_aae_deg"] = trans_aae;
    j["rot_aae_deg"] = rot_aae;
    j["rot_epe_deg_per_frame"] = rot_epe;
    j["mae"] = mae ? nlohmann::json(*mae) : nlohmann::json(nullptr);
    j["pobp"] = pobp ? nlohmann::json(*pobp) : nlohmann::json(nullptr);
    j["density"] = density;
    j["n_points"] = n_points;
    return j;
  }

  static std::string csv_header() {
    return "schema_version,trans_aae_deg,rot_aae_deg,rot_epe_deg_per_frame,mae,pobp,density,"
           "n_points";
  }

  std::string csv_row() const {
    std::ostringstream os;
    os.precision(17);
    os << kSchemaVersion << ',' << trans_aae << ',' << rot_aae << ',' << rot_epe << ',';
    if (mae) os << *mae;
    os << ',';
    if (pobp) os << *pobp;
    os << ',' << density << ',' << n_points;
    return os.str();
  }
};

/// Motion errors of one estimate; rotation errors use the rate vectors.
inline ErrorReport motion_errors(const RigidMotion& est, const RigidMotion& truth) {
  ErrorReport r;
  r.trans_aae = aae(est.t_axis, truth.t_axis);
  r.rot_aae = aae(est.w, truth.w);
  r.rot_epe = rad2deg(epe(est.w, truth.w));
  return r;
}

}  // namespace egomo
