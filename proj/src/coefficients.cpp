#include "vdlab/coefficients.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vdlab {

void CoefficientBounds::validate() const {
  for (int i = 0; i < kNumCoef; ++i) {
    const double lo = lower[static_cast<std::size_t>(i)];
    const double hi = upper[static_cast<std::size_t>(i)];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
      throw std::invalid_argument("CoefficientBounds: bad interval for " +
                                  std::string(kCoefNames[static_cast<std::size_t>(i)]));
    }
  }
}

bool CoefficientBounds::contains(const UnknownCoefficients& c) const {
  for (int i = 0; i < kNumCoef; ++i) {
    if (!(c[i] > lower[static_cast<std::size_t>(i)] && c[i] < upper[static_cast<std::size_t>(i)]))
      return false;
  }
  return true;
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

UnknownCoefficients physics_guard(const std::array<double, kNumCoef>& z,
                                  const CoefficientBounds& bounds) {
  UnknownCoefficients out;
  for (int i = 0; i < kNumCoef; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double lo = bounds.lower[u];
    const double hi = bounds.upper[u];
    double v = stable_sigmoid(z[u]) * (hi - lo) + lo;
    // Saturated sigmoids round to the bound itself; keep the open interval.
    v = std::min(std::max(v, std::nextafter(lo, hi)), std::nextafter(hi, lo));
    out[i] = v;
  }
  return out;
}

std::array<double, kNumCoef> physics_guard_grad(const std::array<double, kNumCoef>& z,
                                                const CoefficientBounds& bounds,
                                                const std::array<double, kNumCoef>& upstream) {
  std::array<double, kNumCoef> out{};
  for (std::size_t i = 0; i < kNumCoef; ++i) {
    const double s = stable_sigmoid(z[i]);
    out[i] = upstream[i] * s * (1.0 - s) * (bounds.upper[i] - bounds.lower[i]);
  }
  return out;
}

CoefficientBounds sim_nominal_bounds(const UnknownCoefficients& ground_truth,
                                     const SimScaleRanges& extra) {
  CoefficientBounds b;
  auto halve_double = [&](int i) {
    const double v = ground_truth[i];
    if (!(v > 0.0)) {
      throw std::invalid_argument("sim_nominal_bounds: " +
                                  std::string(kCoefNames[static_cast<std::size_t>(i)]) +
                                  " must be positive for the halve/double rule");
    }
    b.lower[static_cast<std::size_t>(i)] = 0.5 * v;
    b.upper[static_cast<std::size_t>(i)] = 2.0 * v;
  };
  auto set = [&](int i, double lo, double hi) {
    b.lower[static_cast<std::size_t>(i)] = lo;
    b.upper[static_cast<std::size_t>(i)] = hi;
  };

  for (int i : {kBf, kBr}) set(i, 5.0, 30.0);
  for (int i : {kCf, kCr}) set(i, 0.5, 2.0);
  for (int i : {kEf, kEr}) set(i, -2.0, 0.0);
  for (int i : {kDf, kDr}) set(i, extra.d_lower, extra.d_upper);
  for (int i : {kGf, kGr}) set(i, extra.g_lower, extra.g_upper);
  for (int i : {kKf, kKr}) set(i, extra.k_lower, extra.k_upper);
  for (int i : {kCm1, kCm2, kCr0, kCd, kIz}) halve_double(i);

  b.validate();
  return b;
}

CoefficientBounds real_nominal_bounds() {
  CoefficientBounds b;
  auto set = [&](int i, double lo, double hi) {
    b.lower[static_cast<std::size_t>(i)] = lo;
    b.upper[static_cast<std::size_t>(i)] = hi;
  };
  for (int i : {kBf, kBr}) set(i, 5.0, 30.0);
  for (int i : {kCf, kCr}) set(i, 0.5, 2.0);
  for (int i : {kDf, kDr}) set(i, 100.0, 10000.0);
  for (int i : {kEf, kEr}) set(i, -2.0, 0.0);
  for (int i : {kGf, kGr}) set(i, -0.1, 0.1);
  for (int i : {kKf, kKr}) set(i, -200.0, 200.0);
  set(kCm1, 500.0, 2000.0);
  set(kCm2, 1e-6, 1.0);  // open-interval floor instead of 0.0
  set(kCr0, 0.1, 1.4);
  set(kCd, 0.1, 1.0);
  set(kIz, 500.0, 2000.0);
  b.validate();
  return b;
}

}  // namespace vdlab
