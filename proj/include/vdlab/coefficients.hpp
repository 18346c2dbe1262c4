#pragma once

#include <array>

#include "vdlab/types.hpp"

namespace vdlab {

// Per-coefficient nominal intervals, aligned with CoefIndex. Immutable after
// construction; lower[i] < upper[i] is enforced.
struct CoefficientBounds {
  std::array<double, kNumCoef> lower{};
  std::array<double, kNumCoef> upper{};

  void validate() const;  // throws std::invalid_argument on violation
  double width(int i) const { return upper[static_cast<std::size_t>(i)] - lower[static_cast<std::size_t>(i)]; }
  double midpoint(int i) const { return 0.5 * (lower[static_cast<std::size_t>(i)] + upper[static_cast<std::size_t>(i)]); }
  bool contains(const UnknownCoefficients& c) const;
};

double stable_sigmoid(double z);

// Bounded squashing of the network's raw outputs into the nominal intervals:
// out[i] = sigmoid(z[i]) * (upper[i] - lower[i]) + lower[i], nudged so the
// result stays strictly inside the open interval even at saturation.
UnknownCoefficients physics_guard(const std::array<double, kNumCoef>& z,
                                  const CoefficientBounds& bounds);

// Element-wise backward pass: upstream[i] * sigmoid'(z[i]) * width[i].
std::array<double, kNumCoef> physics_guard_grad(const std::array<double, kNumCoef>& z,
                                                const CoefficientBounds& bounds,
                                                const std::array<double, kNumCoef>& upstream);

// Ranges for the Pacejka entries Table-style literature bounds do not cover
// at simulator scale; recorded in the default run configuration.
struct SimScaleRanges {
  double d_lower = 0.05, d_upper = 0.5;    // peak force, N
  double g_lower = -0.1, g_upper = 0.1;    // slip offset, rad
  double k_lower = -0.05, k_upper = 0.05;  // force offset, N
};

// Simulator regime: drivetrain coefficients and I_z get [v/2, 2v] around the
// ground truth; B/C/E get literature ranges; D/G/K get sim-scale ranges.
CoefficientBounds sim_nominal_bounds(const UnknownCoefficients& ground_truth,
                                     const SimScaleRanges& extra = {});

// Full-scale vehicle regime.
CoefficientBounds real_nominal_bounds();

}  // namespace vdlab
