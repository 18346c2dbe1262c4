#pragma once

#include <cstdint>
#include <vector>

namespace vdlab {

// Feature layout per history step: (v_x, v_y, omega, throttle, steer,
// dthrottle, dsteer). The order is fixed and serialized with checkpoints.
inline constexpr int kFeaturesPerStep = 7;

// Static architecture of the coefficient-estimation network. With
// gru_layers == 0 the history window is flattened into one dense input of
// width (tau+1)*7; otherwise a stacked GRU consumes the sequence and its
// final hidden state feeds the dense stack.
struct NetworkShape {
  int tau = 2;                     // history length; window holds tau+1 steps
  int gru_layers = 0;
  int gru_width = 0;               // hidden size of every GRU layer
  std::vector<int> hidden;         // dense hidden layer sizes (Mish)
  int out = 17;                    // linear output width

  int steps() const { return tau + 1; }
  int flat_input() const { return steps() * kFeaturesPerStep; }
  int dense_input() const { return gru_layers > 0 ? gru_width : flat_input(); }

  bool operator==(const NetworkShape&) const = default;
};

std::int64_t network_param_count(const NetworkShape& shape);

// Kaiming-style uniform fan-in init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
// weights and biases. zero_output_layer zeroes the final dense layer so the
// raw outputs start at 0 (guarded coefficients start at interval midpoints).
std::vector<double> network_init(const NetworkShape& shape, std::uint64_t seed,
                                 bool zero_output_layer);

// Scratch recorded by the forward pass; owned by the caller so batch loops
// can keep one per thread.
struct NetworkCache {
  // dense activations: act[0] is the dense input, act[i] the output of dense
  // layer i-1; pre[i] the pre-activation of dense layer i.
  std::vector<std::vector<double>> act;
  std::vector<std::vector<double>> pre;
  // GRU per (step, layer) values, indexed [t * gru_layers + l].
  std::vector<std::vector<double>> gru_r, gru_z, gru_n, gru_h;
  std::vector<double> out;
};

// x points to steps()*7 normalized features, oldest step first.
void network_forward(const NetworkShape& shape, const std::vector<double>& params,
                     const double* x, NetworkCache& cache);

// Accumulates d(out . adj_out)/d(params) into grad (same length as params).
// Requires the cache of the matching forward call.
void network_backward(const NetworkShape& shape, const std::vector<double>& params,
                      const double* x, const NetworkCache& cache, const double* adj_out,
                      std::vector<double>& grad);

double mish(double z);
double mish_derivative(double z);

}  // namespace vdlab
