#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vdlab/types.hpp"

namespace vdlab {

struct DatasetRow {
  double t = 0.0;
  PoseState pose;
  VelocityState vel;
  ControlInput input;
  int session = 0;
};

// Time-ordered telemetry. Timestamps are strictly increasing within a
// session and spaced 1/rate_hz apart.
struct Dataset {
  double rate_hz = 50.0;
  std::vector<DatasetRow> rows;

  double ts() const { return 1.0 / rate_hz; }
  std::size_t size() const { return rows.size(); }
};

// Distinct ingestion failures; message carries the offending row/field.
struct DataError : std::runtime_error {
  enum class Kind { SchemaMismatch, NonMonotoneTime, NanField, Parse };
  Kind kind;
  DataError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// CSV schema (documented, bit-exact):
//   t,x,y,theta,vx,vy,omega,throttle,steer,dthrottle,dsteer,session
void save_csv(const Dataset& dataset, const std::string& path);
Dataset load_csv(const std::string& path);

// Contiguous slice [skip, skip+count); count == 0 keeps everything after skip.
Dataset excerpt(const Dataset& dataset, std::size_t skip, std::size_t count);

// A window instance starts at row `start` and spans tau+1 history rows plus
// the observed next row used as the prediction target.
struct WindowSet {
  const Dataset* data = nullptr;
  int tau = 0;
  std::vector<int> starts;

  std::size_t size() const { return starts.size(); }
  int history_len() const { return tau + 1; }
  int target_row(int w) const { return starts[static_cast<std::size_t>(w)] + tau + 1; }
};

// Enumerates every window whose rows share a session and whose history rows
// all satisfy v_x >= vx_floor. Stride 1.
WindowSet build_windows(const Dataset& dataset, int tau, double vx_floor);

// Window-level random split; validation gets round(fraction * n) windows.
std::pair<WindowSet, WindowSet> split(const WindowSet& windows, double validation_fraction,
                                      std::uint64_t seed);

}  // namespace vdlab
