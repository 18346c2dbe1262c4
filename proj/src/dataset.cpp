#include "vdlab/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vdlab/rng.hpp"

namespace vdlab {

namespace {

constexpr const char* kHeader = "t,x,y,theta,vx,vy,omega,throttle,steer,dthrottle,dsteer,session";
constexpr int kColumns = 12;

double parse_double(const std::string& field, std::size_t row, const char* name) {
  double out = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw DataError(DataError::Kind::Parse, "row " + std::to_string(row) + ": field '" + name +
                                                "' is not a number: '" + field + "'");
  }
  if (std::isnan(out)) {
    throw DataError(DataError::Kind::NanField,
                    "row " + std::to_string(row) + ": field '" + name + "' is NaN");
  }
  return out;
}

}  // namespace

void save_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  out << kHeader << '\n';
  char buf[512];
  for (const auto& r : dataset.rows) {
    std::snprintf(buf, sizeof(buf),
                  "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n", r.t,
                  r.pose.x, r.pose.y, r.pose.theta, r.vel.v_x, r.vel.v_y, r.vel.omega,
                  r.vel.throttle, r.vel.steer, r.input.dthrottle, r.input.dsteer, r.session);
    out << buf;
  }
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::Parse, "load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(DataError::Kind::SchemaMismatch, "load_csv: empty file " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw DataError(DataError::Kind::SchemaMismatch,
                    "load_csv: header mismatch, expected '" + std::string(kHeader) + "'");
  }

  Dataset ds;
  std::size_t row_no = 0;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_no;

    fields.clear();
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(pos));
        break;
      }
      fields.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    if (static_cast<int>(fields.size()) != kColumns) {
      throw DataError(DataError::Kind::SchemaMismatch,
                      "row " + std::to_string(row_no) + ": expected " + std::to_string(kColumns) +
                          " columns, got " + std::to_string(fields.size()));
    }

    DatasetRow r;
    r.t = parse_double(fields[0], row_no, "t");
    r.pose.x = parse_double(fields[1], row_no, "x");
    r.pose.y = parse_double(fields[2], row_no, "y");
    r.pose.theta = parse_double(fields[3], row_no, "theta");
    r.vel.v_x = parse_double(fields[4], row_no, "vx");
    r.vel.v_y = parse_double(fields[5], row_no, "vy");
    r.vel.omega = parse_double(fields[6], row_no, "omega");
    r.vel.throttle = parse_double(fields[7], row_no, "throttle");
    r.vel.steer = parse_double(fields[8], row_no, "steer");
    r.input.dthrottle = parse_double(fields[9], row_no, "dthrottle");
    r.input.dsteer = parse_double(fields[10], row_no, "dsteer");
    int session = 0;
    {
      const std::string& f = fields[11];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), session);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw DataError(DataError::Kind::Parse,
                        "row " + std::to_string(row_no) + ": bad session id '" + f + "'");
      }
    }
    r.session = session;

    if (!ds.rows.empty() && ds.rows.back().session == r.session && !(r.t > ds.rows.back().t)) {
      throw DataError(DataError::Kind::NonMonotoneTime,
                      "row " + std::to_string(row_no) + ": timestamp " + std::to_string(r.t) +
                          " does not increase within session " + std::to_string(r.session));
    }
    ds.rows.push_back(r);
  }

  // Recover the sampling rate from the first in-session spacing.
  for (std::size_t i = 1; i < ds.rows.size(); ++i) {
    if (ds.rows[i].session == ds.rows[i - 1].session) {
      ds.rate_hz = 1.0 / (ds.rows[i].t - ds.rows[i - 1].t);
      break;
    }
  }
  return ds;
}

Dataset excerpt(const Dataset& dataset, std::size_t skip, std::size_t count) {
  Dataset out;
  out.rate_hz = dataset.rate_hz;
  if (skip >= dataset.rows.size()) return out;
  const std::size_t end =
      count == 0 ? dataset.rows.size() : std::min(dataset.rows.size(), skip + count);
  out.rows.assign(dataset.rows.begin() + static_cast<std::ptrdiff_t>(skip),
                  dataset.rows.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

WindowSet build_windows(const Dataset& dataset, int tau, double vx_floor) {
  if (tau < 0) throw std::invalid_argument("build_windows: tau must be >= 0");
  WindowSet ws;
  ws.data = &dataset;
  ws.tau = tau;
  const int span = tau + 2;  // history rows plus the target row
  const int n = static_cast<int>(dataset.rows.size());
  for (int i = 0; i + span <= n; ++i) {
    bool ok = true;
    const int session = dataset.rows[static_cast<std::size_t>(i)].session;
    for (int j = 0; j < span && ok; ++j) {
      const auto& r = dataset.rows[static_cast<std::size_t>(i + j)];
      if (r.session != session) ok = false;
      if (j <= tau && r.vel.v_x < vx_floor) ok = false;
    }
    if (ok) ws.starts.push_back(i);
  }
  return ws;
}

std::pair<WindowSet, WindowSet> split(const WindowSet& windows, double validation_fraction,
                                      std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("split: validation_fraction must lie in (0, 1)");
  }
  const std::size_t n = windows.size();
  const auto n_val = static_cast<std::size_t>(
      std::lround(validation_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) {
    throw std::invalid_argument("split: dataset too small to give both sides a window");
  }

  std::vector<int> order = windows.starts;
  Rng rng(seed);
  rng.shuffle(order);

  WindowSet train{windows.data, windows.tau, {}};
  WindowSet val{windows.data, windows.tau, {}};
  val.starts.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  train.starts.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(train.starts.begin(), train.starts.end());
  std::sort(val.starts.begin(), val.starts.end());
  return {train, val};
}

}  // namespace vdlab
