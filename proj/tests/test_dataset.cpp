#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "vdlab/dataset.hpp"
#include "vdlab/rng.hpp"

using namespace vdlab;

namespace {

Dataset synthetic_dataset(int rows, int sessions = 1) {
  Dataset ds;
  ds.rate_hz = 50.0;
  Rng rng(3);
  for (int s = 0; s < sessions; ++s) {
    for (int i = 0; i < rows; ++i) {
      DatasetRow r;
      r.t = i * 0.02;
      r.pose = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-3.0, 3.0)};
      r.vel.v_x = rng.uniform(0.5, 3.0);
      r.vel.v_y = rng.uniform(-0.2, 0.2);
      r.vel.omega = rng.uniform(-2.0, 2.0);
      r.vel.throttle = rng.uniform(0.0, 1.0);
      r.vel.steer = rng.uniform(-0.3, 0.3);
      r.input.dthrottle = rng.uniform(-0.05, 0.05);
      r.input.dsteer = rng.uniform(-0.02, 0.02);
      r.session = s;
      ds.rows.push_back(r);
    }
  }
  return ds;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("csv round trip is lossless to 1e-9") {
  const Dataset ds = synthetic_dataset(200, 2);
  const std::string path = temp_path("vdlab_roundtrip.csv");
  save_csv(ds, path);
  const Dataset back = load_csv(path);
  REQUIRE(back.rows.size() == ds.rows.size());
  CHECK(back.rate_hz == doctest::Approx(ds.rate_hz).epsilon(1e-9));
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    CHECK(back.rows[i].t == doctest::Approx(ds.rows[i].t).epsilon(1e-9));
    CHECK(back.rows[i].pose.x == doctest::Approx(ds.rows[i].pose.x).epsilon(1e-9));
    CHECK(back.rows[i].pose.theta == doctest::Approx(ds.rows[i].pose.theta).epsilon(1e-9));
    CHECK(back.rows[i].vel.v_x == doctest::Approx(ds.rows[i].vel.v_x).epsilon(1e-9));
    CHECK(back.rows[i].vel.steer == doctest::Approx(ds.rows[i].vel.steer).epsilon(1e-9));
    CHECK(back.rows[i].input.dsteer == doctest::Approx(ds.rows[i].input.dsteer).epsilon(1e-9));
    CHECK(back.rows[i].session == ds.rows[i].session);
  }
  std::remove(path.c_str());
}

TEST_CASE("csv: NaN field error names the row") {
  const std::string path = temp_path("vdlab_nan.csv");
  {
    std::ofstream out(path);
    out << "t,x,y,theta,vx,vy,omega,throttle,steer,dthrottle,dsteer,session\n";
    out << "0,0,0,0,1.0,0,0,0.5,0,0,0,0\n";
    out << "0.02,0,0,0,nan,0,0,0.5,0,0,0,0\n";
  }
  try {
    load_csv(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.kind == DataError::Kind::NanField);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    CHECK(std::string(e.what()).find("vx") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("csv: shuffled timestamps raise the monotonicity error") {
  const std::string path = temp_path("vdlab_shuffled.csv");
  {
    std::ofstream out(path);
    out << "t,x,y,theta,vx,vy,omega,throttle,steer,dthrottle,dsteer,session\n";
    out << "0.04,0,0,0,1.0,0,0,0.5,0,0,0,0\n";
    out << "0.02,0,0,0,1.0,0,0,0.5,0,0,0,0\n";
  }
  try {
    load_csv(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.kind == DataError::Kind::NonMonotoneTime);
  }
  std::remove(path.c_str());
}

TEST_CASE("csv: header and column-count schema errors") {
  const std::string path = temp_path("vdlab_schema.csv");
  {
    std::ofstream out(path);
    out << "time,x,y\n";
  }
  try {
    load_csv(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.kind == DataError::Kind::SchemaMismatch);
  }
  {
    std::ofstream out(path);
    out << "t,x,y,theta,vx,vy,omega,throttle,steer,dthrottle,dsteer,session\n";
    out << "0,0,0,0,1.0,0,0\n";
  }
  try {
    load_csv(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.kind == DataError::Kind::SchemaMismatch);
  }
  std::remove(path.c_str());
}

TEST_CASE("windows: session boundaries and the v_x floor are respected") {
  Dataset ds = synthetic_dataset(10, 2);  // rows 0..9 session 0, 10..19 session 1
  ds.rows[4].vel.v_x = 0.01;              // under the floor
  const WindowSet ws = build_windows(ds, 2, 0.05);
  for (const int s : ws.starts) {
    const int session = ds.rows[static_cast<std::size_t>(s)].session;
    CHECK(ds.rows[static_cast<std::size_t>(s + 3)].session == session);
    for (int j = 0; j <= 2; ++j) {
      CHECK(ds.rows[static_cast<std::size_t>(s + j)].vel.v_x >= 0.05);
    }
  }
  // starts whose history touches row 4, and starts crossing the session seam
  for (const int bad : {2, 3, 4, 7, 8, 9}) {
    CHECK(std::find(ws.starts.begin(), ws.starts.end(), bad) == ws.starts.end());
  }
  // start 1 only uses row 4 as its target, which is allowed
  CHECK(std::find(ws.starts.begin(), ws.starts.end(), 1) != ws.starts.end());
}

TEST_CASE("split: sizes, determinism, disjointness") {
  const Dataset ds = synthetic_dataset(1002);  // 1000 windows at tau=1
  const WindowSet ws = build_windows(ds, 1, 0.05);
  REQUIRE(ws.size() == 1000);

  const auto [train1, val1] = split(ws, 0.2, 99);
  CHECK(train1.size() == 800);
  CHECK(val1.size() == 200);

  const auto [train2, val2] = split(ws, 0.2, 99);
  CHECK(train1.starts == train2.starts);
  CHECK(val1.starts == val2.starts);

  const auto [train3, val3] = split(ws, 0.2, 100);
  CHECK(train1.starts != train3.starts);

  std::set<int> seen(train1.starts.begin(), train1.starts.end());
  for (const int s : val1.starts) CHECK(seen.count(s) == 0);
  CHECK(seen.size() + val1.starts.size() == 1000);
}

TEST_CASE("split: rejects degenerate fractions and tiny sets") {
  const Dataset ds = synthetic_dataset(8);
  const WindowSet ws = build_windows(ds, 1, 0.05);
  CHECK_THROWS_AS(split(ws, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(ws, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(ws, 0.01, 1), std::invalid_argument);  // no validation window
}

TEST_CASE("excerpt slices rows") {
  const Dataset ds = synthetic_dataset(100);
  const Dataset mid = excerpt(ds, 10, 20);
  REQUIRE(mid.rows.size() == 20);
  CHECK(mid.rows.front().t == ds.rows[10].t);
  const Dataset tail = excerpt(ds, 90, 0);
  CHECK(tail.rows.size() == 10);
  const Dataset none = excerpt(ds, 200, 10);
  CHECK(none.rows.empty());
}
