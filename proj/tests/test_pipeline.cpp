// Copyright 2026 The cpwloss Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "cpwloss/cache.hpp"
#include "cpwloss/config.hpp"
#include "cpwloss/csvio.hpp"
#include "cpwloss/error.hpp"
#include "cpwloss/lossfit.hpp"
#include "cpwloss/pipeline.hpp"
#include "cpwloss/qdata.hpp"
#include "cpwloss/stats.hpp"
#include "cpwloss/svgplot.hpp"

using namespace cpwloss;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cpwq_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string str() const { return path.string(); }
};

std::string write_temp(const TempDir& dir, const std::string& name,
                       const std::string& content) {
  const std::string p = dir.str() + "/" + name;
  io::write_file(p, content);
  return p;
}

int run_binary(const std::string& args) {
#ifdef CPWQ_BIN
  const int status = std::system((std::string(CPWQ_BIN) + " " + args +
                                  " >/dev/null 2>&1")
                                     .c_str());
  return WEXITSTATUS(status);
#else
  (void)args;
  return -1;
#endif
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = io::Config::parse_string(
      "# comment\n"
      "w_um = 16\n"
      "g_um=8\n"
      "depths_um = 0.15, 0.5 1.2\n"
      "name = run-a # trailing comment\n");
  CHECK(cfg.get_double("w_um") == 16.0);
  CHECK(cfg.get_double("g_um") == 8.0);
  CHECK(cfg.get_string("name") == "run-a");
  const auto arr = cfg.get_array("depths_um");
  REQUIRE(arr.size() == 3);
  CHECK(arr[1] == 0.5);
  CHECK_THROWS_WITH_AS(cfg.get_double("missing_key"),
                       doctest::Contains("missing_key"), Error);
  CHECK_THROWS_AS(io::Config::parse_string("not a key value line\n"), Error);
}

TEST_CASE("content hash is stable") {
  CHECK(io::fnv1a64("abc") == 0xe71fa2190541574bULL);
  CHECK(io::hex64(0xe71fa2190541574bULL) == "e71fa2190541574b");
}

TEST_CASE("participation cache round trip") {
  TempDir dir;
  io::ParticipationCache cache(dir.str(), true);
  geometry::CpwGeometry geom;
  geom.w = 6;
  geom.g = 3;
  geom.d = 0.5;
  geom.validate_and_finalize();
  geometry::InterfaceLayerSpec layers{10.0, 10.0};
  mesh::RefinementPolicy policy;
  policy.h_edge = 0.1;
  policy.h_max = 10.0;
  const std::string key = io::ParticipationCache::key_of(geom, layers, policy);
  CHECK_FALSE(cache.lookup(key).has_value());

  participation::ParticipationVector p;
  p.p_ms_perp = 1.5e-3;
  p.p_sa_par = 9.0e-4;
  p.p_ma_perp = 3.0e-5;
  p.p_si = 0.88;
  p.p_vac = 0.115;
  p.geometry = geom;
  p.layer_spec = layers;
  cache.store(key, p);
  const auto hit = cache.lookup(key);
  REQUIRE(hit.has_value());
  CHECK(hit->p_ms_perp == p.p_ms_perp);
  CHECK(hit->p_si == p.p_si);

  // Different policy: different key.
  policy.h_edge = 0.05;
  CHECK(io::ParticipationCache::key_of(geom, layers, policy) != key);

  io::ParticipationCache disabled(dir.str(), false);
  CHECK_FALSE(disabled.lookup(key).has_value());
}

TEST_CASE("svg rendering emits a valid document") {
  io::SvgPlotSpec spec;
  spec.title = "test";
  spec.x_label = "x";
  spec.y_label = "y";
  io::SvgSeries s;
  s.name = "series";
  s.color = "#cc3333";
  for (int i = 1; i <= 10; ++i) s.points.emplace_back(i * 0.1, i * i * 1e-3);
  spec.series.push_back(s);
  spec.vline = 0.5;
  const std::string svg = io::render_svg(spec);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\"") !=
        std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);  // the marker line
}

TEST_CASE("run_solve writes the energy table") {
  TempDir dir;
  const auto cfg = io::Config::parse_string(
      "w_um = 2\ng_um = 1\nmesh_preset = fast\nadapt_rounds = 1\n");
  cli::GlobalOptions opts;
  opts.out_dir = dir.str();
  std::ostringstream log;
  cli::run_solve(cfg, opts, log);
  const std::string csv = io::read_file(dir.str() + "/solve_energy.csv");
  CHECK(csv.find("capacitance_F_per_m,") != std::string::npos);
  CHECK(csv.find("energy_J_per_m_SUBSTRATE,") != std::string::npos);
  CHECK(log.str().find("extrapolated capacitance") != std::string::npos);
}

TEST_CASE("run_solve reports missing keys by name") {
  TempDir dir;
  const auto cfg = io::Config::parse_string("g_um = 1\n");
  cli::GlobalOptions opts;
  opts.out_dir = dir.str();
  std::ostringstream log;
  CHECK_THROWS_WITH_AS(cli::run_solve(cfg, opts, log),
                       doctest::Contains("w_um"), Error);
}

TEST_CASE("doubling the domain barely moves the capacitance") {
  const auto cfg = io::Config::parse_string(
      "w_um = 2\ng_um = 1\nmesh_preset = fast\nadapt_rounds = 1\n");
  auto capacitance_at_scale = [&](double scale) {
    TempDir dir;
    cli::GlobalOptions opts;
    opts.out_dir = dir.str();
    opts.domain_scale = scale;
    std::ostringstream log;
    cli::run_solve(cfg, opts, log);
    const std::string csv = io::read_file(dir.str() + "/solve_energy.csv");
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
      const auto f = io::split_csv_line(line);
      if (f.size() == 2 && f[0] == "capacitance_F_per_m") return std::stod(f[1]);
    }
    FAIL("capacitance row missing");
    return 0.0;
  };
  const double c1 = capacitance_at_scale(1.0);
  const double c2 = capacitance_at_scale(2.0);
  CHECK(std::fabs(c2 - c1) / c1 < 0.005);
}

TEST_CASE("run_sweep single depth and determinism") {
  TempDir dir;
  const auto cfg = io::Config::parse_string(
      "w_um = 2\ng_um = 1\nphi_deg = 90\nmesh_preset = fast\n"
      "depths_um = 0.5\n");
  cli::GlobalOptions opts;
  opts.out_dir = dir.str();
  std::ostringstream log;
  cli::run_sweep(cfg, opts, log);
  const std::string csv = io::read_file(dir.str() + "/sweep_participation.csv");
  // Header plus exactly one data row.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(log.str().find("saturation_depth_um=0.5") != std::string::npos);

  // Rerun: byte-identical artifacts (cache warm the second time).
  cli::run_sweep(cfg, opts, log);
  CHECK(io::read_file(dir.str() + "/sweep_participation.csv") == csv);

  TempDir dir2;
  cli::GlobalOptions opts2;
  opts2.out_dir = dir2.str();
  opts2.no_cache = true;
  std::ostringstream log2;
  cli::run_sweep(cfg, opts2, log2);
  CHECK(io::read_file(dir2.str() + "/sweep_participation.csv") == csv);
  CHECK(fs::exists(dir.str() + "/sweep_participation.svg"));
}

TEST_CASE("sweeps size the domain for the deepest depth") {
  // The config's d_um (default 0) must not pin the domain; deep sweeps grow
  // it so the trench keeps clearance above the domain floor.
  TempDir dir;
  const auto cfg = io::Config::parse_string(
      "w_um = 2\ng_um = 1\nphi_deg = 90\nmesh_preset = fast\n"
      "depths_um = 0.3 12\n");
  cli::GlobalOptions opts;
  opts.out_dir = dir.str();
  std::ostringstream log;
  cli::run_sweep(cfg, opts, log);  // would throw if the domain stayed shallow
  const std::string csv = io::read_file(dir.str() + "/sweep_participation.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("sweeps are schedule independent") {
  const auto cfg = io::Config::parse_string(
      "w_um = 2\ng_um = 1\nphi_deg = 90\nmesh_preset = fast\n"
      "depths_um = 0.2 0.6 1.8\n");
  std::string serial_csv, threaded_csv;
  {
    TempDir dir;
    cli::GlobalOptions opts;
    opts.out_dir = dir.str();
    opts.no_cache = true;
    opts.threads = 1;
    std::ostringstream log;
    cli::run_sweep(cfg, opts, log);
    serial_csv = io::read_file(dir.str() + "/sweep_participation.csv");
  }
  {
    TempDir dir;
    cli::GlobalOptions opts;
    opts.out_dir = dir.str();
    opts.no_cache = true;
    opts.threads = 3;
    std::ostringstream log;
    cli::run_sweep(cfg, opts, log);
    threaded_csv = io::read_file(dir.str() + "/sweep_participation.csv");
  }
  CHECK(serial_csv == threaded_csv);
}

namespace {

// Synthetic measurement set from known loss factors over a well-conditioned
// participation matrix.
struct SyntheticFit {
  std::string measurements_path;
  std::string participations_path;
  lossfit::LossFactorVector x_true;
};

SyntheticFit make_synthetic(const TempDir& dir, int n_geoms, bool collinear) {
  SyntheticFit out;
  out.x_true.x_ms = 1.0e-4;
  out.x_true.x_sa = 5.7e-5;
  out.x_true.x_ma = 7.8e-4;
  out.x_true.x_si = 1.2e-7;
  stats::Rng rng(777);
  std::ostringstream parts;
  parts << "geometry_id,P_MS,P_SA,P_MA,P_Si\n";
  std::vector<qdata::DeviceRecord> records;
  for (int i = 0; i < n_geoms; ++i) {
    std::array<double, 4> row;
    if (collinear) {
      const double base = 1e-3 * (0.5 + 0.2 * i);
      row = {base, 0.55 * base, 5e-5 + 1e-5 * rng.uniform(), 0.93 - 0.004 * i};
    } else {
      row = {1e-3 * (0.3 + rng.uniform()), 1e-3 * (0.3 + rng.uniform()),
             1e-4 * (0.3 + rng.uniform()), 0.85 + 0.1 * rng.uniform()};
    }
    const std::string gid = "G" + std::to_string(i);
    parts << gid << ',' << io::fmt_full(row[0]) << ',' << io::fmt_full(row[1])
          << ',' << io::fmt_full(row[2]) << ',' << io::fmt_full(row[3]) << "\n";
    const double q_true = 1.0 / (row[0] * out.x_true.x_ms + row[1] * out.x_true.x_sa +
                                 row[2] * out.x_true.x_ma + row[3] * out.x_true.x_si);
    for (int dev = 0; dev < 12; ++dev) {
      qdata::DeviceRecord r;
      r.device_id = gid + "_d" + std::to_string(dev);
      r.geometry_id = gid;
      r.w = 16;
      r.g = 8;
      r.d = 0.2 + 0.1 * i;
      r.phi = 95;
      const double q_tls = q_true * (1.0 + 0.06 * rng.gaussian());
      const double q_hp = 8e6;
      r.q_lp = 1.0 / (1.0 / q_tls + 1.0 / q_hp);
      r.q_hp = q_hp;
      records.push_back(r);
    }
  }
  std::ostringstream meas;
  qdata::emit_measurements(meas, records);
  out.measurements_path = write_temp(dir, "measurements.csv", meas.str());
  out.participations_path = write_temp(dir, "participations.csv", parts.str());
  return out;
}

}  // namespace

TEST_CASE("run_fit recovers synthetic loss factors end to end") {
  TempDir dir;
  const auto synth = make_synthetic(dir, 10, false);
  const auto cfg = io::Config::parse_string(
      "measurements_csv = " + synth.measurements_path + "\n" +
      "participations_csv = " + synth.participations_path + "\n" +
      "fit_iterations = 400\n");
  cli::GlobalOptions opts;
  opts.out_dir = dir.str();
  opts.seed = 11;
  std::ostringstream log;
  cli::run_fit(cfg, opts, log);

  const std::string samples = io::read_file(dir.str() + "/loss_factor_samples.csv");
  CHECK(std::count(samples.begin(), samples.end(), '\n') == 401);
  const std::string summary_text = io::read_file(dir.str() + "/fit_summary.json");
  const auto summary = nlohmann::json::parse(summary_text);
  CHECK(summary.contains("loss_factors"));
  CHECK(summary.contains("condition_number"));

  // Mean recovered factors near the generating values (well-conditioned P).
  const double x_ms = summary["loss_factors"]["MS"]["mean"].get<double>();
  const double x_sa = summary["loss_factors"]["SA"]["mean"].get<double>();
  const double x_ma = summary["loss_factors"]["MA"]["mean"].get<double>();
  const double x_si = summary["loss_factors"]["Si"]["mean"].get<double>();
  CHECK(x_ms == doctest::Approx(synth.x_true.x_ms).epsilon(0.35));
  CHECK(x_sa == doctest::Approx(synth.x_true.x_sa).epsilon(0.60));
  CHECK(x_ma == doctest::Approx(synth.x_true.x_ma).epsilon(0.35));
  CHECK(x_si == doctest::Approx(synth.x_true.x_si).epsilon(0.25));

  // Predicted-vs-measured table covers every geometry.
  const std::string pvm = io::read_file(dir.str() + "/predicted_vs_measured.csv");
  CHECK(std::count(pvm.begin(), pvm.end(), '\n') == 11);
  const std::string tangents = io::read_file(dir.str() + "/loss_tangents.csv");
  CHECK(tangents.find("MS,") != std::string::npos);
}

TEST_CASE("run_fit determinism and underdetermined warning") {
  TempDir dir;
  const auto synth = make_synthetic(dir, 10, false);
  const auto cfg = io::Config::parse_string(
      "measurements_csv = " + synth.measurements_path + "\n" +
      "participations_csv = " + synth.participations_path + "\n" +
      "fit_iterations = 200\n");
  cli::GlobalOptions opts;
  opts.out_dir = dir.str();
  opts.seed = 7;
  std::ostringstream log1, log2;
  cli::run_fit(cfg, opts, log1);
  const std::string first = io::read_file(dir.str() + "/loss_factor_samples.csv");
  cli::run_fit(cfg, opts, log2);
  CHECK(io::read_file(dir.str() + "/loss_factor_samples.csv") == first);

  // Single geometry: underdetermined warning.
  TempDir dir_single;
  const auto single = make_synthetic(dir_single, 1, false);
  const auto cfg_single = io::Config::parse_string(
      "measurements_csv = " + single.measurements_path + "\n" +
      "participations_csv = " + single.participations_path + "\n" +
      "fit_iterations = 50\n");
  cli::GlobalOptions opts_single;
  opts_single.out_dir = dir_single.str();
  std::ostringstream log_single;
  cli::run_fit(cfg_single, opts_single, log_single);
  CHECK(log_single.str().find("underdetermined") != std::string::npos);
}

TEST_CASE("run_predict produces a point band for a point distribution") {
  TempDir dir;
  const std::string dist_path = write_temp(
      dir, "dist.csv",
      "x_ms,x_sa,x_ma,x_si\n0.0001,5.7e-05,0.00078,1.2e-07\n");
  const auto cfg = io::Config::parse_string(
      "w_um = 2\ng_um = 1\nmesh_preset = fast\n"
      "distribution_csv = " + dist_path + "\n");
  cli::GlobalOptions opts;
  opts.out_dir = dir.str();
  std::ostringstream log;
  cli::run_predict(cfg, opts, log);
  const std::string csv = io::read_file(dir.str() + "/qtls_prediction.csv");
  const auto lines = [&] {
    std::vector<std::string> ls;
    std::istringstream in(csv);
    std::string l;
    while (std::getline(in, l)) ls.push_back(l);
    return ls;
  }();
  REQUIRE(lines.size() == 2);
  const auto fields = io::split_csv_line(lines[1]);
  REQUIRE(fields.size() == 4);
  CHECK(fields[1] == fields[2]);  // lo95 == hi95 for a point distribution
}

TEST_CASE("run_predict band is monotone in depth for fixed loss factors") {
  TempDir dir;
  const std::string dist_path = write_temp(
      dir, "dist.csv",
      "x_ms,x_sa,x_ma,x_si\n0.0001,5.7e-05,0.00078,1.2e-07\n");
  const auto cfg = io::Config::parse_string(
      "w_um = 2\ng_um = 1\nphi_deg = 90\nmesh_preset = fast\n"
      "depths_um = 0.15 0.4 1.0 2.2\n"
      "distribution_csv = " + dist_path + "\n");
  cli::GlobalOptions opts;
  opts.out_dir = dir.str();
  std::ostringstream log;
  cli::run_predict(cfg, opts, log);
  const std::string csv = io::read_file(dir.str() + "/qtls_prediction.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  double prev = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split_csv_line(line);
    const double q = std::stod(f[1]);
    CHECK(q > prev);  // deeper trench, less interface loss, higher Q
    prev = q;
    ++rows;
  }
  CHECK(rows == 4);
  CHECK(fs::exists(dir.str() + "/qtls_prediction.svg"));
}

TEST_CASE("cli binary exit codes") {
  if (run_binary("--help") == -1) return;  // binary path not wired in
  TempDir dir;

  // Config error: missing required key (exit 2).
  const std::string bad_cfg = write_temp(dir, "bad.cfg", "g_um = 1\n");
  CHECK(run_binary("--config " + bad_cfg + " --out " + dir.str() + " solve") == 2);

  // Missing distribution file (exit 4).
  const std::string predict_cfg = write_temp(
      dir, "predict.cfg",
      "w_um = 2\ng_um = 1\ndistribution_csv = " + dir.str() + "/nope.csv\n");
  CHECK(run_binary("--config " + predict_cfg + " --out " + dir.str() +
                   " predict") == 4);

  // Malformed distribution rows (exit 2, row number in the message).
  const std::string bad_dist = write_temp(dir, "dist.csv",
                                          "x_ms,x_sa,x_ma,x_si\n1,2\n");
  const std::string predict_cfg2 = write_temp(
      dir, "predict2.cfg",
      "w_um = 2\ng_um = 1\ndistribution_csv = " + bad_dist + "\n");
  CHECK(run_binary("--config " + predict_cfg2 + " --out " + dir.str() +
                   " predict") == 2);

  // Unknown flag (exit 2).
  CHECK(run_binary("--bogus") == 2);

  // Numerical failure: an impossibly small node budget (exit 3).
  const std::string starved_cfg = write_temp(
      dir, "starved.cfg",
      "w_um = 2\ng_um = 1\nmesh_preset = fast\nmesh_max_nodes = 50\n");
  CHECK(run_binary("--config " + starved_cfg + " --out " + dir.str() +
                   " solve") == 3);

  // Valid solve run (exit 0).
  const std::string ok_cfg = write_temp(
      dir, "ok.cfg", "w_um = 2\ng_um = 1\nmesh_preset = fast\nadapt_rounds = 0\n");
  CHECK(run_binary("--config " + ok_cfg + " --out " + dir.str() + " solve") == 0);
}
