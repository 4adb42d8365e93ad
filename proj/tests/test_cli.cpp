#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "moc3d/error.hpp"
#include "moc3d/run.hpp"
#include "support/oracles.hpp"

using namespace moc3d;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("moc3d_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig kinf_config(const fs::path& out) {
  auto c = load_config(oracle::deck_path("kinf/config.yaml"));
  c.output_dir = out.string();
  return c;
}

int run_binary(const std::string& args) {
  std::string cmd = std::string(MOC3D_BINARY) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, MinimalGetsDefaults) {
  auto c = parse_config("geometry: g.yaml\n", "/tmp/base");
  RunConfig d;
  EXPECT_EQ(c.geometry_path, "/tmp/base/g.yaml");
  EXPECT_EQ(c.output_dir, "/tmp/base/output");
  EXPECT_EQ(c.num_azim, d.num_azim);
  EXPECT_EQ(c.num_polar, d.num_polar);
  EXPECT_EQ(c.mode, SweepMode::Otf);
  EXPECT_EQ(c.tol_k, 1e-5);
  EXPECT_EQ(c.tol_src, 1e-5);
  EXPECT_TRUE(c.deterministic);
}

TEST(Config, HybridNeedsBudget) {
  try {
    parse_config("geometry: g.yaml\nmode: hybrid\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("memory_budget_bytes"), std::string::npos);
  }
  EXPECT_NO_THROW(parse_config("geometry: g.yaml\nmode: hybrid\nmemory_budget_bytes: 1000\n"));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("num_azim: 8\n"), ConfigError);
  EXPECT_THROW(parse_config("geometry: g.yaml\nnum_azim: 6\n"), ConfigError);
  EXPECT_THROW(parse_config("geometry: g.yaml\nmode: fast\n"), ConfigError);
  EXPECT_THROW(parse_config("geometry: g.yaml\nbudget_fraction: 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("geometry: g.yaml\nnum_workers: 0\n"), ConfigError);
  EXPECT_THROW(parse_config("geometry: g.yaml\nnum_azim: eight\n"), ConfigError);
  try {
    parse_config("geometry: g.yaml\nnum_azim: 8\nnum_azimuthal: 8\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("num_azimuthal"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  }
  try {
    parse_config("geometry: g.yaml\nnum_azim: [8\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << e.what();
  }
}

TEST(Config, RoundTrip) {
  RunConfig c;
  c.geometry_path = "/abs/geometry.yaml";
  c.num_azim = 24;
  c.azim_spacing = 0.1 + 0.2;
  c.num_polar = 5;
  c.axial_spacing = 1.0 / 3.0;
  c.mode = SweepMode::Hybrid;
  c.memory_budget_bytes = 123456789;
  c.budget_fraction = 0.65;
  c.chunk_size = 77;
  c.num_workers = 6;
  c.deterministic = false;
  c.tol_k = 3e-7;
  c.tol_src = 2.5e-6;
  c.max_iterations = 17;
  c.output_dir = "/abs/out";
  c.load_balance = false;
  c.exp_table = true;
  std::ostringstream os;
  write_config(c, os);
  EXPECT_EQ(parse_config(os.str(), "/elsewhere"), c);
}

TEST(Run, InfiniteMediumDeck) {
  auto dir = scratch("kinf");
  auto report = run(kinf_config(dir));
  EXPECT_TRUE(report.result.converged);
  EXPECT_NEAR(report.result.k_eff, 1.5, 1e-5);
  for (const char* f : {"summary.txt", "history.csv", "flux.csv", "balance.csv",
                        "timings.csv", "effective_config.yaml"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    EXPECT_NE(entry.path().extension(), ".tmp") << entry.path();
  }
  EXPECT_NE(slurp(dir / "summary.txt").find("converged          yes"), std::string::npos);
  EXPECT_EQ(load_config((dir / "effective_config.yaml").string()), kinf_config(dir));
}

TEST(Run, NonConvergenceIsReported) {
  auto dir = scratch("noconv");
  auto c = kinf_config(dir);
  c.max_iterations = 1;
  auto report = run(c);
  EXPECT_FALSE(report.result.converged);
  EXPECT_TRUE(fs::exists(dir / "history.csv"));
  EXPECT_NE(slurp(dir / "summary.txt").find("converged          no"), std::string::npos);
}

TEST(Run, ModesGiveIdenticalResults) {
  auto base = load_config(oracle::deck_path("lattice_vacuum/config.yaml"));
  base.output_dir = scratch("otf").string();
  base.tol_k = 1e-6;
  auto otf = run(base);

  auto hyb = base;
  hyb.output_dir = scratch("hybrid").string();
  hyb.mode = SweepMode::Hybrid;
  hyb.memory_budget_bytes = 20000;
  hyb.num_workers = 3;
  auto hybrid = run(hyb);
  EXPECT_GT(hybrid.result.preload_bytes, 0u);
  EXPECT_EQ(otf.result.k_eff, hybrid.result.k_eff);
  EXPECT_EQ(otf.result.iterations, hybrid.result.iterations);
  EXPECT_EQ(otf.result.scalar_flux, hybrid.result.scalar_flux);
  EXPECT_EQ(slurp(fs::path(base.output_dir) / "flux.csv"),
            slurp(fs::path(hyb.output_dir) / "flux.csv"));
}

TEST(Run, Reproducible) {
  auto a = scratch("repro_a"), b = scratch("repro_b");
  auto ca = kinf_config(a), cb = kinf_config(b);
  ca.num_workers = cb.num_workers = 4;
  run(ca);
  run(cb);
  for (const char* f : {"flux.csv", "history.csv", "balance.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Run, TraceOnlyCounts) {
  auto dir = scratch("trace");
  auto report = trace_only(kinf_config(dir), true);
  EXPECT_EQ(report.num_fsrs, 1);
  EXPECT_GT(report.num_tracks3d, 0u);
  EXPECT_TRUE(fs::exists(dir / "tracks2d.csv"));
  EXPECT_TRUE(fs::exists(dir / "segments3d.csv"));
}

TEST(Run, AtomicWriteReplaces) {
  auto dir = scratch("atomic");
  auto path = (dir / "x.txt").string();
  write_file_atomic(path, "one");
  write_file_atomic(path, "two");
  EXPECT_EQ(slurp(path), "two");
  EXPECT_FALSE(fs::exists(path + ".tmp"));
  EXPECT_THROW(write_file_atomic((dir / "missing" / "y.txt").string(), "z"), ConfigError);
}

TEST(Binary, ExitCodes) {
  auto dir = scratch("binary");
  auto cfg = dir / "config.yaml";
  auto write = [&](const std::string& extra) {
    std::ofstream out(cfg);
    out << "geometry: " << oracle::deck_path("kinf/geometry.yaml") << "\n"
        << "num_azim: 8\nazim_spacing: 0.5\nnum_polar: 2\naxial_spacing: 1.0\n"
        << "output_dir: out\n" << extra;
  };
  write("");
  EXPECT_EQ(run_binary("validate " + cfg.string()), 0);
  EXPECT_EQ(run_binary("run " + cfg.string()), 0);
  write("max_iterations: 1\n");
  EXPECT_EQ(run_binary("run " + cfg.string()), 2);
  write("bogus: 1\n");
  EXPECT_EQ(run_binary("run " + cfg.string()), 1);
  EXPECT_EQ(run_binary("run " + (dir / "absent.yaml").string()), 1);
  EXPECT_NE(run_binary(""), 0);
}
