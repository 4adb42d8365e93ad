#include "moc3d/run.hpp"

#include <yaml-cpp/yaml.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "moc3d/error.hpp"

namespace moc3d {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& what) {
  std::ostringstream os;
  if (node.Mark().line >= 0) os << "line " << node.Mark().line + 1 << ": ";
  os << what;
  throw ConfigError(os.str());
}

template <class T>
T read_scalar(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail_at(node, "invalid value for '" + key + "'");
  }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  fs::path p(path);
  if (p.is_relative()) p = fs::path(base_dir) / p;
  return fs::absolute(p).lexically_normal().string();
}

}  // namespace

RunConfig parse_config(const std::string& yaml_text, const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << "line " << e.mark.line + 1 << ": " << e.msg;
    throw ConfigError(os.str());
  }
  if (!root.IsMap()) throw ConfigError("configuration must be a mapping");

  static const std::set<std::string> known = {
      "geometry", "num_azim", "azim_spacing", "num_polar", "axial_spacing",
      "mode", "memory_budget_bytes", "budget_fraction", "chunk_size",
      "num_workers", "deterministic", "tol_k", "tol_src", "max_iterations",
      "output_dir", "load_balance", "exp_table"};
  for (const auto& entry : root) {
    auto key = entry.first.as<std::string>();
    if (!known.contains(key)) fail_at(entry.first, "unknown key '" + key + "'");
  }

  RunConfig c;
  if (!root["geometry"]) throw ConfigError("missing required key 'geometry'");
  c.geometry_path = resolve(base_dir, read_scalar<std::string>(root["geometry"], "geometry"));
  if (auto n = root["num_azim"]) c.num_azim = read_scalar<int>(n, "num_azim");
  if (auto n = root["azim_spacing"]) c.azim_spacing = read_scalar<double>(n, "azim_spacing");
  if (auto n = root["num_polar"]) c.num_polar = read_scalar<int>(n, "num_polar");
  if (auto n = root["axial_spacing"]) c.axial_spacing = read_scalar<double>(n, "axial_spacing");
  if (auto n = root["mode"]) {
    try {
      c.mode = parse_sweep_mode(read_scalar<std::string>(n, "mode"));
    } catch (const ConfigError& e) {
      fail_at(n, e.what());
    }
  }
  if (auto n = root["memory_budget_bytes"]) {
    auto v = read_scalar<long long>(n, "memory_budget_bytes");
    if (v <= 0) fail_at(n, "'memory_budget_bytes' must be positive");
    c.memory_budget_bytes = static_cast<std::size_t>(v);
  }
  if (auto n = root["budget_fraction"]) c.budget_fraction = read_scalar<double>(n, "budget_fraction");
  if (auto n = root["chunk_size"]) {
    auto v = read_scalar<long long>(n, "chunk_size");
    if (v < 1) fail_at(n, "'chunk_size' must be >= 1");
    c.chunk_size = static_cast<std::size_t>(v);
  }
  if (auto n = root["num_workers"]) c.num_workers = read_scalar<int>(n, "num_workers");
  if (auto n = root["deterministic"]) c.deterministic = read_scalar<bool>(n, "deterministic");
  if (auto n = root["tol_k"]) c.tol_k = read_scalar<double>(n, "tol_k");
  if (auto n = root["tol_src"]) c.tol_src = read_scalar<double>(n, "tol_src");
  if (auto n = root["max_iterations"]) c.max_iterations = read_scalar<int>(n, "max_iterations");
  if (auto n = root["output_dir"]) {
    c.output_dir = read_scalar<std::string>(n, "output_dir");
  }
  c.output_dir = resolve(base_dir, c.output_dir);
  if (auto n = root["load_balance"]) c.load_balance = read_scalar<bool>(n, "load_balance");
  if (auto n = root["exp_table"]) c.exp_table = read_scalar<bool>(n, "exp_table");
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto dir = fs::path(path).parent_path().string();
  return parse_config(buffer.str(), dir.empty() ? "." : dir);
}

void validate_config(const RunConfig& c) {
  auto need = [](bool ok, const std::string& key, const std::string& rule) {
    if (!ok) throw ConfigError("'" + key + "' " + rule);
  };
  need(c.num_azim >= 4 && c.num_azim % 4 == 0, "num_azim", "must be a positive multiple of 4");
  need(c.azim_spacing > 0.0, "azim_spacing", "must be positive");
  need(c.num_polar >= 1, "num_polar", "must be >= 1");
  need(c.axial_spacing > 0.0, "axial_spacing", "must be positive");
  need(c.budget_fraction > 0.0 && c.budget_fraction <= 1.0, "budget_fraction",
       "must lie in (0, 1]");
  need(c.chunk_size >= 1, "chunk_size", "must be >= 1");
  need(c.num_workers >= 1, "num_workers", "must be >= 1");
  need(c.tol_k > 0.0, "tol_k", "must be positive");
  need(c.tol_src > 0.0, "tol_src", "must be positive");
  need(c.max_iterations >= 1, "max_iterations", "must be >= 1");
  if (c.mode == SweepMode::Hybrid && c.memory_budget_bytes == 0) {
    throw ConfigError("mode 'hybrid' requires 'memory_budget_bytes'");
  }
}

void write_config(const RunConfig& c, std::ostream& os) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "geometry" << YAML::Value << c.geometry_path;
  out << YAML::Key << "num_azim" << YAML::Value << c.num_azim;
  out << YAML::Key << "azim_spacing" << YAML::Value << c.azim_spacing;
  out << YAML::Key << "num_polar" << YAML::Value << c.num_polar;
  out << YAML::Key << "axial_spacing" << YAML::Value << c.axial_spacing;
  out << YAML::Key << "mode" << YAML::Value << to_string(c.mode);
  if (c.memory_budget_bytes > 0) {
    out << YAML::Key << "memory_budget_bytes" << YAML::Value
        << static_cast<unsigned long long>(c.memory_budget_bytes);
  }
  out << YAML::Key << "budget_fraction" << YAML::Value << c.budget_fraction;
  out << YAML::Key << "chunk_size" << YAML::Value
      << static_cast<unsigned long long>(c.chunk_size);
  out << YAML::Key << "num_workers" << YAML::Value << c.num_workers;
  out << YAML::Key << "deterministic" << YAML::Value << c.deterministic;
  out << YAML::Key << "tol_k" << YAML::Value << c.tol_k;
  out << YAML::Key << "tol_src" << YAML::Value << c.tol_src;
  out << YAML::Key << "max_iterations" << YAML::Value << c.max_iterations;
  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
  out << YAML::Key << "load_balance" << YAML::Value << c.load_balance;
  out << YAML::Key << "exp_table" << YAML::Value << c.exp_table;
  out << YAML::EndMap;
  os << out.c_str() << '\n';
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw ConfigError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

//------------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

struct Stopwatch {
  Clock::time_point start = Clock::now();
  double lap() {
    auto now = Clock::now();
    double s = std::chrono::duration<double>(now - start).count();
    start = now;
    return s;
  }
};

struct Tracking {
  ExtrudedGeometry geom;
  TrackSet2D tracks;
  StackSet stacks;
};

std::string sig9(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

void write_timings(const std::string& dir, const RunReport& report) {
  std::ostringstream csv;
  csv << "phase,seconds\n";
  for (const auto& [phase, s] : report.timings) csv << phase << ',' << sig9(s) << '\n';
  write_file_atomic((fs::path(dir) / "timings.csv").string(), csv.str());
}

std::unique_ptr<Tracking> build_tracking(const RunConfig& config, RunReport& report,
                                         Stopwatch& clock) {
  auto spec = load_geometry_spec(config.geometry_path);
  auto geom = build_geometry(spec);
  report.timings.emplace_back("geometry", clock.lap());
  auto tracks = generate_tracks_2d(geom, config.num_azim, config.azim_spacing);
  tracks.segment(geom);
  report.timings.emplace_back("trace2d", clock.lap());
  auto polar = PolarQuadrature::gauss_legendre(config.num_polar);
  auto stacks = build_stacks(tracks, polar, config.axial_spacing, geom);
  report.timings.emplace_back("stacks", clock.lap());
  report.num_fsrs = geom.num_fsrs();
  report.num_tracks2d = static_cast<std::size_t>(tracks.num_tracks());
  report.num_tracks3d = stacks.num_tracks();
  return std::make_unique<Tracking>(Tracking{std::move(geom), std::move(tracks), std::move(stacks)});
}

void dump(const RunConfig& config, const TraceContext& ctx) {
  std::ostringstream t2;
  ctx.tracks.write_csv(t2);
  write_file_atomic((fs::path(config.output_dir) / "tracks2d.csv").string(), t2.str());
  std::ostringstream t3;
  write_segments_csv(ctx, t3);
  write_file_atomic((fs::path(config.output_dir) / "segments3d.csv").string(), t3.str());
}

}  // namespace

RunReport trace_only(const RunConfig& config, bool dump_tracks) {
  validate_config(config);
  fs::create_directories(config.output_dir);
  RunReport report;
  Stopwatch clock;
  auto tr = build_tracking(config, report, clock);
  TraceContext ctx{tr->geom, tr->tracks, tr->stacks};
  std::size_t segments = 0;
  for (const auto& tid : pack_track_indices(tr->stacks)) segments += count_segments(ctx, tid);
  report.num_segments3d = segments;
  report.timings.emplace_back("count", clock.lap());
  if (dump_tracks) {
    dump(config, ctx);
    report.timings.emplace_back("dump", clock.lap());
  }
  write_timings(config.output_dir, report);
  return report;
}

RunReport run(const RunConfig& config, bool dump_tracks) {
  validate_config(config);
  fs::create_directories(config.output_dir);
  const fs::path out(config.output_dir);
  {
    std::ostringstream eff;
    write_config(config, eff);
    write_file_atomic((out / "effective_config.yaml").string(), eff.str());
  }

  RunReport report;
  Stopwatch clock;
  auto tr = build_tracking(config, report, clock);
  TraceContext ctx{tr->geom, tr->tracks, tr->stacks};
  if (dump_tracks) {
    dump(config, ctx);
    report.timings.emplace_back("dump", clock.lap());
  }

  PlanOptions po;
  po.mode = config.mode;
  po.chunk_size = config.chunk_size;
  po.memory_budget = config.memory_budget_bytes;
  po.budget_fraction = config.budget_fraction;
  po.load_balance = config.load_balance;
  WorkPlan plan = build_plan(ctx, po);
  report.num_segments3d = std::accumulate(plan.segment_counts.begin(),
                                          plan.segment_counts.end(), std::size_t{0});
  report.timings.emplace_back("plan", clock.lap());

  SolverOptions so;
  so.tol_k = config.tol_k;
  so.tol_src = config.tol_src;
  so.max_iterations = config.max_iterations;
  so.deterministic = config.deterministic;
  so.num_workers = config.num_workers;
  so.exp_table = config.exp_table;
  TransportSolver solver(ctx, plan, so);
  double setup = clock.lap();
  SolveResult result = solver.solve_eigenvalue();
  double solve = clock.lap();
  report.timings.emplace_back("preload", result.preload_seconds);
  report.timings.emplace_back("volumes", setup - result.preload_seconds);
  report.timings.emplace_back("sweep", result.sweep_seconds);
  report.timings.emplace_back("reduction", solve - result.sweep_seconds);
  double total = 0.0;
  for (const auto& t : report.timings) total += t.second;
  report.timings.emplace_back("total", total);

  const auto& geom = tr->geom;
  const auto g = static_cast<std::size_t>(geom.num_groups());

  std::ostringstream hist;
  hist << "iteration,k_eff,delta_k,source_change\n";
  for (const auto& h : result.history) {
    hist << h.iteration << ',' << sig9(h.k_eff) << ',' << sig9(h.delta_k) << ','
         << sig9(h.source_change) << '\n';
  }
  write_file_atomic((out / "history.csv").string(), hist.str());

  std::ostringstream flux;
  flux << "fsr,group,scalar_flux,fission_rate\n";
  for (int j = 0; j < geom.num_fsrs(); ++j) {
    const auto& mat = geom.materials()[static_cast<std::size_t>(geom.material_of(j))];
    for (std::size_t k = 0; k < g; ++k) {
      double phi = result.scalar_flux[static_cast<std::size_t>(j) * g + k];
      flux << j << ',' << k << ',' << sig9(phi) << ',' << sig9(mat.nu_sigma_f[k] * phi) << '\n';
    }
  }
  write_file_atomic((out / "flux.csv").string(), flux.str());

  std::ostringstream bal;
  bal << "worker,segments\n";
  for (std::size_t w = 0; w < result.worker_segments.size(); ++w) {
    bal << w << ',' << result.worker_segments[w] << '\n';
  }
  write_file_atomic((out / "balance.csv").string(), bal.str());

  report.result = std::move(result);
  write_timings(config.output_dir, report);

  const auto& r = report.result;
  std::size_t wmax = 0, wmin = 0;
  if (!r.worker_segments.empty()) {
    wmax = *std::max_element(r.worker_segments.begin(), r.worker_segments.end());
    wmin = *std::min_element(r.worker_segments.begin(), r.worker_segments.end());
  }
  std::ostringstream sum;
  sum << "k_eff              " << sig9(r.k_eff) << '\n'
      << "iterations         " << r.iterations << '\n'
      << "converged          " << (r.converged ? "yes" : "no") << '\n'
      << "mode               " << to_string(config.mode) << '\n'
      << "workers            " << config.num_workers << '\n'
      << "deterministic      " << (config.deterministic ? "yes" : "no") << '\n'
      << "fsrs               " << report.num_fsrs << '\n'
      << "tracks_2d          " << report.num_tracks2d << '\n'
      << "tracks_3d          " << report.num_tracks3d << '\n'
      << "segments_3d        " << report.num_segments3d << '\n'
      << "preloaded_tracks   " << plan.preload_set.size() << '\n'
      << "preloaded_bytes    " << r.preload_bytes << '\n'
      << "production         " << sig9(r.balance.production) << '\n'
      << "absorption         " << sig9(r.balance.absorption) << '\n'
      << "leakage            " << sig9(r.balance.leakage) << '\n'
      << "balance_residual   " << sig9(r.balance.relative_residual()) << '\n'
      << "worker_segments    max " << wmax << " min " << wmin << '\n'
      << '\n'
      << "phase              seconds\n";
  for (const auto& [phase, s] : report.timings) {
    sum << std::left << std::setw(19) << phase << sig9(s) << '\n';
  }
  write_file_atomic((out / "summary.txt").string(), sum.str());
  return report;
}

}  // namespace moc3d
