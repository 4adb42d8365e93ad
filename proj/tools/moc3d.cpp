#include <CLI11.hpp>

#include <iostream>

#include "moc3d/error.hpp"
#include "moc3d/run.hpp"

namespace {

int report_error(const moc3d::Error& e) {
  std::cerr << "error [" << e.module() << "]: " << e.what() << '\n';
  return 1;
}

void print_geometry_warnings(const moc3d::RunConfig& config) {
  auto geom = moc3d::build_geometry(moc3d::load_geometry_spec(config.geometry_path));
  for (const auto& w : geom.warnings()) std::cerr << "warning [geometry]: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D method-of-characteristics k-eigenvalue solver"};
  app.require_subcommand(1);

  std::string config_path;
  bool dump_tracks = false;

  auto* run = app.add_subcommand("run", "Solve the eigenvalue problem and write reports");
  run->add_option("config", config_path, "Runtime configuration (YAML)")->required();
  run->add_flag("--dump-tracks", dump_tracks, "Write 2D track and 3D segment CSVs");

  auto* trace = app.add_subcommand("trace", "Build tracks and stacks only");
  trace->add_option("config", config_path, "Runtime configuration (YAML)")->required();
  trace->add_flag("--dump-tracks", dump_tracks, "Write 2D track and 3D segment CSVs");

  auto* validate = app.add_subcommand("validate", "Check configuration and geometry");
  validate->add_option("config", config_path, "Runtime configuration (YAML)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    auto config = moc3d::load_config(config_path);
    if (validate->parsed()) {
      auto geom = moc3d::build_geometry(moc3d::load_geometry_spec(config.geometry_path));
      for (const auto& w : geom.warnings()) std::cerr << "warning [geometry]: " << w << '\n';
      std::cout << "configuration ok\n"
                << "groups " << geom.num_groups() << '\n'
                << "radial_regions " << geom.num_radial_regions() << '\n'
                << "fsrs " << geom.num_fsrs() << '\n';
      return 0;
    }
    print_geometry_warnings(config);
    if (trace->parsed()) {
      auto report = moc3d::trace_only(config, dump_tracks);
      std::cout << "fsrs " << report.num_fsrs << '\n'
                << "tracks_2d " << report.num_tracks2d << '\n'
                << "tracks_3d " << report.num_tracks3d << '\n'
                << "segments_3d " << report.num_segments3d << '\n';
      return 0;
    }
    auto report = moc3d::run(config, dump_tracks);
    const auto& r = report.result;
    std::cout.precision(9);
    std::cout << "k_eff " << r.k_eff << '\n' << "iterations " << r.iterations << '\n';
    if (!r.converged) {
      std::cerr << "error [solver]: no convergence after " << r.iterations
                << " iterations; see history.csv in " << config.output_dir << '\n';
      return 2;
    }
    return 0;
  } catch (const moc3d::Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
