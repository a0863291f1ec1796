#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wmlab/experiments.hpp"

using namespace wmlab;

int main(int argc, char** argv) {
  CLI::App app{"wmlab: corotational wave maps to S^2"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* sim = app.add_subcommand("simulate", "Run an experiment described by a JSON config");
  sim->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "Output directory (overrides the config)");

  std::string kind = "blowup_s5", data_out;
  double tn = 0.1, r_max = 64.0, resolve = 64.0;
  std::size_t n_base = 2048;
  auto* mk = app.add_subcommand("make-data", "Write initial data as a state CSV (r,psi,psi_t)");
  mk->add_option("--kind", kind, "Data kind")->check(CLI::IsMember({"blowup_s5"}));
  mk->add_option("--tn", tn, "Construction time t_n");
  mk->add_option("--out", data_out, "Output CSV")->required();
  mk->add_option("--r-max", r_max, "Domain radius");
  mk->add_option("--n-base", n_base, "Base intervals");
  mk->add_option("--resolve", resolve, "Finest spacing is ell/resolve");

  std::string state_path;
  auto* dist = app.add_subcommand("distance", "Distance of a state CSV to the two-bubble set");
  dist->add_option("--state", state_path, "State CSV")->required()->check(CLI::ExistingFile);

  std::string track_path;
  std::vector<double> window;
  auto* fit = app.add_subcommand("fit-rate", "Fit sqrt(lambda|log lambda|) = a (T+ - t)");
  fit->add_option("--track", track_path, "modulation.csv")->required()->check(CLI::ExistingFile);
  fit->add_option("--window", window, "t_lo t_hi")->expected(2)->required();

  double eps0 = 0.1;
  auto* split = app.add_subcommand("split-intervals", "Good/bad split of the d(t) series");
  split->add_option("--track", track_path, "modulation.csv")->required()->check(CLI::ExistingFile);
  split->add_option("--eps0", eps0, "Threshold")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      auto cfg = ExperimentConfig::load(config_path);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      const auto res = run_experiment(cfg);
      nlohmann::json j;
      j["output_dir"] = cfg.output_dir;
      j["steps"] = res.trajectory.steps;
      j["final_time"] = res.trajectory.final_time;
      j["blowup_declared"] = res.blowup.declared;
      j["max_abs_relative_drift"] = res.trajectory.max_abs_drift;
      std::cout << j.dump(2) << "\n";
    } else if (*mk) {
      const auto [ell, lp] = ell_of_t(tn);
      const auto grid = make_nested_grid(r_max, n_base, ell / resolve);
      const auto bd = make_blowup_data(tn, grid);
      write_state_csv(data_out, bd.state);
      nlohmann::json j;
      j["t_n"] = tn;
      j["ell"] = bd.ell;
      j["ell_prime"] = bd.ell_prime;
      j["R_n"] = bd.R_n;
      j["energy"] = bd.energy;
      j["kinetic_l2"] = bd.kinetic_l2;
      j["nodes"] = grid->size();
      std::cout << j.dump(2) << "\n";
    } else if (*dist) {
      const auto s = read_state_csv(state_path);
      std::cout << to_json(distance(s)) << "\n";
    } else if (*fit) {
      const auto track = ModulationTrack::read_csv(track_path);
      std::cout << to_json(fit_blowup_rate(track, window[0], window[1])) << "\n";
    } else if (*split) {
      const auto track = ModulationTrack::read_csv(track_path);
      std::vector<double> t, d;
      for (const auto& r : track.rows()) {
        if (std::isfinite(r.d)) t.push_back(r.t), d.push_back(r.d);
      }
      std::cout << to_json(split_intervals(t, d, eps0)) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "wmlab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
