// Copyright 2026 The AdaScale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Command-line front end: channel simulation, per-method runs, nu sweeps,
// offline oracle dumps, RDP/DP accounting, bound certification, and the
// synthetic over-the-air trainer.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "adascale/adascale.hpp"

namespace {

using namespace adascale;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> methods;
  std::vector<double> nu;
  int threads = 0;
};

int resolved_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

ExperimentConfig load_with_overrides(const CommonArgs& args) {
  ExperimentConfig config = load_config(args.config_path);
  if (!args.methods.empty()) config.controller.methods = args.methods;
  if (!args.nu.empty()) config.controller.nu_grid = args.nu;
  if (args.seed) config.seeds.fading = *args.seed;
  if (!args.out.empty()) config.output.dir = args.out;
  return config;
}

std::ostream& open_or_stdout(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

double resolve_v_or_throw(const ExperimentConfig& config,
                          std::optional<double> v_flag) {
  if (v_flag && *v_flag > 0.0) return *v_flag;
  const double v = config.resolve_v();
  if (v <= 0.0) {
    throw std::runtime_error(
        "adascale needs a penalty weight: set --v, controller.V, or "
        "(controller.v_beta, controller.v_coeff)");
  }
  return v;
}

int cmd_simulate_channels(const CommonArgs& args, const std::string& out_file) {
  const ExperimentConfig config = load_with_overrides(args);
  const auto profiles = config.placed_profiles();
  const ChannelTrace trace =
      generate_trace(profiles, config.system.rounds, config.seeds.fading);
  save_trace_csv(trace, profiles, out_file);
  std::cout << "wrote " << config.system.rounds << "x"
            << config.system.devices << " trace to " << out_file << "\n";
  return 0;
}

int cmd_run(const CommonArgs& args, const std::string& method,
            const std::string& trace_path, std::optional<double> v_flag,
            const std::string& out_file) {
  const ExperimentConfig config = load_with_overrides(args);
  std::vector<DeviceProfile> profiles;
  ChannelTrace trace;
  if (!trace_path.empty()) {
    LoadedTrace loaded = load_trace_csv(trace_path);
    profiles = std::move(loaded.profiles);
    trace = std::move(loaded.trace);
  } else {
    profiles = config.placed_profiles();
    trace = generate_trace(profiles, config.system.rounds, config.seeds.fading);
  }
  const NoiseSpec noise = config.noise_spec();
  const double nu = config.controller.nu_grid.front();
  ControllerConfig cfg = config.controller_config(nu, 1.0);

  std::ofstream file;
  std::ostream& out = open_or_stdout(file, out_file);
  if (method == "adascale") {
    cfg.V = resolve_v_or_throw(config, v_flag);
    const AdaScaleRun run = run_adascale(trace, profiles, cfg, noise);
    write_run_csv(out, run.decisions, &run.queue_history);
  } else if (method == "equalalloc") {
    const BaselineRun run = run_equal_alloc(trace, profiles, cfg, noise);
    write_run_csv(out, run.decisions, nullptr);
  } else if (method == "estimfuture") {
    const BaselineRun run = run_estim_future(trace, profiles, cfg, noise);
    write_run_csv(out, run.decisions, nullptr);
  } else if (method == "optimal") {
    const OfflineSolution sol = offline_optimal(trace, profiles, cfg, noise);
    const BaselineRun run =
        run_offline_optimal(trace, profiles, cfg, noise, sol);
    write_run_csv(out, run.decisions, nullptr);
  } else {
    throw std::runtime_error("unknown method: " + method);
  }
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const ExperimentConfig config = load_with_overrides(args);
  const SweepReport report = sweep(config, resolved_threads(args.threads));
  std::filesystem::create_directories(config.output.dir);
  emit_report(report, config.output.dir);
  std::cout << "wrote sweep report (" << report.rows.size() << " rows) to "
            << config.output.dir << "\n";
  return 0;
}

int cmd_oracle(const CommonArgs& args, const std::string& trace_path) {
  const ExperimentConfig config = load_with_overrides(args);
  std::vector<DeviceProfile> profiles;
  ChannelTrace trace;
  if (!trace_path.empty()) {
    LoadedTrace loaded = load_trace_csv(trace_path);
    profiles = std::move(loaded.profiles);
    trace = std::move(loaded.trace);
  } else {
    profiles = config.placed_profiles();
    trace = generate_trace(profiles, config.system.rounds, config.seeds.fading);
  }
  const NoiseSpec noise = config.noise_spec();
  for (double nu : config.controller.nu_grid) {
    const ControllerConfig cfg = config.controller_config(nu, 1.0);
    const OfflineSolution sol = offline_optimal(trace, profiles, cfg, noise);
    std::cout << "{\"nu\":" << format_double(nu)
              << ",\"mu_star\":" << format_double(sol.mu_star)
              << ",\"primal\":" << format_double(sol.primal_value)
              << ",\"dual\":" << format_double(sol.dual_value)
              << ",\"gap\":" << format_double(sol.primal_value - sol.dual_value)
              << ",\"slack\":" << format_double(sol.constraint_slack) << "}\n";
  }
  return 0;
}

int cmd_account(const std::string& in_path, const std::string& ledger_path,
                int alpha, double q, double sigma_eff, double delta,
                const std::string& out_file) {
  std::ofstream file;
  std::ostream& out = open_or_stdout(file, out_file);
  const RdpOrder order(alpha);
  if (!ledger_path.empty()) {
    // Ledger CSV: device,rho_total -> device,rho_total,epsilon,delta.
    std::ifstream in(ledger_path);
    if (!in) throw std::runtime_error("cannot open " + ledger_path);
    out << "device,rho_total,epsilon,delta\n";
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      const int device = std::stoi(line.substr(0, comma));
      const double rho = std::stod(line.substr(comma + 1));
      const DpGuarantee g = rdp_to_dp(rho, order, delta);
      if (g.epsilon < 0.0) {
        std::cerr << "note: device " << device
                  << " epsilon is negative (tiny rho); reported as computed\n";
      }
      out << device << "," << format_double(rho) << ","
          << format_double(g.epsilon) << "," << format_double(delta) << "\n";
    }
    return 0;
  }
  out << "alpha,q,sigma_eff,rho\n";
  if (!in_path.empty()) {
    // Triple CSV: alpha,q,sigma_eff rows.
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open " + in_path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string cell;
      std::getline(row, cell, ',');
      const int a = std::stoi(cell);
      std::getline(row, cell, ',');
      const double qq = std::stod(cell);
      std::getline(row, cell, ',');
      const double ss = std::stod(cell);
      out << a << "," << format_double(qq) << "," << format_double(ss) << ","
          << format_double(rdp_of_sgm(RdpOrder(a), SgmParams(qq, ss))) << "\n";
    }
    return 0;
  }
  out << alpha << "," << format_double(q) << "," << format_double(sigma_eff)
      << "," << format_double(rdp_of_sgm(order, SgmParams(q, sigma_eff)))
      << "\n";
  return 0;
}

int cmd_certify(const CommonArgs& args, std::optional<double> v_flag,
                std::optional<int> trials_flag) {
  const ExperimentConfig config = load_with_overrides(args);
  const auto profiles = config.placed_profiles();
  const NoiseSpec noise = config.noise_spec();
  const int trials = trials_flag.value_or(config.seeds.trials);

  bool all_ok = true;
  for (double nu : config.controller.nu_grid) {
    ControllerConfig cfg = config.controller_config(nu, 1.0);
    cfg.V = resolve_v_or_throw(config, v_flag);
    int failures = 0;
    double worst_violation_margin = std::numeric_limits<double>::infinity();
    double worst_regret_margin = std::numeric_limits<double>::infinity();
    for (int s = 0; s < trials; ++s) {
      const ChannelTrace trace = generate_trace(
          profiles, config.system.rounds,
          config.seeds.fading + static_cast<std::uint64_t>(s));
      const AdaScaleRun run = run_adascale(trace, profiles, cfg, noise, false);
      const OfflineSolution sol = offline_optimal(trace, profiles, cfg, noise);
      const BoundCertificate cert =
          certify_run(run, sol, trace, profiles, cfg, noise);
      if (!cert.all_ok()) ++failures;
      worst_violation_margin = std::min(
          worst_violation_margin, cert.violation_bound - cert.violation_lhs);
      worst_regret_margin =
          std::min(worst_regret_margin, cert.regret_bound - cert.regret);
    }
    const bool ok = failures == 0;
    all_ok &= ok;
    std::cout << (ok ? "PASS" : "FAIL") << " nu=" << format_double(nu)
              << " V=" << format_double(cfg.V) << " trials=" << trials
              << " min_violation_margin=" << format_double(worst_violation_margin)
              << " min_regret_margin=" << format_double(worst_regret_margin)
              << "\n";
  }
  return all_ok ? 0 : 1;
}

int cmd_train(const CommonArgs& args, const std::string& controller,
              std::optional<double> v_flag, int dim, int samples, int batch,
              double heterogeneity, double lambda_scale, int num_seeds,
              const std::string& out_file) {
  const ExperimentConfig config = load_with_overrides(args);
  const SyntheticProblem problem = build_problem(
      config.seeds.sampling, config.system.devices, dim, heterogeneity,
      samples, batch);
  // Training-side profiles: same placements, synthetic batch/dataset sizes.
  auto profiles = config.placed_profiles();
  for (auto& p : profiles) {
    p.batch_size = batch;
    p.dataset_size = samples;
  }
  NoiseSpec noise = config.noise_spec();
  noise.model_dim = dim;

  // Clipping stays inactive in bound-validation mode: the threshold sits
  // well above every per-sample gradient norm seen from the start region.
  double max_norm = 0.0;
  for (int m = 0; m < problem.num_devices; ++m) {
    for (int i = 0; i < problem.samples_per_device; ++i) {
      max_norm =
          std::max(max_norm, problem.sample_gradient(m, i, problem.w0).norm());
    }
  }
  const double clip = 4.0 * max_norm;
  const double lambda = lambda_scale * problem.max_learning_rate();

  const double nu = config.controller.nu_grid.front();
  ControllerConfig cfg{1.0, nu, x_max_from(noise.p_max, dim,
                                           config.system.devices, clip),
                       RdpOrder(config.system.alpha), clip,
                       config.controller.tau_rel};
  cfg.bisect_tol = config.controller.tau_rel * cfg.x_max;
  const ChannelTrace trace =
      generate_trace(profiles, config.system.rounds, config.seeds.fading);

  std::vector<double> etas(trace.num_rounds);
  if (controller == "adascale") {
    cfg.V = resolve_v_or_throw(config, v_flag);
    const AdaScaleRun run = run_adascale(trace, profiles, cfg, noise);
    for (int t = 0; t < trace.num_rounds; ++t) etas[t] = run.decisions[t].eta;
  } else if (controller == "equalalloc") {
    for (int t = 0; t < trace.num_rounds; ++t) {
      const double c_t = dim * noise.sigma_n_sq / trace.h_min_sq[t];
      etas[t] = eta_from_x(equal_alloc(c_t, nu, cfg.x_max), trace.h_min_sq[t]);
    }
  } else if (controller == "optimal") {
    const OfflineSolution sol = offline_optimal(trace, profiles, cfg, noise);
    for (int t = 0; t < trace.num_rounds; ++t) {
      etas[t] = eta_from_x(sol.x_star[t], trace.h_min_sq[t]);
    }
  } else {
    throw std::runtime_error("unknown controller: " + controller);
  }

  const TrainingTrajectory traj =
      train(problem, etas, lambda, clip, noise, config.seeds.sampling + 1,
            config.seeds.noise + 1);
  std::ofstream file;
  std::ostream& out = open_or_stdout(file, out_file);
  out << "t,grad_sq,f_value,eta,effective_noise_var\n";
  for (std::size_t t = 0; t < traj.grad_sq.size(); ++t) {
    out << t << "," << format_double(traj.grad_sq[t]) << ","
        << format_double(traj.f_value[t]) << "," << format_double(traj.eta[t])
        << "," << format_double(traj.noise_var[t]) << "\n";
  }

  const BoundReport report = verify_convergence_bound(
      problem, etas, lambda, clip, noise, num_seeds, config.seeds.noise + 100);
  std::cout << "{\"lhs\":" << format_double(report.lhs)
            << ",\"rhs\":" << format_double(report.rhs)
            << ",\"phi\":" << format_double(report.phi)
            << ",\"noise_term\":" << format_double(report.noise_term)
            << ",\"margin\":" << format_double(report.margin)
            << ",\"holds\":" << (report.holds ? "true" : "false")
            << ",\"seeds\":" << num_seeds
            << ",\"lambda\":" << format_double(lambda) << "}\n";
  return report.holds ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-aware over-the-air federated learning simulator"};
  app.require_subcommand(1);

  CommonArgs common;
  auto add_common = [&common](CLI::App* cmd, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", common.config_path,
                                "experiment configuration file");
    if (needs_config) opt->required();
    cmd->add_option("--seed", common.seed, "override the fading seed");
    cmd->add_option("--out", common.out, "output directory");
    cmd->add_option("--methods", common.methods,
                    "comma-separated method list")
        ->delimiter(',');
    cmd->add_option("--nu", common.nu, "comma-separated nu list")
        ->delimiter(',');
    cmd->add_option("--threads", common.threads,
                    "worker threads (0 = hardware)");
  };

  // simulate-channels
  auto* sim = app.add_subcommand("simulate-channels",
                                 "generate and export a channel trace");
  std::string sim_out = "trace.csv";
  add_common(sim);
  sim->add_option("--trace-out", sim_out, "trace CSV path");

  // run
  auto* run = app.add_subcommand("run", "run one method over one trace");
  std::string run_method = "adascale";
  std::string run_trace;
  std::string run_out;
  std::optional<double> run_v;
  add_common(run);
  run->add_option("--method", run_method,
                  "adascale | optimal | equalalloc | estimfuture");
  run->add_option("--trace", run_trace, "trace CSV (generated if omitted)");
  run->add_option("--v", run_v, "AdaScale penalty weight override");
  run->add_option("--run-out", run_out, "per-round CSV path (stdout if empty)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "full (nu x method x seed) sweep");
  add_common(sw);

  // oracle
  auto* orc = app.add_subcommand("oracle", "offline dual certificate dump");
  std::string orc_trace;
  add_common(orc);
  orc->add_option("--trace", orc_trace, "trace CSV (generated if omitted)");

  // account
  auto* acc = app.add_subcommand("account", "RDP / DP accounting");
  std::string acc_in, acc_ledger, acc_out;
  int acc_alpha = 3;
  double acc_q = 0.01, acc_sigma = 1.0, acc_delta = 1e-5;
  acc->add_option("--in", acc_in, "CSV of alpha,q,sigma_eff triples");
  acc->add_option("--ledger", acc_ledger, "CSV of device,rho_total rows");
  acc->add_option("--alpha", acc_alpha, "Renyi order");
  acc->add_option("--q", acc_q, "sampling rate");
  acc->add_option("--sigma", acc_sigma, "effective noise multiplier");
  acc->add_option("--delta", acc_delta, "DP delta for ledger conversion");
  acc->add_option("--csv-out", acc_out, "output CSV path (stdout if empty)");

  // certify
  auto* cert = app.add_subcommand("certify",
                                  "check queue/violation/regret bounds");
  std::optional<double> cert_v;
  std::optional<int> cert_trials;
  add_common(cert);
  cert->add_option("--v", cert_v, "AdaScale penalty weight override");
  cert->add_option("--trials", cert_trials, "number of fading seeds");

  // train
  auto* tr = app.add_subcommand("train", "synthetic over-the-air FedSGD");
  std::string tr_controller = "equalalloc";
  std::string tr_out;
  std::optional<double> tr_v;
  int tr_dim = 10, tr_samples = 200, tr_batch = 20, tr_seeds = 5;
  double tr_het = 0.5, tr_lambda_scale = 0.5;
  add_common(tr);
  tr->add_option("--controller", tr_controller,
                 "adascale | optimal | equalalloc");
  tr->add_option("--v", tr_v, "AdaScale penalty weight override");
  tr->add_option("--dim", tr_dim, "synthetic model dimension");
  tr->add_option("--samples", tr_samples, "samples per device");
  tr->add_option("--batch", tr_batch, "expected batch size");
  tr->add_option("--het", tr_het, "heterogeneity knob");
  tr->add_option("--lambda-scale", tr_lambda_scale,
                 "fraction of the admissible learning rate");
  tr->add_option("--train-seeds", tr_seeds, "trajectories for the bound check");
  tr->add_option("--train-out", tr_out, "per-round CSV path (stdout if empty)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate_channels(common, sim_out);
    if (run->parsed()) {
      return cmd_run(common, run_method, run_trace, run_v, run_out);
    }
    if (sw->parsed()) return cmd_sweep(common);
    if (orc->parsed()) return cmd_oracle(common, orc_trace);
    if (acc->parsed()) {
      return cmd_account(acc_in, acc_ledger, acc_alpha, acc_q, acc_sigma,
                         acc_delta, acc_out);
    }
    if (cert->parsed()) return cmd_certify(common, cert_v, cert_trials);
    if (tr->parsed()) {
      return cmd_train(common, tr_controller, tr_v, tr_dim, tr_samples,
                       tr_batch, tr_het, tr_lambda_scale, tr_seeds, tr_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
