// Command-line driver for the MTD cost-benefit experiments.
//
// Exit codes: 0 success, 1 infeasible/empty results, 2 usage or input error.

#include <chrono>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mtd/attack.hpp"
#include "mtd/eval.hpp"
#include "mtd/io.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct CommonArgs {
  std::string case_path;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::string> gamma_grid;
  std::optional<int> n_attacks;
  std::optional<int> n_noise;
  std::optional<double> rel_mag;
  std::optional<int> restarts;
  std::optional<double> sigma;
  std::optional<int> threads;
  std::optional<double> load_mw;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_case = true) {
  auto* opt = cmd->add_option("--case", args.case_path, "grid case file");
  if (needs_case) opt->required();
  cmd->add_option("--config", args.config_path, "key=value experiment config");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "master random seed");
  cmd->add_option("--alpha", args.alpha, "detector false-positive rate");
  cmd->add_option("--gamma-grid", args.gamma_grid, "gamma grid, list or lo:step:hi");
  cmd->add_option("--n-attacks", args.n_attacks, "sampled attacks per estimate");
  cmd->add_option("--n-noise", args.n_noise, "noise trials per attack");
  cmd->add_option("--rel-mag", args.rel_mag, "attack magnitude ||a||_1/||z||_1");
  cmd->add_option("--restarts", args.restarts, "reactance search restarts");
  cmd->add_option("--sigma", args.sigma, "per-sensor noise std dev, MW");
  cmd->add_option("--threads", args.threads, "worker threads (0 = hardware)");
  cmd->add_option("--load", args.load_mw, "override aggregate load, MW");
}

mtd::EvalConfig make_config(const CommonArgs& args) {
  mtd::EvalConfig cfg;
  if (!args.config_path.empty()) cfg = mtd::load_config_file(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.alpha) cfg.alpha = *args.alpha;
  if (args.gamma_grid) cfg.gammas = mtd::parse_grid_spec(*args.gamma_grid);
  if (args.n_attacks) cfg.n_attacks = *args.n_attacks;
  if (args.n_noise) cfg.n_noise = *args.n_noise;
  if (args.rel_mag) cfg.rel_magnitude = *args.rel_mag;
  if (args.restarts) cfg.restarts = *args.restarts;
  if (args.sigma) cfg.noise_sigma = *args.sigma;
  if (args.threads) cfg.threads = *args.threads;
  cfg.validate();
  return cfg;
}

Eigen::VectorXd resolve_load(const mtd::GridCase& grid, const CommonArgs& args) {
  if (args.load_mw) return mtd::disaggregate_load(grid, *args.load_mw);
  return grid.default_loads();
}

mtd::RunManifest start_manifest(const std::string& command, const CommonArgs& args,
                                const mtd::EvalConfig& cfg) {
  mtd::RunManifest m;
  m.command = command;
  m.config = mtd::config_to_map(cfg);
  if (args.load_mw) m.config["load"] = mtd::csv_num(*args.load_mw);
  if (!args.case_path.empty())
    m.input_digests[args.case_path] = mtd::file_digest(args.case_path);
  if (!args.config_path.empty())
    m.input_digests[args.config_path] = mtd::file_digest(args.config_path);
  m.seed = cfg.seed;
  return m;
}

std::filesystem::path out_file(const CommonArgs& args, const std::string& name) {
  std::filesystem::create_directories(args.out_dir);
  return std::filesystem::path(args.out_dir) / name;
}

void finish_manifest(mtd::RunManifest& m, const CommonArgs& args,
                     Clock::time_point started) {
  m.wall_seconds =
      std::chrono::duration<double>(Clock::now() - started).count();
  mtd::write_manifest(m, out_file(args, "manifest.json"));
}

int cmd_calibrate(const CommonArgs& args, int trials) {
  const auto started = Clock::now();
  mtd::EvalConfig cfg = make_config(args);
  if (trials > 0) cfg.calib_trials = trials;
  const mtd::GridCase grid = mtd::load_case_file(args.case_path);
  mtd::RunManifest manifest = start_manifest("calibrate", args, cfg);

  mtd::MeasurementModel model = mtd::MeasurementModel::build(
      grid, grid.default_reactances(), cfg.noise_sigma, cfg.weighted_residual);
  mtd::RandomStream master(cfg.seed);
  mtd::RandomStream calib_rng = master.substream(1);
  mtd::RandomStream valid_rng = master.substream(2);
  const double tau =
      mtd::calibrate_threshold(model, cfg.alpha, cfg.calib_trials, calib_rng);

  const mtd::ResidualSampler sampler(model);
  int false_positives = 0;
  for (int i = 0; i < cfg.calib_trials; ++i)
    if (sampler.noise_only_residual(valid_rng) >= tau) ++false_positives;
  const double fp_rate = static_cast<double>(false_positives) / cfg.calib_trials;

  const auto csv_path = out_file(args, "threshold.csv");
  mtd::CsvWriter csv(csv_path, {"alpha", "tau", "calib_trials", "validation_trials",
                                "fp_rate", "dof"});
  csv.row({mtd::csv_num(cfg.alpha), mtd::csv_num(tau), std::to_string(cfg.calib_trials),
           std::to_string(cfg.calib_trials), mtd::csv_num(fp_rate),
           std::to_string(sampler.dof())});
  csv.close();
  manifest.outputs.push_back(csv_path.string());
  finish_manifest(manifest, args, started);
  std::cout << "tau " << tau << ", validation FP rate " << fp_rate << "\n";
  return 0;
}

std::vector<std::string> sweep_header(const std::vector<double>& deltas) {
  std::vector<std::string> h = {"gamma_target", "feasible",      "gamma_achieved",
                                "gamma_vs_current", "max_gamma_found", "cost",
                                "c_mtd"};
  for (double d : deltas) {
    h.push_back("eta_" + mtd::csv_num(d));
    h.push_back("hw_" + mtd::csv_num(d));
  }
  return h;
}

void write_sweep_row(mtd::CsvWriter& csv, const mtd::SweepRow& row,
                     std::size_t n_deltas) {
  std::vector<std::string> fields = {
      mtd::csv_num(row.gamma_target),    row.feasible ? "1" : "0",
      mtd::csv_num(row.gamma_achieved),  mtd::csv_num(row.gamma_vs_current),
      mtd::csv_num(row.max_gamma_found), mtd::csv_num(row.cost),
      mtd::csv_num(row.c_mtd)};
  for (std::size_t i = 0; i < n_deltas; ++i) {
    if (row.feasible) {
      fields.push_back(mtd::csv_num(row.eta[i].eta));
      fields.push_back(mtd::csv_num(row.eta[i].half_width));
    } else {
      fields.push_back("");
      fields.push_back("");
    }
  }
  csv.row(fields);
}

int cmd_sweep(const CommonArgs& args) {
  const auto started = Clock::now();
  const mtd::EvalConfig cfg = make_config(args);
  const mtd::GridCase grid = mtd::load_case_file(args.case_path);
  mtd::RunManifest manifest = start_manifest("sweep", args, cfg);

  const mtd::SweepReport report =
      mtd::gamma_sweep(grid, resolve_load(grid, args), cfg);

  const auto eff_path = out_file(args, "effectiveness_vs_gamma.csv");
  mtd::CsvWriter eff(eff_path, sweep_header(report.deltas));
  for (const auto& row : report.rows) write_sweep_row(eff, row, report.deltas.size());
  eff.close();

  const auto trade_path = out_file(args, "tradeoff.csv");
  std::vector<std::string> th = {"gamma_target", "c_mtd"};
  for (double d : report.deltas) th.push_back("eta_" + mtd::csv_num(d));
  mtd::CsvWriter trade(trade_path, th);
  for (const auto& row : report.rows) {
    if (!row.feasible) continue;
    std::vector<std::string> fields = {mtd::csv_num(row.gamma_target),
                                       mtd::csv_num(row.c_mtd)};
    for (const auto& est : row.eta) fields.push_back(mtd::csv_num(est.eta));
    trade.row(fields);
  }
  trade.close();

  manifest.outputs.push_back(eff_path.string());
  manifest.outputs.push_back(trade_path.string());
  finish_manifest(manifest, args, started);

  int feasible = 0;
  for (const auto& row : report.rows)
    if (row.feasible) ++feasible;
  std::cout << feasible << "/" << report.rows.size() << " gamma rows feasible, base cost "
            << report.base_cost << "\n";
  return feasible == 0 ? 1 : 0;
}

int cmd_random_baseline(const CommonArgs& args, int n_plans, double bound) {
  const auto started = Clock::now();
  const mtd::EvalConfig cfg = make_config(args);
  const mtd::GridCase grid = mtd::load_case_file(args.case_path);
  mtd::RunManifest manifest = start_manifest("random-baseline", args, cfg);
  manifest.config["n_plans"] = std::to_string(n_plans);
  manifest.config["bound"] = mtd::csv_num(bound);

  const mtd::RandomBaselineReport report = mtd::random_perturbation_baseline(
      grid, resolve_load(grid, args), cfg, n_plans, bound);

  const auto plans_path = out_file(args, "random_baseline.csv");
  std::vector<std::string> header = {"plan", "gamma"};
  for (double d : report.deltas) header.push_back("eta_" + mtd::csv_num(d));
  mtd::CsvWriter plans(plans_path, header);
  for (const auto& row : report.plans) {
    std::vector<std::string> fields = {std::to_string(row.plan),
                                       mtd::csv_num(row.gamma)};
    for (const auto& est : row.eta) fields.push_back(mtd::csv_num(est.eta));
    plans.row(fields);
  }
  plans.close();

  const auto summary_path = out_file(args, "random_baseline_summary.csv");
  mtd::CsvWriter summary(summary_path,
                         {"n_plans", "bound", "target_delta", "target_eta",
                          "fraction_meeting_target", "iqr_at_target_delta"});
  summary.row({std::to_string(n_plans), mtd::csv_num(bound),
               mtd::csv_num(report.target_delta), mtd::csv_num(report.target_eta),
               mtd::csv_num(report.fraction_meeting_target),
               mtd::csv_num(report.iqr_at_target_delta)});
  summary.close();

  manifest.outputs.push_back(plans_path.string());
  manifest.outputs.push_back(summary_path.string());
  finish_manifest(manifest, args, started);
  std::cout << "fraction meeting eta(" << report.target_delta
            << ") >= " << report.target_eta << ": " << report.fraction_meeting_target
            << "\n";
  return 0;
}

int cmd_daily(const CommonArgs& args, const std::string& trace_path) {
  const auto started = Clock::now();
  const mtd::EvalConfig cfg = make_config(args);
  const mtd::GridCase grid = mtd::load_case_file(args.case_path);
  const mtd::LoadTrace trace = mtd::load_trace_file(trace_path);
  mtd::RunManifest manifest = start_manifest("daily", args, cfg);
  manifest.input_digests[trace_path] = mtd::file_digest(trace_path);

  const mtd::DailyReport report = mtd::daily_simulation(grid, trace, cfg);

  const auto daily_path = out_file(args, "daily.csv");
  mtd::CsvWriter csv(daily_path,
                     {"hour", "timestamp", "load_mw", "feasible", "gamma_th",
                      "eta_at_target", "cost_base", "cost_mtd", "c_mtd",
                      "gamma_att_vs_current", "gamma_current_vs_plan",
                      "gamma_att_vs_plan"});
  int feasible = 0;
  for (const auto& h : report.hours) {
    if (h.feasible) ++feasible;
    csv.row({std::to_string(h.hour), h.timestamp, mtd::csv_num(h.load_mw),
             h.feasible ? "1" : "0", mtd::csv_num(h.gamma_th),
             mtd::csv_num(h.eta_at_target), mtd::csv_num(h.cost_base),
             mtd::csv_num(h.cost_mtd), mtd::csv_num(h.c_mtd),
             mtd::csv_num(h.gamma_att_vs_current),
             mtd::csv_num(h.gamma_current_vs_plan),
             mtd::csv_num(h.gamma_att_vs_plan)});
  }
  csv.close();
  manifest.outputs.push_back(daily_path.string());
  finish_manifest(manifest, args, started);
  std::cout << feasible << "/" << report.hours.size() << " hours met the target\n";
  return feasible == 0 ? 1 : 0;
}

int cmd_demo4(const CommonArgs& args) {
  const auto started = Clock::now();
  const mtd::EvalConfig cfg = make_config(args);
  const mtd::GridCase grid = mtd::load_case_file(args.case_path);
  mtd::RunManifest manifest = start_manifest("demo4", args, cfg);

  const mtd::FourBusTable table = mtd::four_bus_demo(grid);
  const auto path = out_file(args, "demo4.csv");
  mtd::CsvWriter csv(path, {"attack", "dx1", "dx2", "dx3", "dx4"});
  for (int i = 0; i < 2; ++i)
    csv.row({std::to_string(i + 1), mtd::csv_num(table.residuals[i][0]),
             mtd::csv_num(table.residuals[i][1]), mtd::csv_num(table.residuals[i][2]),
             mtd::csv_num(table.residuals[i][3])});
  csv.close();
  manifest.outputs.push_back(path.string());
  finish_manifest(manifest, args, started);
  for (int i = 0; i < 2; ++i)
    std::cout << "attack " << (i + 1) << ": " << table.residuals[i][0] << " "
              << table.residuals[i][1] << " " << table.residuals[i][2] << " "
              << table.residuals[i][3] << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moving-target defense cost/effectiveness experiments for DC grids"};
  app.require_subcommand(1);

  CommonArgs cal_args, sweep_args, rb_args, daily_args, demo_args;
  int cal_trials = 0;
  int rb_plans = 500;
  double rb_bound = 0.02;
  std::string trace_path;

  auto* cal = app.add_subcommand("calibrate", "calibrate the detector threshold");
  add_common(cal, cal_args);
  cal->add_option("--trials", cal_trials, "calibration/validation trials");

  auto* sweep = app.add_subcommand("sweep", "effectiveness and cost vs gamma");
  add_common(sweep, sweep_args);

  auto* rb = app.add_subcommand("random-baseline", "random keyspace perturbations");
  add_common(rb, rb_args);
  rb->add_option("--n-plans", rb_plans, "number of random plans");
  rb->add_option("--bound", rb_bound, "relative reactance bound");

  auto* daily = app.add_subcommand("daily", "hourly load-trace replay");
  add_common(daily, daily_args);
  daily->add_option("--trace", trace_path, "load trace CSV")->required();

  auto* demo = app.add_subcommand("demo4", "4-bus residual table");
  add_common(demo, demo_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cal->parsed()) return cmd_calibrate(cal_args, cal_trials);
    if (sweep->parsed()) return cmd_sweep(sweep_args);
    if (rb->parsed()) return cmd_random_baseline(rb_args, rb_plans, rb_bound);
    if (daily->parsed()) return cmd_daily(daily_args, trace_path);
    if (demo->parsed()) return cmd_demo4(demo_args);
  } catch (const mtd::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const mtd::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
