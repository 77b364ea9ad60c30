// iada_lab — command-line front end for the adaptation laboratory.
//
// Verbs:
//   gen     — synthesize a source/target dataset pair
//   train   — run the multi-seed training protocol on generated data
//   sweep   — line search over lambda_reg or lambda_adv
//   theory  — numeric checks: bound | convergence | gradnorm | complexity | alloc
//   report  — summarize the outputs found in a results directory
//
// Exit codes: 0 success, 2 usage/config error, 3 runtime/divergence.
// All outputs are deterministic given the config; timestamps appear only in
// the sidecar run.log.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iada/iada.hpp"

namespace fs = std::filesystem;
using namespace iada;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

void append_log(const std::string& out_dir, const std::string& message) {
  std::ofstream log(out_dir + "/run.log", std::ios::app);
  if (!log) return;  // the log is best-effort; outputs are what matter
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
  log << buf << "Z " << message << "\n";
}

void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
  // Probe writability up front so failures map to exit 2, not mid-run.
  const std::string probe = out_dir + "/.write_probe";
  std::ofstream f(probe);
  if (!f) throw IoError("output directory not writable: " + out_dir);
  f.close();
  fs::remove(probe, ec);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failed on " + path);
}

struct LoadedData {
  LabeledDomain source;
  UnlabeledDomain target;
  ExperimentConfig manifest;
};

LoadedData load_dataset(const std::string& data_dir) {
  const std::string manifest_path = data_dir + "/manifest.cfg";
  if (!fs::exists(manifest_path))
    throw IoError("no manifest.cfg in data directory " + data_dir +
                  " (run `iada_lab gen` first)");
  LoadedData d;
  d.manifest = materialize_config(parse_config_file(manifest_path));
  const std::size_t C = d.manifest.domains.classes;
  d.source = load_labeled_csv(data_dir + "/source.csv", C);
  d.target = load_unlabeled_csv(data_dir + "/target.csv",
                                data_dir + "/target.labels.csv", C);
  return d;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

int cmd_gen(const ExperimentConfig& cfg, const std::string& out_dir) {
  ensure_out_dir(out_dir);
  auto [source, target] = generate_pair(cfg.domains.source_spec(),
                                        cfg.domains.target_spec());
  save_labeled_csv(source, out_dir + "/source.csv", "source");
  save_unlabeled_csv(target, out_dir + "/target.csv",
                     out_dir + "/target.labels.csv", "target");
  write_text(out_dir + "/manifest.cfg", config_to_text(cfg));
  append_log(out_dir, "gen: wrote source.csv/target.csv/target.labels.csv");
  std::cout << "wrote " << out_dir << "/source.csv (" << source.n()
            << " rows), target.csv (" << target.n() << " rows)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const ExperimentConfig& cfg, const std::string& data_dir,
              const std::string& out_dir) {
  LoadedData data = load_dataset(data_dir);
  if (data.source.d() != cfg.domains.d)
    throw ConfigError("config d=" + std::to_string(cfg.domains.d) +
                      " does not match dataset d=" + std::to_string(data.source.d()));
  if (data.source.num_classes != cfg.domains.classes)
    throw ConfigError("config classes=" + std::to_string(cfg.domains.classes) +
                      " does not match dataset classes=" +
                      std::to_string(data.source.num_classes));
  ensure_out_dir(out_dir);

  const auto splits = stratified_split(data.source, {0.6, 0.2, 0.2});
  const LabeledDomain& train_set = splits[0];
  const LabeledDomain& val_set = splits[1];
  const LabeledDomain& test_set = splits[2];
  const LabeledDomain target_eval = data.target.evaluation_view();

  const TrainOutput out = train(train_set, val_set, data.target, cfg.train,
                                {{"val", val_set},
                                 {"source_test", test_set},
                                 {"target", target_eval}});

  out.record.write_metrics_csv(out_dir + "/metrics.csv");
  out.record.write_summary_csv(out_dir + "/summary.csv");
  save_checkpoint(out.params(), out_dir + "/checkpoint.bin",
                  out_dir + "/checkpoint.manifest.csv");
  write_text(out_dir + "/train.cfg", config_to_text(cfg));
  append_log(out_dir, "train: " + std::to_string(cfg.train.seeds.size()) +
                          " seed(s), " + std::to_string(cfg.train.iterations) +
                          " iterations");
  std::cout << "wrote " << out_dir << "/metrics.csv, summary.csv, checkpoint.bin\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
              const std::vector<double>& grid, const std::string& out_dir) {
  SweepAxis ax;
  if (axis == "lambda_reg") ax = SweepAxis::lambda_reg;
  else if (axis == "lambda_adv") ax = SweepAxis::lambda_adv;
  else
    throw ConfigError("unknown sweep axis '" + axis +
                      "'; valid: lambda_reg, lambda_adv");
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  ensure_out_dir(out_dir);

  auto [source, target] = generate_pair(cfg.domains.source_spec(),
                                        cfg.domains.target_spec());
  const auto splits = stratified_split(source, {0.6, 0.2, 0.2});
  const SweepTable table =
      ablation_sweep(cfg.train, ax, grid, splits[0], splits[1], target);
  table.write_csv(out_dir + "/sweep.csv");
  write_text(out_dir + "/sweep.cfg", config_to_text(cfg));
  append_log(out_dir, "sweep: axis=" + axis + ", " +
                          std::to_string(grid.size()) + " grid points");
  std::cout << "wrote " << out_dir << "/sweep.csv\n";
  for (const auto& r : table.rows)
    std::cout << "  " << axis << "=" << fmt17(r.value)
              << "  target AUC mean=" << fmt17(r.auc_mean)
              << "  cv%=" << fmt17(r.auc_cv_percent) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// theory
// ---------------------------------------------------------------------------

int theory_alloc(const ExperimentConfig& cfg, const std::string& out_dir) {
  const long B = cfg.theory.batch_budget_B;
  const BatchAllocation raw =
      allocate_batches(cfg.domains.source_pi, cfg.domains.target_pi, B, false);
  const BatchAllocation norm =
      allocate_batches(cfg.domains.source_pi, cfg.domains.target_pi, B, true);
  CsvWriter w(out_dir + "/theory_alloc.csv");
  w.row({"class", "b_raw", "b_normalized"});
  long int_sum = 0;
  for (std::size_t c = 0; c < raw.b.size(); ++c) {
    w.row({std::to_string(c + 1), fmt17(raw.b[c]),
           std::to_string(norm.b_int[c])});
    int_sum += norm.b_int[c];
  }
  const double raw_sum = raw.raw_sum();
  std::ostringstream os;
  os << "allocation check (B=" << B << ")\n";
  os << "  raw formula sum = " << fmt17(raw_sum)
     << (std::fabs(raw_sum - static_cast<double>(B)) > 1e-9
             ? "  [budget mismatch: raw rule does not satisfy sum b_i = B]"
             : "")
     << "\n";
  os << "  normalized sum  = " << int_sum << "\n";
  const bool pass = int_sum == B;
  os << (pass ? "PASS" : "FAIL") << ": normalized allocation meets the budget\n";
  write_text(out_dir + "/theory_alloc.txt", os.str());
  std::cout << os.str();
  return pass ? kExitOk : kExitRuntime;
}

int theory_convergence(const ExperimentConfig& cfg, const std::string& out_dir) {
  bool all_pass = true;
  std::ostringstream os;
  CsvWriter w(out_dir + "/theory_convergence.csv");
  w.row({"dim", "case", "t", "mean_suboptimality", "bound"});
  for (std::size_t dim : cfg.theory.convergence_dims) {
    for (const bool balanced : {false, true}) {
      const std::vector<double> pi_s =
          balanced ? std::vector<double>{0.5, 0.5} : cfg.domains.source_pi;
      const std::vector<double> pi_t =
          balanced ? std::vector<double>{0.5, 0.5} : cfg.domains.target_pi;
      const QuadraticProblem prob = make_quadratic_problem(dim, pi_s, pi_t, 123);
      const ConvergenceReport rep = verify_convergence(
          prob, cfg.theory.convergence_seeds, cfg.theory.convergence_iters);
      const std::string label = balanced ? "balanced" : "imbalanced";
      for (const auto& p : rep.trajectory)
        w.row({std::to_string(dim), label, std::to_string(p.t),
               fmt17(p.mean_suboptimality), fmt17(p.bound)});
      os << "dim=" << dim << " " << label << ": mu=" << fmt17(rep.mu)
         << " beta=" << fmt17(rep.beta_smooth) << " C_pi=" << fmt17(rep.c_pi)
         << " violations=" << rep.violations
         << " projections=" << rep.projection_events << "\n";
      if (rep.violations > 0) all_pass = false;
    }
  }
  os << (all_pass ? "PASS" : "FAIL")
     << ": mean suboptimality within the convergence bound at every logged t\n";
  write_text(out_dir + "/theory_convergence.txt", os.str());
  std::cout << os.str();
  return all_pass ? kExitOk : kExitRuntime;
}

int theory_gradnorm(const ExperimentConfig& cfg, const std::string& out_dir) {
  const QuadraticProblem prob = make_quadratic_problem(
      2, cfg.domains.source_pi, cfg.domains.target_pi, 321);
  const GradNormReport rep = gradient_norm_check(
      prob, cfg.theory.gradnorm_w_samples, 77, cfg.theory.gradnorm_mc_draws);
  CsvWriter w(out_dir + "/theory_gradnorm.csv");
  w.row({"quantity", "value"});
  w.row({"max_exact", fmt17(rep.max_exact)});
  w.row({"mc_estimate", fmt17(rep.mc_estimate)});
  w.row({"mc_stderr", fmt17(rep.mc_stderr)});
  w.row({"bound_cpi_G2", fmt17(rep.bound)});
  const bool pass = rep.max_exact <= rep.bound &&
                    rep.mc_estimate <= rep.bound + 3.0 * rep.mc_stderr;
  std::ostringstream os;
  os << "gradient norm lemma: max E||g||^2 = " << fmt17(rep.max_exact)
     << " vs C_pi G^2 = " << fmt17(rep.bound) << "\n";
  os << (pass ? "PASS" : "FAIL") << ": expected squared gradient norm within the lemma bound\n";
  write_text(out_dir + "/theory_gradnorm.txt", os.str());
  std::cout << os.str();
  return pass ? kExitOk : kExitRuntime;
}

int theory_complexity(const ExperimentConfig& cfg, const std::string& out_dir) {
  const ComplexityReport est = complexity_estimate(
      cfg.domains.source_n, cfg.domains.target_n, cfg.domains.d,
      cfg.domains.classes, cfg.domains.source_pi, cfg.domains.target_pi);
  const TimingReport timing = timing_scaling_check(
      cfg.theory.timing_sizes, [](long n, std::size_t d) {
        return std::min(time_training_epoch(n, d), time_training_epoch(n, d));
      });
  CsvWriter w(out_dir + "/theory_complexity.csv");
  w.row({"n", "d", "epoch_seconds"});
  for (const auto& p : timing.points)
    w.row({std::to_string(p.n), std::to_string(p.d), fmt17(p.seconds)});
  const bool pass = timing.slope >= 0.8 && timing.slope <= 1.2;
  std::ostringstream os;
  os << "cost expressions: time_raw=" << fmt17(est.time_raw)
     << " time_balanced=" << fmt17(est.time_balanced)
     << " space_raw=" << fmt17(est.space_raw) << "\n";
  os << "epoch timing log-log slope vs n*d: " << fmt17(timing.slope) << "\n";
  os << (pass ? "PASS" : "FAIL") << ": slope within [0.8, 1.2]\n";
  write_text(out_dir + "/theory_complexity.txt", os.str());
  std::cout << os.str();
  return pass ? kExitOk : kExitRuntime;
}

int theory_bound(const ExperimentConfig& cfg, const std::string& out_dir) {
  auto [source, target] = generate_pair(cfg.domains.source_spec(),
                                        cfg.domains.target_spec());
  const auto splits = stratified_split(source, {0.6, 0.2, 0.2});
  const LabeledDomain target_eval = target.evaluation_view();

  TrainConfig tc = cfg.train;
  tc.iterations = cfg.theory.bound_train_iterations;
  tc.seeds = {cfg.train.seeds.front()};
  const TrainOutput run = train(splits[0], splits[1], target, tc,
                                {{"source_test", splits[2]}, {"target", target_eval}});
  const EvalMetrics src_m = run.record.finals.at({tc.seeds[0], "source_test"});
  const EvalMetrics tgt_m = run.record.finals.at({tc.seeds[0], "target"});
  const double eps_s = 1.0 - src_m.accuracy;
  const double eps_t = 1.0 - tgt_m.accuracy;

  ProbeConfig pc;
  pc.iterations = cfg.theory.probe_iterations;
  pc.learning_rate = cfg.theory.probe_learning_rate;
  std::vector<double> d_per_class(cfg.domains.classes, 0.0);
  for (std::size_t c = 0; c < cfg.domains.classes; ++c)
    d_per_class[c] = estimate_class_discrepancy(source, target_eval,
                                                static_cast<int>(c + 1), pc);
  const double lambda_joint =
      estimate_joint_error(source, target_eval, cfg.domains.classes, pc);

  const GenBoundReport rep = generalization_bound(
      eps_s, source.pi_empirical, target_eval.pi_empirical, d_per_class,
      lambda_joint, eps_t);
  CsvWriter w(out_dir + "/theory_bound.csv");
  w.row({"term", "value", "provenance"});
  w.row({"eps_s", fmt17(rep.eps_s), "measured source test error"});
  w.row({"proportion_gap", fmt17(rep.proportion_gap), "sum |pi_s - pi_t|"});
  w.row({"discrepancy_term", fmt17(rep.discrepancy_term),
         "sum min(pi) * d_i from domain probes"});
  w.row({"lambda_joint", fmt17(rep.lambda_joint), "pooled-probe error"});
  w.row({"bound", fmt17(rep.bound), "sum of the four terms"});
  w.row({"eps_t_observed", fmt17(rep.eps_t_observed), "measured target error"});
  const bool pass = rep.eps_t_observed <= rep.bound;
  std::ostringstream os;
  os << "generalization bound: eps_t=" << fmt17(rep.eps_t_observed)
     << " <= bound=" << fmt17(rep.bound) << "?\n";
  os << (pass ? "PASS" : "FAIL") << ": observed target error within the bound\n";
  write_text(out_dir + "/theory_bound.txt", os.str());
  std::cout << os.str();
  return pass ? kExitOk : kExitRuntime;
}

int cmd_theory(const ExperimentConfig& cfg, const std::string& subcheck,
               const std::string& out_dir) {
  const std::vector<std::string> valid = {"bound", "convergence", "gradnorm",
                                          "complexity", "alloc"};
  if (std::find(valid.begin(), valid.end(), subcheck) == valid.end()) {
    std::string names;
    for (const auto& v : valid) names += (names.empty() ? "" : ", ") + v;
    throw ConfigError("unknown theory subcheck '" + subcheck + "'; valid: " + names);
  }
  ensure_out_dir(out_dir);
  int rc = kExitOk;
  if (subcheck == "alloc") rc = theory_alloc(cfg, out_dir);
  else if (subcheck == "convergence") rc = theory_convergence(cfg, out_dir);
  else if (subcheck == "gradnorm") rc = theory_gradnorm(cfg, out_dir);
  else if (subcheck == "complexity") rc = theory_complexity(cfg, out_dir);
  else rc = theory_bound(cfg, out_dir);
  append_log(out_dir, "theory " + subcheck + ": rc=" + std::to_string(rc));
  return rc;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::string& out_dir) {
  std::ostringstream os;
  bool found = false;
  const std::string summary_path = out_dir + "/summary.csv";
  if (fs::exists(summary_path)) {
    found = true;
    os << "== training summary (" << summary_path << ")\n";
    for (const auto& row : read_csv(summary_path)) {
      os << "  ";
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "  " : "") << row[i];
      os << "\n";
    }
  }
  const std::string sweep_path = out_dir + "/sweep.csv";
  if (fs::exists(sweep_path)) {
    found = true;
    os << "== sweep (" << sweep_path << ")\n";
    for (const auto& row : read_csv(sweep_path)) {
      os << "  ";
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "  " : "") << row[i];
      os << "\n";
    }
  }
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("theory_", 0) == 0 && name.size() > 4 &&
        name.substr(name.size() - 4) == ".txt") {
      found = true;
      std::ifstream f(entry.path());
      std::ostringstream ss;
      ss << f.rdbuf();
      os << "== " << name << "\n" << ss.str();
    }
  }
  if (!found)
    throw IoError("no summary.csv, sweep.csv, or theory_*.txt in " + out_dir);
  write_text(out_dir + "/report.txt", os.str());
  std::cout << os.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iada_lab: imbalance-aware domain adaptation laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preset;
  long seed_override = -1;
  app.add_option("--config", config_path, "configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--preset", preset,
                 "preset name (ed4-ed4, ed4-ed3, ed4-ed2, ed4-ed1)");
  app.add_option("--seed-override", seed_override,
                 "replace the configured seed list with this single seed");

  auto* gen = app.add_subcommand("gen", "synthesize a dataset pair");
  std::string data_dir;
  auto* train_cmd = app.add_subcommand("train", "run the training protocol");
  train_cmd->add_option("--data", data_dir, "directory produced by gen")->required();
  auto* sweep = app.add_subcommand("sweep", "line search over a loss weight");
  std::string axis;
  std::vector<double> grid;
  sweep->add_option("--axis", axis, "lambda_reg or lambda_adv")->required();
  sweep->add_option("--grid", grid, "grid values")->required()->delimiter(',');
  auto* theory = app.add_subcommand("theory", "numeric theory checks");
  std::string subcheck;
  theory->add_option("subcheck", subcheck,
                     "bound | convergence | gradnorm | complexity | alloc")
      ->required();
  auto* report = app.add_subcommand("report", "summarize a results directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (report->parsed()) {
      if (out_dir.empty()) throw ConfigError("report requires --out DIR");
      return cmd_report(out_dir);
    }
    if (out_dir.empty()) throw ConfigError("missing --out DIR");
    const ExperimentConfig cfg = resolve_config(preset, config_path, seed_override);
    if (gen->parsed()) return cmd_gen(cfg, out_dir);
    if (train_cmd->parsed()) return cmd_train(cfg, data_dir, out_dir);
    if (sweep->parsed()) return cmd_sweep(cfg, axis, grid, out_dir);
    if (theory->parsed()) return cmd_theory(cfg, subcheck, out_dir);
    throw ConfigError("no subcommand given");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValueError& e) {
    std::cerr << "invalid value: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingDiverged& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
