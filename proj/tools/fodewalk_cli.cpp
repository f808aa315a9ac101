// fodewalk: unbiased Monte-Carlo solution and parameter sensitivities of
// fractional-in-time linear ODE systems, plus the validation, Robin-sweep
// and scaling experiments.  Exit codes: 0 success, 2 problem validation
// error (offending row named), 3 numerical failure.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fodewalk/estimator.hpp"
#include "fodewalk/experiments.hpp"
#include "fodewalk/ml.hpp"
#include "fodewalk/problem.hpp"
#include "fodewalk/report_io.hpp"

using namespace fodewalk;

namespace {

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  out << text;
}

int cmd_solve(const std::string& problem_path, std::optional<std::uint64_t> walks,
              unsigned workers, std::optional<std::uint64_t> seed,
              const std::string& mode, const std::string& out_path,
              const std::string& format, double level, bool echo_problem) {
  FodeProblem p = load_problem_json(problem_path);
  if (walks) p.num_walks = *walks;
  if (seed) p.seed = *seed;
  if (mode == "simplified")
    p.mode = Mode::Simplified;
  else if (mode == "general")
    p.mode = Mode::General;
  else if (!mode.empty())
    throw CLI::ValidationError("--mode", "must be simplified or general");
  if (echo_problem) std::cout << serialize_problem_json(p);

  // Fail fast with the row named; alpha = 1 rows are fine (classical limit).
  validate_problem(p, p.mode, {.allow_unit_alpha = true});
  EstimateConfig cfg;
  cfg.workers = workers;
  cfg.level = level;
  cfg.sensitivities = p.mode == Mode::Simplified;
  EstimateReport rep = estimate(p, cfg);
  const std::string hash = problem_hash(p);
  write_output(format == "csv" ? serialize_report_csv(rep, hash)
                               : serialize_report_json(rep, hash),
               out_path);
  std::fprintf(stderr, "solution %.10g +- %.3g (n_walks %llu, jumps mean %.3g)\n",
               rep.value.mean, rep.value.ci_hi - rep.value.mean,
               static_cast<unsigned long long>(rep.n_s), rep.jumps_mean);
  return 0;
}

int cmd_validate(const ValidationConfig& cfg, const std::string& out_path) {
  const ValidationTable t = run_validation(cfg);
  std::string text;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "n=%d systems=%d walks=%llu seed=%llu level=%g n_t=%d\n",
                cfg.n, cfg.systems, static_cast<unsigned long long>(cfg.n_s),
                static_cast<unsigned long long>(cfg.seed), cfg.level, cfg.n_t);
  text += buf;
  text += "quantity      u_i(T)  du/dA  du/dalpha  du/du0  du/dT\n";
  std::snprintf(buf, sizeof buf, "tests passed  %6d  %5d  %9d  %6d  %5d\n",
                t.passed[0], t.passed[1], t.passed[2], t.passed[3], t.passed[4]);
  text += buf;
  if (t.errors) {
    std::snprintf(buf, sizeof buf, "systems with errors: %d\n", t.errors);
    text += buf;
    for (std::size_t k = 0; k < t.rows.size(); ++k)
      if (!t.rows[k].note.empty())
        text += "  system " + std::to_string(k) + ": " + t.rows[k].note + "\n";
  }
  write_output(text, out_path);
  if (!out_path.empty()) std::cout << text;
  return 0;
}

int cmd_robin(const RobinConfig& cfg, const std::string& out_path) {
  const RobinTable t = run_robin(cfg);
  std::string text;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "n_x=%d T=%g alpha0=%g a11_0=%.10g walks=%llu resamples=%d "
                "level=%g seed=%llu\n",
                cfg.n_x, cfg.T, cfg.alpha0, t.a11_0,
                static_cast<unsigned long long>(cfg.n_s), cfg.b_resamples,
                cfg.level, static_cast<unsigned long long>(cfg.seed));
  text += buf;
  text += "param  value         quantity  deterministic  ci_lo         "
          "ci_hi         overlap\n";
  for (const auto& pt : t.points) {
    std::snprintf(buf, sizeof buf, "%-5s  %-12.6g  %-8s  %-13.6g  %-12.6g  "
                  "%-12.6g  %s\n",
                  pt.param.c_str(), pt.value, pt.quantity.c_str(), pt.det,
                  pt.ci.lo, pt.ci.hi, pt.overlap ? "yes" : "NO");
    text += buf;
  }
  std::snprintf(buf, sizeof buf, "overlaps %d/%d\n", t.overlaps,
                static_cast<int>(t.points.size()));
  text += buf;
  write_output(text, out_path);
  if (!out_path.empty()) std::cout << text;
  return 0;
}

int cmd_bench(const BenchConfig& cfg, const std::string& out_path) {
  const BenchReport r = run_bench(cfg);
  std::string text;
  char buf[256];
  auto dump = [&](const BenchSweep& s, const char* note) {
    std::snprintf(buf, sizeof buf, "sweep %s (%s), slope %.4f, r2 %.5f\n",
                  s.name.c_str(), note, s.slope, s.r2);
    text += buf;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      std::snprintf(buf, sizeof buf,
                    "  %-4s %-8.5g mean_jumps %-12.6g wall_us %-.4g\n",
                    s.name.c_str(), s.x[i], s.mean_jumps[i], s.wall_us[i]);
      text += buf;
    }
  };
  char note[64];
  for (const auto& s : r.t_sweeps) {
    std::snprintf(note, sizeof note, "alpha = %g", s.param);
    dump(s, note);
  }
  dump(r.nx_sweep, "alpha = 1, log-log");
  std::snprintf(note, sizeof note, "alpha = %g, linear fit", r.d_sweep.param);
  dump(r.d_sweep, note);
  text += "wall_us columns are informational; jump counts carry the scaling\n";
  write_output(text, out_path);
  if (!out_path.empty()) std::cout << text;
  return 0;
}

int cmd_ml_eval(double alpha, double beta, double z, bool derivs) {
  const ml::MlValue v = ml::ml_eval({alpha, beta, z}, derivs);
  std::printf("{\"alpha\": %.17g, \"beta\": %.17g, \"z\": %.17g, "
              "\"value\": %.17g",
              alpha, beta, z, v.value);
  if (derivs) std::printf(", \"d_alpha\": %.17g, \"d_z\": %.17g", v.d_alpha, v.d_z);
  std::printf("}\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo solution and sensitivities of fractional-in-time "
               "linear ODE systems"};
  app.require_subcommand(1);

  std::string problem_path, out_path, format = "json", mode;
  std::optional<std::uint64_t> walks, seed;
  unsigned workers = 1;
  double level = 0.05;
  bool echo_problem = false;

  auto* solve = app.add_subcommand("solve", "estimate u(T) and sensitivities");
  solve->add_option("--problem", problem_path, "problem JSON file")->required();
  solve->add_option("--walks", walks, "number of walks (overrides the file)");
  solve->add_option("--workers", workers, "worker threads");
  solve->add_option("--seed", seed, "master seed (overrides the file)");
  solve->add_option("--mode", mode, "simplified|general (overrides the file)");
  solve->add_option("--out", out_path, "report path (default stdout)");
  solve->add_option("--format", format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));
  solve->add_option("--level", level, "two-sided interval level p");
  solve->add_flag("--echo-problem", echo_problem, "print the canonical problem");

  ValidationConfig vcfg;
  auto* validate = app.add_subcommand(
      "validate", "reproduce the 100-system hypothesis-test table");
  validate->add_option("--systems", vcfg.systems, "number of random systems");
  validate->add_option("--size", vcfg.n, "system dimension");
  validate->add_option("--walks", vcfg.n_s, "walks per system");
  validate->add_option("--seed", vcfg.seed, "master seed");
  validate->add_option("--workers", vcfg.workers, "FD solver threads");
  validate->add_option("--level", vcfg.level, "test level p");
  validate->add_option("--nt", vcfg.n_t, "L1 timesteps");
  validate->add_option("--out", out_path, "also write the table to a file");

  RobinConfig rcfg;
  auto* robin = app.add_subcommand(
      "robin", "Robin-boundary loss sweep with bootstrap intervals");
  robin->add_option("--nx", rcfg.n_x, "grid count");
  robin->add_option("--T", rcfg.T, "final time");
  robin->add_option("--walks", rcfg.n_s, "walks per sweep point");
  robin->add_option("--resamples", rcfg.b_resamples, "bootstrap resamples");
  robin->add_option("--level", rcfg.level, "interval level p");
  robin->add_option("--seed", rcfg.seed, "master seed");
  robin->add_option("--nt", rcfg.n_t, "L1 timesteps");
  robin->add_option("--out", out_path, "also write the table to a file");

  BenchConfig bcfg;
  auto* bench = app.add_subcommand("bench", "jump-count scaling sweeps");
  bench->add_option("--walks", bcfg.n_s, "walks per point");
  bench->add_option("--seed", bcfg.seed, "master seed");
  bench->add_option("--nx", bcfg.n_x, "grid count of the T sweep");
  bench->add_option("--out", out_path, "also write the report to a file");

  double ml_alpha = 0.5, ml_beta = 1.0, ml_z = 0.0;
  bool ml_derivs = false;
  auto* mleval = app.add_subcommand("ml-eval", "evaluate E_{alpha,beta}(z)");
  mleval->add_option("--alpha", ml_alpha, "first index, in (0,1]")->required();
  mleval->add_option("--beta", ml_beta, "second index (default 1)");
  mleval->add_option("--z", ml_z, "argument")->required();
  mleval->add_flag("--derivs", ml_derivs, "also print d_alpha and d_z");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed())
      return cmd_solve(problem_path, walks, workers, seed, mode, out_path,
                       format, level, echo_problem);
    if (validate->parsed()) return cmd_validate(vcfg, out_path);
    if (robin->parsed()) return cmd_robin(rcfg, out_path);
    if (bench->parsed()) return cmd_bench(bcfg, out_path);
    if (mleval->parsed()) return cmd_ml_eval(ml_alpha, ml_beta, ml_z, ml_derivs);
  } catch (const ValidationError& e) {
    if (e.row >= 0)
      std::fprintf(stderr, "validation error (row %d): %s\n", e.row + 1, e.what());
    else
      std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
  return 0;
}
