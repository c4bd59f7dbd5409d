// annihilate-lab: command-line front end for simulations, coupling checks,
// the exact tree recursion, exact formulas, fits and manifest replay.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "annihilate/analysis.hpp"
#include "annihilate/checks.hpp"
#include "annihilate/experiments.hpp"
#include "annihilate/tree_exact.hpp"

using namespace annihilate;

namespace {

// Writes text to path, or to stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, int workers, std::string output) {
  ExperimentConfig c = load_config(config_path);
  if (!output.empty()) c.output = output;
  if (c.output.empty()) c.output = strip_extension(config_path) + ".csv";
  const ExperimentResult r = run_experiment(c, workers);
  write_outputs(r, c.output);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  Json summary{{"csv", c.output},
               {"manifest", strip_extension(c.output) + ".manifest.json"},
               {"csv_checksum", checksum(r.csv)},
               {"wall_seconds", r.wall_seconds},
               {"fit", r.fit}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_verify(const VerifyOptions& opts, const std::string& output) {
  const CheckReport r = verify_couplings(opts);
  emit(output, report_to_json(r).dump(2) + "\n");
  return r.ok() ? 0 : 1;
}

int cmd_tree_exact(int d, double p, int n_max, double tail_eps, const std::string& checks,
                   const std::string& output, const std::string& report_path) {
  const TreeSuite s = tree_check_suite(d, p, n_max, tail_eps, split_list(checks));
  CsvWriter csv({"sequence", "n", "mean", "zero_mass", "dropped_tail"});
  for (const RecursionSeries* series : {&s.w, &s.u})
    for (std::size_t n = 0; n < series->size(); ++n)
      csv.row_strings({series->kind == SequenceKind::kW ? "W" : "U", std::to_string(n),
                       fmt_num(series->means[n]), fmt_num(series->zero_mass[n]),
                       fmt_num(series->pmfs[n].dropped_tail)});
  emit(output, csv.text());
  Json report{{"d", d}, {"p", p}, {"n_max", n_max}, {"tail_eps", tail_eps},
              {"q", sb_coupling_q(d)}, {"checks", Json::array()}};
  for (const auto& r : s.reports) report["checks"].push_back(inequality_to_json(r));
  report["ok"] = s.ok();
  const std::string text = report.dump(2) + "\n";
  if (report_path.empty()) std::cerr << text;
  else write_text(report_path, text);
  return s.ok() ? 0 : 1;
}

struct FormulaArgs {
  std::string what;
  double p = 0.45;
  std::string p_grid = "0.40,0.45,0.475,0.49";
  std::int64_t k = 10;
  std::int64_t k_max = 40;
  int d = 1;
  std::int64_t r_max = 20;
  double c1 = 1.0;
  std::int64_t a_max = 5;
  std::int64_t x_max = 5;
  double t = 100;
  std::string output;
};

int cmd_exact(const FormulaArgs& f) {
  std::string text;
  if (f.what == "discrepancy") {
    const IntPmf law = discrepancy_pmf(f.k, f.p);
    CsvWriter csv({"d", "probability"});
    for (std::int64_t v = law.min_value(); v <= law.max_value(); ++v)
      if (law.at(v) > 0) csv.row_strings({std::to_string(v), fmt_num(law.at(v))});
    text = csv.text();
  } else if (f.what == "uk") {
    CsvWriter csv({"k", "expected_uk", "positive_part_mean", "envelope"});
    for (std::int64_t k = 0; k <= f.k_max; ++k) {
      const bool env = k >= 1 && f.p > 0 && f.p < 0.5;
      csv.row_strings({std::to_string(k), fmt_num(expected_Uk(k, f.p)), fmt_num(positive_part_mean(k, f.p)),
                       env ? fmt_num(positive_part_envelope(k, f.p)) : ""});
    }
    text = csv.text();
  } else if (f.what == "uplus") {
    CsvWriter csv({"p", "value", "value_from_one", "tail_bound", "k_cap", "scaled"});
    std::vector<std::pair<double, double>> series;
    for (const auto& item : split_list(f.p_grid)) {
      const UplusSum u = expected_Uplus(detail::parse_double(item));
      csv.row_strings({fmt_num(u.p), fmt_num(u.value), fmt_num(u.value_from_one), fmt_num(u.tail_bound),
                       std::to_string(u.k_cap), fmt_num(u.scaled)});
      series.emplace_back(1 - 2 * u.p, u.value);
    }
    text = csv.text();
    if (series.size() >= 3) std::cerr << Json{{"slope", fit_to_json(fit_power(series))}}.dump(2) << "\n";
  } else if (f.what == "devr") {
    CsvWriter csv({"r", "sites", "threshold", "probability", "exact", "hypothesis_holds"});
    for (std::int64_t r = 1; r <= f.r_max; ++r) {
      const DevrResult x = devr_tail(r, f.d, f.p, f.c1);
      csv.row_strings({std::to_string(r), std::to_string(x.sites), fmt_num(x.threshold),
                       fmt_num(x.probability),
                       x.exact ? "1" : "0", x.hypothesis_holds ? "1" : "0"});
    }
    text = csv.text();
  } else if (f.what == "gr") {
    CsvWriter csv({"a", "x", "probability", "time_bound"});
    for (std::int64_t a = 1; a <= f.a_max; ++a)
      for (std::int64_t x = 1; x <= f.x_max; ++x) {
        const double xf = static_cast<double>(x);
        const bool in_range = xf >= 3 * std::sqrt(f.t) && xf <= 2 * f.t;
        csv.row_strings({std::to_string(a), std::to_string(x), fmt_num(gr_prob(a, x)),
                         in_range ? fmt_num(gr_time_bound(a, x, f.t)) : ""});
      }
    text = csv.text();
  } else if (f.what == "rw") {
    const RwBounds b = rw_bounds(f.t);
    CsvWriter csv({"bound", "argument", "value"});
    csv.row_strings({"local_time", "", fmt_num(b.local_time)});
    const int steps = 10;
    for (int i = 0; i <= steps; ++i) {
      const double x = 2 * f.t * i / steps;
      csv.row_strings({"srw_max", fmt_num(x), fmt_num(b.srw(x))});
      if (x >= 1) {
        csv.row_strings({"poisson_tail", fmt_num(x), fmt_num(b.poisson(x))});
        csv.row_strings({"seq_hit", fmt_num(x), fmt_num(b.seq(x))});
      }
    }
    text = csv.text();
  } else {
    throw std::invalid_argument("unknown formula '" + f.what + "'");
  }
  emit(f.output, text);
  return 0;
}

int cmd_fit(const std::string& csv_path, const std::string& xcol, const std::string& ycol,
            const std::string& form, double x_min, double x_max) {
  std::stringstream in(read_text(csv_path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + csv_path);
  const auto header = split_list(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::invalid_argument("no column '" + name + "' in " + csv_path);
  };
  const std::size_t xi = column(xcol), yi = column(ycol);
  std::vector<std::pair<double, double>> series;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() <= std::max(xi, yi) || cells[xi].empty() || cells[yi].empty()) continue;
    const double x = detail::parse_double(cells[xi]), y = detail::parse_double(cells[yi]);
    if (x < x_min || x > x_max) continue;
    series.emplace_back(x, y);
  }
  FitResult f;
  if (form == "power") f = fit_power(series);
  else if (form == "log") f = fit_log(series);
  else throw std::invalid_argument("form must be power or log");
  std::cout << Json{{"form", form}, {"x", xcol}, {"y", ycol}, {"fit", fit_to_json(f)}}.dump(2) << "\n";
  return 0;
}

int cmd_replay(const std::string& manifest_path, int workers, const std::string& output) {
  const Json m = Json::parse(read_text(manifest_path));
  ReplayOutcome r;
  try {
    r = replay(m, workers);
  } catch (const ReplayRefused& e) {
    std::cerr << "replay refused: " << e.what() << "\n";
    return 3;
  }
  if (!output.empty()) write_text(output, r.result.csv);
  std::cout << Json{{"manifest", manifest_path},
                    {"identical", r.identical},
                    {"expected_checksum", r.expected_checksum},
                    {"actual_checksum", r.actual_checksum}}
                   .dump(2)
            << "\n";
  return r.identical ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-limited annihilation laboratory"};
  app.set_version_flag("--version", std::string(kCodeVersion));
  app.require_subcommand(1);

  // simulate
  std::string config_path, sim_output;
  int sim_workers = 0;
  auto* sim = app.add_subcommand("simulate", "Run an experiment from a config file");
  sim->add_option("config", config_path, "Config file (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("-w,--workers", sim_workers, "Worker threads (ANNIHILATE_WORKERS overrides)");
  sim->add_option("-o,--output", sim_output, "CSV path; manifest and fit are written alongside");

  // verify-couplings
  VerifyOptions vo;
  std::string graph_text = "line", verify_output;
  auto* ver = app.add_subcommand("verify-couplings", "Pathwise checks of the coupled constructions");
  ver->add_option("--check", vo.check)->required()->check(
      CLI::IsMember({"path-swap", "change-track", "sequential", "polarized", "monotone"}));
  ver->add_option("--trials", vo.trials)->check(CLI::PositiveNumber);
  ver->add_option("--seed", vo.seed);
  ver->add_option("--graph", graph_text, "line | lattice:d | torus:d:r | bitree:d:n");
  ver->add_option("--p", vo.p)->check(CLI::Range(0.0, 1.0));
  ver->add_option("--t", vo.t)->check(CLI::PositiveNumber);
  ver->add_option("--lambda-b", vo.lambda_b)->check(CLI::NonNegativeNumber);
  ver->add_option("--sites", vo.sites, "Segment length on the line")->check(CLI::PositiveNumber);
  ver->add_option("--samples", vo.samples)->check(CLI::PositiveNumber);
  ver->add_option("-w,--workers", vo.workers);
  ver->add_option("-o,--output", verify_output, "JSON report path (default stdout)");

  // tree-exact
  int tree_d = 2, tree_n = 100;
  double tree_p = 0.5, tree_eps = kDefaultTailEps;
  std::string tree_checks = "logconcave,sizebias,dominance,anticoncentration,growth";
  std::string tree_output, tree_report;
  auto* tree = app.add_subcommand("tree-exact", "Exact W_n and U_n laws with inequality checks");
  tree->add_option("--d", tree_d)->check(CLI::Range(2, 64));
  tree->add_option("--p", tree_p)->check(CLI::Range(0.0, 1.0));
  tree->add_option("--n-max", tree_n)->check(CLI::Range(1, 100000));
  tree->add_option("--tail-eps", tree_eps)->check(CLI::NonNegativeNumber);
  tree->add_option("--checks", tree_checks, "Comma-separated check names (may be empty)");
  tree->add_option("-o,--output", tree_output, "CSV path (default stdout)");
  tree->add_option("--report", tree_report, "JSON report path (default stderr)");

  // exact-formulas
  FormulaArgs fa;
  auto* ex = app.add_subcommand("exact-formulas", "Exact discrepancy and random-walk formulas");
  ex->add_option("--what", fa.what)->required()->check(
      CLI::IsMember({"discrepancy", "uk", "uplus", "devr", "gr", "rw"}));
  ex->add_option("--p", fa.p)->check(CLI::Range(0.0, 1.0));
  ex->add_option("--p-grid", fa.p_grid, "uplus: comma-separated p values in (1/4, 1/2)");
  ex->add_option("--k", fa.k, "discrepancy: number of sites")->check(CLI::NonNegativeNumber);
  ex->add_option("--k-max", fa.k_max, "uk: largest k")->check(CLI::NonNegativeNumber);
  ex->add_option("--d", fa.d, "devr: dimension")->check(CLI::PositiveNumber);
  ex->add_option("--r-max", fa.r_max, "devr: largest radius")->check(CLI::PositiveNumber);
  ex->add_option("--c1", fa.c1, "devr: threshold constant")->check(CLI::PositiveNumber);
  ex->add_option("--a-max", fa.a_max, "gr: largest a")->check(CLI::PositiveNumber);
  ex->add_option("--x-max", fa.x_max, "gr: largest x")->check(CLI::PositiveNumber);
  ex->add_option("--t", fa.t, "gr, rw: time")->check(CLI::PositiveNumber);
  ex->add_option("-o,--output", fa.output, "CSV path (default stdout)");

  // fit
  std::string fit_csv, fit_x = "t", fit_y = "mean_v", fit_form = "power";
  double fit_min = -HUGE_VAL, fit_max = HUGE_VAL;
  auto* fit = app.add_subcommand("fit", "Least-squares fit of one CSV column against another");
  fit->add_option("csv", fit_csv)->required()->check(CLI::ExistingFile);
  fit->add_option("--x", fit_x);
  fit->add_option("--y", fit_y);
  fit->add_option("--form", fit_form)->check(CLI::IsMember({"power", "log"}));
  fit->add_option("--x-min", fit_min);
  fit->add_option("--x-max", fit_max);

  // replay
  std::string manifest_path, replay_output;
  int replay_workers = 0;
  auto* rep = app.add_subcommand("replay", "Rerun a manifest and compare the CSV checksum");
  rep->add_option("manifest", manifest_path)->required()->check(CLI::ExistingFile);
  rep->add_option("-w,--workers", replay_workers);
  rep->add_option("-o,--output", replay_output, "Write the replayed CSV here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(config_path, sim_workers, sim_output);
    if (*ver) {
      vo.graph = GraphSpec::parse(graph_text);
      return cmd_verify(vo, verify_output);
    }
    if (*tree) return cmd_tree_exact(tree_d, tree_p, tree_n, tree_eps, tree_checks, tree_output, tree_report);
    if (*ex) return cmd_exact(fa);
    if (*fit) return cmd_fit(fit_csv, fit_x, fit_y, fit_form, fit_min, fit_max);
    if (*rep) return cmd_replay(manifest_path, replay_workers, replay_output);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
