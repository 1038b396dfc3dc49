// dbql: command-line front end for the simulator.
//
//   dbql plan   [--gamma G] [--tol E] [--config FILE] [--out FILE]
//   dbql run    --config FILE [--seed S] [--out DIR] [--trials N] [--steps T]
//   dbql sweep  [--agents 10..100:10] [--modes all] [--config FILE] [--trials N] [--steps T] [--seed S] [--out DIR]
//   dbql table1 --in DIR [--out FILE]
//   dbql plots  --in DIR
//
// Worker threads come from $DBQL_WORKERS. Exit codes: 0 success, 1 config
// error, 2 runtime error.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "dbql/artifacts.hpp"
#include "dbql/errors.hpp"
#include "dbql/harness.hpp"
#include "dbql/planner.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> trials;
  std::optional<std::uint64_t> steps;
  std::optional<std::string> out;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--trials", trials, "number of trials");
    cmd->add_option("--steps", steps, "horizon T (schedules are rescaled to it)");
    cmd->add_option("--out", out, "output directory");
  }

  void apply(dbql::ExperimentConfig& c) const {
    if (seed) c.master_seed = *seed;
    if (trials) c.trials = *trials;
    if (steps) c.trial.schedules.horizon = *steps;
    if (out) c.output_dir = *out;
    c.validate();
  }
};

int cmd_plan(double gamma, double tol, const std::string& config_path, const std::string& out) {
  dbql::GridSpec grid;
  if (!config_path.empty()) {
    const auto c = dbql::load_config(config_path);
    grid = c.trial.grid;
    gamma = c.trial.gamma;
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw dbql::ConfigError("gamma", "must lie in [0, 1)");
  if (!(tol > 0.0)) throw dbql::ConfigError("tol", "must be positive");
  const auto opt = dbql::value_iteration(grid, gamma, tol);
  const auto csv = dbql::qvalues_csv(opt.values, grid);
  if (out.empty()) {
    std::cout << csv;
  } else {
    const fs::path p(out);
    dbql::write_artifact(p.has_parent_path() ? p.parent_path() : fs::path("."), p.filename().string(), csv);
  }
  std::fprintf(stderr, "value iteration: gamma=%g residual=%.3g\n", gamma, opt.residual);
  return 0;
}

int cmd_run(const std::string& config_path, const Overrides& ov) {
  auto config = dbql::load_config(config_path);
  ov.apply(config);
  const auto batch = dbql::run_batch(config);
  const auto& m = batch.metrics;
  std::printf("%s, N=%u: S_under=%.6g final loss=%.4g R_valid mean=%.4f trailing=%.4f (%.1fs)\n",
              dbql::label(config.trial.mode).c_str(), config.trial.n_agents, m.s_under, m.loss.back(), m.valid_rate_mean,
              m.valid_rate_trailing, batch.manifest.wall_seconds);
  std::printf("artifacts in %s\n", config.output_dir.string().c_str());
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& agents, const std::string& modes, const Overrides& ov) {
  dbql::ExperimentConfig base;
  base.output_dir = "sweep";
  if (!config_path.empty()) base = dbql::load_config(config_path);
  ov.apply(base);
  const auto ns = dbql::parse_agent_range(agents);
  for (auto n : ns) {
    auto c = base;
    c.trial.n_agents = n;
    c.validate();
  }
  const auto ms = dbql::parse_modes(modes);
  const auto sweep = dbql::run_sweep(base, ns, ms);
  for (const auto& row : sweep.table1)
    std::printf("%-8s N=%3u ratio=%.3f\n", std::string(dbql::to_string(row.policy)).c_str(), row.n_agents, row.ratio);
  std::printf("artifacts in %s\n", base.output_dir.string().c_str());
  return 0;
}

// Run directories below `dir`, identified by their config.json.
std::vector<fs::path> run_dirs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (fs::exists(dir / "config.json") && fs::exists(dir / "loss.csv")) out.push_back(dir);
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && fs::exists(e.path() / "config.json") && fs::exists(e.path() / "summary.json"))
        out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_table1(const std::string& in, const std::string& out) {
  std::vector<dbql::ModeResult> conflict, conflict_free;
  for (const auto& d : run_dirs(in)) {
    auto c = dbql::load_config(d / "config.json");
    const auto summary = nlohmann::json::parse(dbql::read_file(d / "summary.json"));
    (c.trial.mode.conflict == dbql::ConflictMode::Free ? conflict_free : conflict)
        .push_back({c, summary.at("s_under").get<double>()});
  }
  const auto rows = dbql::table1_rows(conflict, conflict_free);
  if (rows.empty()) throw std::runtime_error("no matching conflict / conflict-free runs under " + in);
  const fs::path target = out.empty() ? fs::path(in) / "table1.csv" : fs::path(out);
  dbql::write_artifact(target.has_parent_path() ? target.parent_path() : fs::path("."), target.filename().string(),
                       dbql::table1_csv(rows));
  for (const auto& row : rows)
    std::printf("%-8s N=%3u ratio=%.3f\n", std::string(dbql::to_string(row.policy)).c_str(), row.n_agents, row.ratio);
  return 0;
}

int cmd_plots(const std::string& in) {
  const auto dirs = run_dirs(in);
  if (dirs.empty()) throw std::runtime_error("no run directories under " + in);
  std::map<std::uint32_t, std::vector<dbql::ChartSeries>> by_agents;
  for (const auto& d : dirs) {
    const auto c = dbql::load_config(d / "config.json");
    const std::string digest = dbql::config_digest(c);
    const std::string title = dbql::label(c.trial.mode) + ", N=" + std::to_string(c.trial.n_agents);
    dbql::ChartSeries s{dbql::label(c.trial.mode), {}, {}};
    for (const auto& p : dbql::read_curve_csv(d / "loss.csv")) {
      s.x.push_back(p.x);
      s.y.push_back(p.mean);
    }
    dbql::write_artifact(d, "loss.svg",
                         dbql::line_chart_svg({"Average loss: " + title, "time step t", "L_t", "config " + digest},
                                              std::span<const dbql::ChartSeries>(&s, 1)));
    const auto counts = dbql::read_histogram_csv(d / "histogram.csv", c.trial.grid);
    std::vector<std::string> names;
    std::vector<double> values;
    for (dbql::PairIndex p = 0; p < counts.size(); ++p) {
      const auto st = c.trial.grid.state_at(dbql::pair_state(p));
      names.push_back("(" + std::to_string(st.row) + "," + std::to_string(st.col) + ") " +
                      std::string(dbql::to_string(dbql::pair_action(p))));
      values.push_back(counts[p]);
    }
    dbql::write_artifact(d, "histogram.svg",
                         dbql::bar_chart_svg({"Agents per state-action pair at the final step: " + title,
                                              "state-action pair", "agents", "config " + digest},
                                             names, values));
    by_agents[c.trial.n_agents].push_back(std::move(s));
  }
  for (const auto& [n, series] : by_agents) {
    if (series.size() < 2) continue;
    char name[32];
    std::snprintf(name, sizeof name, "loss_n%03u.svg", static_cast<unsigned>(n));
    dbql::write_artifact(in, name,
                         dbql::line_chart_svg({"Average loss, " + std::to_string(n) + " agents", "time step t", "L_t", ""},
                                              series));
  }
  std::printf("charts regenerated for %zu run(s)\n", dirs.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent discontinuous bandit Q-learning on a stochastic grid world"};
  app.require_subcommand(1);

  double gamma = 0.9, tol = 1e-10;
  std::string config_path, out_path, in_dir, agents = "10..100:10", modes = "all";
  Overrides run_ov, sweep_ov;

  auto* plan = app.add_subcommand("plan", "dump the optimal action values as CSV");
  plan->add_option("--gamma", gamma, "discount factor");
  plan->add_option("--tol", tol, "Bellman residual tolerance");
  plan->add_option("--config", config_path, "take grid and gamma from a config file");
  plan->add_option("--out", out_path, "CSV file (default: stdout)");

  auto* run = app.add_subcommand("run", "run one batch of trials");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run_ov.add_to(run);

  auto* sweep = app.add_subcommand("sweep", "run every agent count x mode combination");
  sweep->add_option("--agents", agents, "lo..hi:step or comma list");
  sweep->add_option("--modes", modes, "all, or a comma list like bandit/free,uniform/allowed");
  sweep->add_option("--config", config_path, "base config (n_agents and mode are overridden)");
  sweep_ov.add_to(sweep);

  auto* table1 = app.add_subcommand("table1", "S_under ratios from a sweep directory");
  table1->add_option("--in", in_dir, "sweep output directory")->required();
  table1->add_option("--out", out_path, "CSV file (default: <in>/table1.csv)");

  auto* plots = app.add_subcommand("plots", "regenerate SVG charts from run CSVs");
  plots->add_option("--in", in_dir, "run or sweep output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*plan) return cmd_plan(gamma, tol, config_path, out_path);
    if (*run) return cmd_run(config_path, run_ov);
    if (*sweep) return cmd_sweep(config_path, agents, modes, sweep_ov);
    if (*table1) return cmd_table1(in_dir, out_path);
    if (*plots) return cmd_plots(in_dir);
  } catch (const dbql::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
