#include "dbql/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dbql/artifacts.hpp"
#include "dbql/errors.hpp"

#ifndef DBQL_VERSION
#define DBQL_VERSION "0.0.0"
#endif

namespace dbql {

using nlohmann::json;

namespace {

constexpr std::string_view kSUnderConvention = "ratio of S_under computed on trial-averaged loss curves";

// Reads fields from one JSON object, remembering which keys were
// consumed so that leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected a JSON object");
  }

  std::string key(std::string_view name) const {
    return path_.empty() ? std::string(name) : path_ + "." + std::string(name);
  }

  const json* find(std::string_view name) {
    seen_.insert(std::string(name));
    auto it = j_.find(std::string(name));
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(std::string_view name) {
    const json* v = find(name);
    if (!v) throw ConfigError(key(name), "missing required key");
    return *v;
  }

  template <typename T>
  void get(std::string_view name, T& out) {
    if (const json* v = find(name)) out = convert<T>(*v, key(name));
  }

  template <typename T>
  static T convert(const json& v, const std::string& key) {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(key, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
      if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
      const auto x = v.get<std::int64_t>();
      if (std::is_unsigned_v<T> && x < 0) throw ConfigError(key, "expected a non-negative integer");
      return static_cast<T>(x);
    } else {
      if (!v.is_string()) throw ConfigError(key, "expected a string");
      return T(v.get<std::string>());
    }
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

State parse_state(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    throw ConfigError(key, "expected [row, col]");
  return {v[0].get<int>(), v[1].get<int>()};
}

SelectionPolicy parse_policy(std::string_view s, const std::string& key) {
  if (s == "bandit") return SelectionPolicy::Bandit;
  if (s == "uniform" || s == "uniform_random" || s == "uniform random") return SelectionPolicy::UniformRandom;
  throw ConfigError(key, "expected \"bandit\" or \"uniform\"");
}

ConflictMode parse_conflict(std::string_view s, const std::string& key) {
  if (s == "free" || s == "conflict-free") return ConflictMode::Free;
  if (s == "allowed" || s == "conflict") return ConflictMode::Allowed;
  throw ConfigError(key, "expected \"free\" or \"allowed\"");
}

GridSpec parse_grid(const json& j) {
  GridSpec g;
  ObjectReader r(j, "grid");
  r.get("height", g.height);
  r.get("width", g.width);
  r.get("wall_penalty", g.wall_penalty);
  r.get("step_reward", g.step_reward);
  if (const json* sp = r.find("specials")) {
    if (!sp->is_array()) throw ConfigError("grid.specials", "expected an array");
    g.specials.clear();
    for (std::size_t i = 0; i < sp->size(); ++i) {
      const std::string base = "grid.specials[" + std::to_string(i) + "]";
      ObjectReader c((*sp)[i], base);
      SpecialCell cell;
      cell.source = parse_state(c.require("source"), c.key("source"));
      cell.destination = parse_state(c.require("destination"), c.key("destination"));
      cell.reward = ObjectReader::convert<double>(c.require("reward"), c.key("reward"));
      c.get("success_prob", cell.success_prob);
      c.reject_unknown();
      g.specials.push_back(cell);
    }
  }
  r.reject_unknown();
  return g;
}

json grid_to_json(const GridSpec& g) {
  json specials = json::array();
  for (const auto& s : g.specials)
    specials.push_back({{"source", {s.source.row, s.source.col}},
                        {"destination", {s.destination.row, s.destination.col}},
                        {"reward", s.reward},
                        {"success_prob", s.success_prob}});
  return {{"height", g.height},
          {"width", g.width},
          {"wall_penalty", g.wall_penalty},
          {"step_reward", g.step_reward},
          {"specials", specials}};
}

json config_to_json(const ExperimentConfig& c) {
  const auto& t = c.trial;
  return {{"grid", grid_to_json(t.grid)},
          {"gamma", t.gamma},
          {"schedules",
           {{"alpha0", t.schedules.alpha0},
            {"alpha_final", t.schedules.alpha_final},
            {"beta0", t.schedules.beta0},
            {"beta_final", t.schedules.beta_final},
            {"horizon", t.schedules.horizon}}},
          {"n_agents", t.n_agents},
          {"mode", {{"policy", to_string(t.mode.policy)}, {"conflict", to_string(t.mode.conflict)}}},
          {"epsilon", c.epsilon},
          {"trials", c.trials},
          {"master_seed", c.master_seed},
          {"output_dir", c.output_dir.generic_string()}};
}

// Rethrows library contract errors as ConfigError under `key`.
template <typename F>
void check(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

json summary_json(const ExperimentConfig& c, const MetricsSeries& m) {
  return {{"label", label(c.trial.mode)},
          {"n_agents", c.trial.n_agents},
          {"trials", c.trials},
          {"steps", m.loss.size()},
          {"s_under", m.s_under},
          {"trial_s_under", m.trial_s_under},
          {"final_loss", m.loss.empty() ? 0.0 : m.loss.back()},
          {"valid_rate_mean", m.valid_rate_mean},
          {"valid_rate_trailing", m.valid_rate_trailing},
          {"valid_rate_trailing_stderr", m.valid_rate_trailing_stderr},
          {"trailing_window", trailing_window(m.loss.size())},
          {"s_under_convention", kSUnderConvention}};
}

}  // namespace

void ExperimentConfig::validate() const {
  check("grid", [&] { trial.grid.validate(); });
  if (!(trial.gamma >= 0.0 && trial.gamma < 1.0)) throw ConfigError("gamma", "must lie in [0, 1)");
  check("schedules", [&] { trial.schedules.validate(); });
  if (trial.schedules.horizon < 1) throw ConfigError("schedules.horizon", "must be at least 1");
  const std::size_t k = trial.grid.num_pairs();
  if (trial.n_agents < 1 || trial.n_agents > k)
    throw ConfigError("n_agents", "infeasible: must lie in [1, " + std::to_string(k) + "] for this grid, got " +
                                      std::to_string(trial.n_agents));
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon", "must lie in [0, 1]");
  if (trials < 1) throw ConfigError("trials", "must be at least 1");
}

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  ObjectReader r(j, "");
  if (const json* g = r.find("grid")) c.trial.grid = parse_grid(*g);
  r.get("gamma", c.trial.gamma);
  if (const json* s = r.find("schedules")) {
    ObjectReader sr(*s, "schedules");
    sr.get("alpha0", c.trial.schedules.alpha0);
    sr.get("alpha_final", c.trial.schedules.alpha_final);
    sr.get("beta0", c.trial.schedules.beta0);
    sr.get("beta_final", c.trial.schedules.beta_final);
    sr.get("horizon", c.trial.schedules.horizon);
    sr.reject_unknown();
  }
  c.trial.n_agents = ObjectReader::convert<std::uint32_t>(r.require("n_agents"), "n_agents");
  {
    ObjectReader mr(r.require("mode"), "mode");
    c.trial.mode.policy = parse_policy(ObjectReader::convert<std::string>(mr.require("policy"), "mode.policy"),
                                       "mode.policy");
    c.trial.mode.conflict = parse_conflict(
        ObjectReader::convert<std::string>(mr.require("conflict"), "mode.conflict"), "mode.conflict");
    mr.reject_unknown();
  }
  r.get("epsilon", c.epsilon);
  r.get("trials", c.trials);
  r.get("master_seed", c.master_seed);
  if (const json* o = r.find("output_dir")) c.output_dir = ObjectReader::convert<std::string>(*o, "output_dir");
  r.reject_unknown();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& config) { return config_to_json(config).dump(2) + "\n"; }

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << to_json(config);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string config_digest(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.output_dir.clear();
  return sha256_hex(to_json(c)).substr(0, 12);
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t index) {
  return derive_seed(master_seed, "trial", index);
}

std::size_t default_workers() {
  if (const char* env = std::getenv("DBQL_WORKERS")) {
    std::size_t n = 0;
    const auto* end = env + std::char_traits<char>::length(env);
    if (auto [p, ec] = std::from_chars(env, end, n); ec == std::errc() && p == end && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

MetricsSeries run_trials(const ExperimentConfig& config, const OptimalQ& reference, std::size_t workers) {
  config.validate();
  std::vector<TrialSeries> series(config.trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= series.size()) return;
      try {
        series[i] = to_series(run_trial(config.trial, reference.values, trial_seed(config.master_seed, i)),
                              config.trial.n_agents);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = series.size();
      }
    }
  };

  workers = std::clamp<std::size_t>(workers, 1, series.size());
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return aggregate_trials(series, config.trial.grid);
}

BatchResult run_batch(const ExperimentConfig& config, std::size_t workers) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  const OptimalQ reference = value_iteration(config.trial.grid, config.trial.gamma);

  BatchResult result;
  result.metrics = run_trials(config, reference, workers);

  auto& man = result.manifest;
  man.config_json = to_json(config);
  man.software_version = DBQL_VERSION;
  man.s_under_convention = kSUnderConvention;
  for (std::uint32_t i = 0; i < config.trials; ++i) man.trial_seeds.push_back(trial_seed(config.master_seed, i));

  const auto& dir = config.output_dir;
  man.files.push_back(write_artifact(dir, "config.json", man.config_json));
  for (auto& f : emit_plots(result.metrics, config.trial.grid, dir, label(config.trial.mode) + ", N=" +
                                                                        std::to_string(config.trial.n_agents),
                            config_digest(config)))
    man.files.push_back(std::move(f));
  man.files.push_back(write_artifact(dir, "summary.json", summary_json(config, result.metrics).dump(2) + "\n"));

  man.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json files = json::array();
  for (const auto& f : man.files) files.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  const json manifest = {{"config", json::parse(man.config_json)},
                         {"trial_seeds", man.trial_seeds},
                         {"software_version", man.software_version},
                         {"wall_seconds", man.wall_seconds},
                         {"s_under_convention", man.s_under_convention},
                         {"files", files}};
  write_artifact(dir, "manifest.json", manifest.dump(2) + "\n");
  return result;
}

std::vector<Table1Row> table1_rows(std::span<const ModeResult> conflict, std::span<const ModeResult> conflict_free) {
  std::vector<Table1Row> rows;
  for (const auto& c : conflict) {
    if (c.config.trial.mode.conflict != ConflictMode::Allowed)
      throw ContractViolation("table1: numerator run is not in conflict mode");
    const ModeResult* match = nullptr;
    for (const auto& f : conflict_free)
      if (f.config.trial.mode.policy == c.config.trial.mode.policy && f.config.trial.n_agents == c.config.trial.n_agents)
        match = &f;
    if (!match) continue;
    ExperimentConfig a = c.config, b = match->config;
    a.output_dir.clear();
    b.output_dir.clear();
    b.trial.mode.conflict = ConflictMode::Allowed;
    if (!(a == b)) throw ContractViolation("table1: paired configs differ in more than the conflict mode");
    if (!(match->s_under > 0.0)) throw ContractViolation("table1: conflict-free S_under must be positive");
    rows.push_back({c.config.trial.mode.policy, c.config.trial.n_agents, c.s_under / match->s_under});
  }
  std::sort(rows.begin(), rows.end(), [](const Table1Row& x, const Table1Row& y) {
    return x.policy != y.policy ? x.policy < y.policy : x.n_agents < y.n_agents;
  });
  return rows;
}

std::vector<std::uint32_t> parse_agent_range(std::string_view text) {
  const auto bad = [&] { return ConfigError("agents", "expected lo..hi:step or a comma list, got '" + std::string(text) + "'"); };
  const auto number = [&](std::string_view s) {
    std::uint32_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v == 0) throw bad();
    return v;
  };
  std::vector<std::uint32_t> out;
  if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    const auto colon = text.find(':', dots);
    const std::uint32_t lo = number(text.substr(0, dots));
    const std::uint32_t hi = number(text.substr(dots + 2, colon == std::string_view::npos ? text.npos : colon - dots - 2));
    const std::uint32_t step = colon == std::string_view::npos ? 1 : number(text.substr(colon + 1));
    if (hi < lo) throw bad();
    for (std::uint32_t n = lo; n <= hi; n += step) out.push_back(n);
    return out;
  }
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const auto comma = text.find(',', begin);
    out.push_back(number(text.substr(begin, comma == std::string_view::npos ? text.npos : comma - begin)));
    if (comma == std::string_view::npos) break;
    begin = comma + 1;
  }
  return out;
}

std::vector<Mode> parse_modes(std::string_view text) {
  if (text == "all") return {kAllModes.begin(), kAllModes.end()};
  std::vector<Mode> out;
  std::size_t begin = 0;
  for (;;) {
    const auto comma = text.find(',', begin);
    const auto item = text.substr(begin, comma == std::string_view::npos ? text.npos : comma - begin);
    const auto slash = item.find('/');
    if (slash == std::string_view::npos) throw ConfigError("modes", "expected policy/conflict, got '" + std::string(item) + "'");
    out.push_back({parse_policy(item.substr(0, slash), "modes"), parse_conflict(item.substr(slash + 1), "modes")});
    if (comma == std::string_view::npos) break;
    begin = comma + 1;
  }
  return out;
}

std::string run_name(std::uint32_t n_agents, const Mode& mode) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "n%03u", static_cast<unsigned>(n_agents));
  return std::string(buf) + "_" + std::string(to_string(mode.policy)) + "_" + std::string(to_string(mode.conflict));
}

SweepResult run_sweep(const ExperimentConfig& base, std::span<const std::uint32_t> agents,
                      std::span<const Mode> modes, std::size_t workers) {
  SweepResult sweep;
  std::vector<ModeResult> conflict, conflict_free;
  for (std::uint32_t n : agents) {
    for (const Mode& mode : modes) {
      ExperimentConfig c = base;
      c.trial.n_agents = n;
      c.trial.mode = mode;
      c.output_dir = base.output_dir / run_name(n, mode);
      auto batch = run_batch(c, workers);
      (mode.conflict == ConflictMode::Free ? conflict_free : conflict).push_back({c, batch.metrics.s_under});
      sweep.runs.emplace_back(std::move(c), std::move(batch.metrics));
    }
  }
  sweep.table1 = table1_rows(conflict, conflict_free);

  const auto& dir = base.output_dir;
  write_artifact(dir, "table1.csv", table1_csv(sweep.table1));

  // Valid-selection rate against agent count, one series per mode.
  std::string vr = "# " + std::string(kValidVsAgentsSchema) + "\npolicy,conflict,n_agents,mean_rate,trailing_rate,trailing_stderr\n";
  std::vector<ChartSeries> vr_series;
  for (const Mode& mode : modes) {
    ChartSeries s{label(mode), {}, {}};
    for (const auto& [c, m] : sweep.runs) {
      if (!(c.trial.mode == mode)) continue;
      vr += std::string(to_string(mode.policy)) + "," + std::string(to_string(mode.conflict)) + "," +
            std::to_string(c.trial.n_agents) + "," + format_double(m.valid_rate_mean) + "," +
            format_double(m.valid_rate_trailing) + "," + format_double(m.valid_rate_trailing_stderr) + "\n";
      s.x.push_back(c.trial.n_agents);
      s.y.push_back(m.valid_rate_trailing);
    }
    vr_series.push_back(std::move(s));
  }
  write_artifact(dir, "valid_rate_vs_n.csv", vr);
  const std::string digest = config_digest(base);
  write_artifact(dir, "valid_rate_vs_n.svg",
                 line_chart_svg({"Valid selection rate (last 5% of steps)", "number of agents", "R_valid", "config " + digest},
                                vr_series));

  // One loss chart per agent count with every mode overlaid.
  for (std::uint32_t n : agents) {
    std::vector<ChartSeries> series;
    for (const auto& [c, m] : sweep.runs) {
      if (c.trial.n_agents != n) continue;
      ChartSeries s{label(c.trial.mode), {}, m.loss};
      s.x.resize(m.loss.size());
      for (std::size_t t = 0; t < s.x.size(); ++t) s.x[t] = static_cast<double>(t + 1);
      series.push_back(std::move(s));
    }
    char name[32];
    std::snprintf(name, sizeof name, "loss_n%03u.svg", static_cast<unsigned>(n));
    write_artifact(dir, name,
                   line_chart_svg({"Average loss, " + std::to_string(n) + " agents", "time step t", "L_t", "config " + digest},
                                  series));
  }
  return sweep;
}

}  // namespace dbql
