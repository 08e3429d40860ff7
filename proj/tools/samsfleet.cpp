// samsfleet — operator CLI tying ingestion, simulation, training, and
// evaluation into reproducible experiment pipelines. Every scenario run
// freezes its effective configuration into <out>/manifest.json; rerunning
// with that manifest reproduces the artifacts byte for byte.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sams/a2c.hpp"
#include "sams/assignment.hpp"
#include "sams/common.hpp"
#include "sams/demand.hpp"
#include "sams/diffnet.hpp"
#include "sams/domain.hpp"
#include "sams/metrics.hpp"
#include "sams/numerics.hpp"
#include "sams/scenario.hpp"
#include "sams/sim.hpp"
#include "sams/trace_io.hpp"

namespace {

constexpr int kManifestVersion = 1;

void make_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw sams::DataError("cannot create directory " + path + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw sams::DataError("cannot open " + path + " for writing");
  os << text;
  if (!os) throw sams::DataError("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw sams::DataError("cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

nlohmann::ordered_json manifest_head(const std::string& command) {
  nlohmann::ordered_json m;
  m["manifest_version"] = kManifestVersion;
  m["tool_version"] = std::string(sams::kVersion);
  m["command"] = command;
  return m;
}

// A --config argument may be a bare scenario document or a frozen manifest
// from a previous run; manifests carry the normalized scenario plus the
// command options that shaped the results.
struct ScenarioDoc {
  sams::ScenarioConfig cfg;
  nlohmann::json options;  // empty unless loaded from a manifest
  bool is_manifest = false;
};

ScenarioDoc load_scenario_doc(const std::string& path) {
  const nlohmann::json j = sams::read_json_file(path);
  ScenarioDoc doc;
  if (j.is_object() && j.contains("scenario")) {
    doc.cfg = sams::parse_scenario(j.at("scenario"));
    doc.is_manifest = true;
    if (j.contains("options")) doc.options = j.at("options");
  } else {
    doc.cfg = sams::parse_scenario(j);
  }
  return doc;
}

std::string option_or(const nlohmann::json& options, const char* key, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (options.is_object() && options.contains(key) && options.at(key).is_string())
    return options.at(key).get<std::string>();
  return "";
}

struct LoadedPolicy {
  std::unique_ptr<sams::ActorNet> actor;
  std::unique_ptr<sams::CriticNet> critic;
  sams::RewardWeights weights;
  nlohmann::json meta;
};

LoadedPolicy load_policy(const sams::ScenarioConfig& cfg, const std::string& path) {
  LoadedPolicy p;
  const sams::NetConfig nc = sams::net_config(cfg);
  p.actor = std::make_unique<sams::ActorNet>(nc, 0);
  p.critic = std::make_unique<sams::CriticNet>(nc, 0);
  const std::string meta_text = sams::load_checkpoint(
      path, {{"actor", &p.actor->params}, {"critic", &p.critic->params}});
  try {
    p.meta = nlohmann::json::parse(meta_text);
  } catch (const nlohmann::json::exception&) {
    throw sams::DataError("checkpoint " + path + ": unreadable metadata");
  }
  if (p.meta.contains("omega")) p.weights.omega = p.meta.at("omega").get<double>();
  if (p.meta.contains("sigma")) p.weights.sigma = p.meta.at("sigma").get<double>();
  return p;
}

std::vector<std::optional<double>> zone_means(const sams::ServiceMetrics& m) {
  std::vector<std::optional<double>> zones;
  zones.reserve(m.per_zone_wait.size());
  for (const auto& w : m.per_zone_wait) zones.push_back(sams::detail::zone_mean(w));
  return zones;
}

// ---- ingest ----

struct IngestOpts {
  std::string in, region, out, origin_ts;
  double origin_lon = 0.0, origin_lat = 0.0;
  bool strict = false;
};

nlohmann::json region_block(const nlohmann::json& j) {
  const nlohmann::json& block = j.is_object() && j.contains("region") ? j.at("region") : j;
  sams::detail::require_object(block, "region");
  sams::detail::reject_unknown_keys(
      block, {"width_m", "height_m", "nx", "ny", "demand_centroids"}, "region");
  return block;
}

sams::ServiceRegion region_from_block(const nlohmann::json& block) {
  return sams::make_grid_region(sams::detail::get_field<double>(block, "width_m", "region"),
                                sams::detail::get_field<double>(block, "height_m", "region"),
                                sams::detail::get_field<int>(block, "nx", "region"),
                                sams::detail::get_field<int>(block, "ny", "region"));
}

void run_ingest(const IngestOpts& o) {
  const nlohmann::json block = region_block(sams::read_json_file(o.region));
  const sams::ServiceRegion region = region_from_block(block);

  std::ifstream is(o.in, std::ios::binary);
  if (!is) throw sams::DataError("cannot open " + o.in);
  sams::IngestOptions opt;
  opt.horizon_origin = o.origin_ts;
  opt.geo_origin_lon = o.origin_lon;
  opt.geo_origin_lat = o.origin_lat;
  opt.strict = o.strict;
  const sams::IngestResult result = sams::ingest(is, region, opt);

  make_dir(o.out);
  sams::write_trip_store(result.records, o.out + "/store.csv");
  write_text(o.out + "/ingest_report.json", result.report.to_json() + "\n");

  nlohmann::ordered_json m = manifest_head("ingest");
  m["options"] = {{"in", o.in},
                  {"region", nlohmann::ordered_json(block)},
                  {"origin_ts", o.origin_ts},
                  {"origin_lon", o.origin_lon},
                  {"origin_lat", o.origin_lat},
                  {"strict", o.strict}};
  write_text(o.out + "/manifest.json", m.dump(2) + "\n");

  std::cout << "ingest: kept " << result.report.kept << " of " << result.report.total_rows
            << " rows -> " << o.out << "/store.csv\n";
}

// ---- simulate ----

struct SimulateOpts {
  std::string config, out, checkpoint;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void run_simulate(const SimulateOpts& o) {
  const ScenarioDoc doc = load_scenario_doc(o.config);
  sams::ScenarioConfig cfg = doc.cfg;
  if (o.seed_given) {
    cfg.seed = o.seed;
    cfg.train.seed = o.seed;
  }
  const std::string checkpoint = option_or(doc.options, "checkpoint", o.checkpoint);
  if (cfg.mode == sams::AgentMode::None && !checkpoint.empty())
    throw sams::ConfigError("simulate: agent.mode is \"none\" but a checkpoint was given");
  if (cfg.mode != sams::AgentMode::None && checkpoint.empty())
    throw sams::ConfigError("simulate: agent.mode needs --checkpoint (or mode \"none\")");

  const sams::EnvSpec env = sams::build_env(cfg);
  sams::RewardWeights weights{};
  sams::RepositionPolicyFn policy;  // empty: no repositioning
  LoadedPolicy loaded;
  std::mt19937_64 rng(sams::mix_seed(cfg.seed, 3));
  if (!checkpoint.empty()) {
    loaded = load_policy(cfg, sams::resolve_data_path(checkpoint));
    weights = loaded.weights;
    policy = sams::make_policy(*loaded.actor, sams::ActMode::Mean, rng);
  }

  const sams::EpisodeTrace trace = sams::run_env_episode(
      env, weights, policy, sams::mix_seed(cfg.seed, 1), sams::mix_seed(cfg.seed, 2));
  const sams::ServiceMetrics metrics = sams::compute_metrics(trace, env.region);

  make_dir(o.out);
  nlohmann::ordered_json m = manifest_head("simulate");
  m["scenario"] = sams::scenario_to_json(cfg);
  m["options"] = {{"checkpoint", checkpoint}};
  write_text(o.out + "/manifest.json", m.dump(2) + "\n");
  sams::write_trace(trace, env.region, o.out + "/trace.json");
  sams::write_events(trace.events, o.out + "/events.jsonl");
  sams::write_report(metrics, sams::ReportFormat::Json, o.out + "/report.json");
  sams::write_report(metrics, sams::ReportFormat::Csv, o.out + "/report.csv");
  sams::write_zone_heatmap(zone_means(metrics), env.region, o.out + "/heatmap.svg");

  std::cout << "simulate: served " << metrics.served_count << "/"
            << metrics.served_count + metrics.unserved_count;
  if (metrics.mean_wait) std::cout << ", mean wait " << fmt(*metrics.mean_wait) << " s";
  std::cout << " -> " << o.out << "\n";
}

// ---- train ----

struct TrainOpts {
  std::string config, out, resume;
  std::uint64_t seed = 0;
  long episodes = 0;
  bool seed_given = false, episodes_given = false;
};

void run_train(const TrainOpts& o) {
  const ScenarioDoc doc = load_scenario_doc(o.config);
  sams::ScenarioConfig cfg = doc.cfg;
  if (o.seed_given) {
    cfg.seed = o.seed;
    cfg.train.seed = o.seed;
  }
  if (o.episodes_given) cfg.train.episodes = o.episodes;
  if (cfg.mode == sams::AgentMode::None)
    throw sams::ConfigError("train: agent.mode must be \"isr\" or \"egr\"");
  const std::string resume = option_or(doc.options, "resume", o.resume);

  const sams::EnvSpec env = sams::build_env(cfg);
  sams::TrainConfig tc = cfg.train;
  make_dir(o.out);
  tc.checkpoint_path = o.out + "/checkpoint.bin";
  tc.curve_path = o.out + "/curve.csv";

  nlohmann::ordered_json m = manifest_head("train");
  m["scenario"] = sams::scenario_to_json(cfg);
  m["options"] = {{"resume", resume}};
  write_text(o.out + "/manifest.json", m.dump(2) + "\n");

  sams::ActorNet actor(sams::net_config(cfg), sams::mix_seed(cfg.seed, 11));
  sams::CriticNet critic(sams::net_config(cfg), sams::mix_seed(cfg.seed, 12));
  const sams::TrainResult result =
      sams::train(env, tc, actor, critic, resume.empty() ? "" : sams::resolve_data_path(resume));

  m["calibration"] = {{"omega", result.weights.omega}, {"sigma", result.weights.sigma}};
  m["episodes_done"] = result.episodes_done;
  write_text(o.out + "/manifest.json", m.dump(2) + "\n");

  std::cout << "train: " << result.episodes_done << " episodes";
  if (!result.curve.empty() && result.curve.back().eval_mean_wait)
    std::cout << ", eval mean wait " << fmt(*result.curve.back().eval_mean_wait) << " s";
  std::cout << " -> " << tc.checkpoint_path << "\n";
}

// ---- evaluate ----

struct EvaluateOpts {
  std::vector<std::string> configs, policies;
  std::string out;
  int seeds = 20;
};

struct PolicyCell {
  sams::EvalOutcome outcome;
  std::vector<std::optional<double>> seed_waits;
};

PolicyCell evaluate_cell(const sams::ScenarioConfig& cfg, const sams::EnvSpec& env,
                         const std::string& policy_name,
                         const std::vector<std::uint64_t>& bases) {
  PolicyCell cell;
  sams::RewardWeights weights{};
  sams::RepositionPolicyFn policy;
  LoadedPolicy loaded;
  std::mt19937_64 rng(sams::mix_seed(cfg.seed, 4));
  if (policy_name != "none") {
    if (cfg.mode == sams::AgentMode::None)
      throw sams::ConfigError("evaluate: scenario \"" + cfg.name +
                              "\" has agent.mode none; cannot apply checkpoint " + policy_name);
    loaded = load_policy(cfg, sams::resolve_data_path(policy_name));
    weights = loaded.weights;
    policy = sams::make_policy(*loaded.actor, sams::ActMode::Mean, rng);
  }
  cell.outcome = sams::evaluate_policy(env, weights, policy, bases);
  for (const auto& m : cell.outcome.per_seed) cell.seed_waits.push_back(m.mean_wait);
  return cell;
}

void run_evaluate(EvaluateOpts o) {
  // A single --config may be a frozen evaluate manifest carrying the whole grid.
  std::vector<ScenarioDoc> docs;
  if (o.configs.size() == 1) {
    const nlohmann::json j = sams::read_json_file(o.configs.front());
    if (j.is_object() && j.contains("scenarios")) {
      for (const auto& s : j.at("scenarios")) {
        ScenarioDoc d;
        d.cfg = sams::parse_scenario(s);
        docs.push_back(std::move(d));
      }
      if (j.contains("options")) {
        const auto& opt = j.at("options");
        if (o.policies.empty() && opt.contains("policies"))
          o.policies = opt.at("policies").get<std::vector<std::string>>();
        if (opt.contains("seeds")) o.seeds = opt.at("seeds").get<int>();
      }
    }
  }
  if (docs.empty())
    for (const auto& path : o.configs) docs.push_back(load_scenario_doc(path));
  if (docs.empty()) throw sams::ConfigError("evaluate: need at least one --config");
  if (o.policies.empty())
    throw sams::ConfigError("evaluate: need at least one --policy (\"none\" or a checkpoint)");
  if (o.seeds < 1) throw sams::ConfigError("evaluate: --seeds must be >= 1");

  nlohmann::ordered_json grid = nlohmann::ordered_json::array();
  std::ostringstream csv;
  csv << "scenario,policy,mean_wait,std_wait,pct_empty,pct_empty_pickup,pct_empty_reposition,"
         "mean_served,mean_unserved,mean_reward,diff_mean_wait_vs_ref,t,p_two_sided,"
         "p_one_sided_less,paired_n\n";

  for (const ScenarioDoc& doc : docs) {
    const sams::ScenarioConfig& cfg = doc.cfg;
    const sams::EnvSpec env = sams::build_env(cfg);
    const std::vector<std::uint64_t> bases = sams::heldout_eval_seeds(cfg.seed, o.seeds);

    std::vector<PolicyCell> cells;
    cells.reserve(o.policies.size());
    for (const std::string& name : o.policies)
      cells.push_back(evaluate_cell(cfg, env, name, bases));

    nlohmann::ordered_json srow;
    srow["name"] = cfg.name;
    nlohmann::ordered_json prows = nlohmann::ordered_json::array();
    for (std::size_t pi = 0; pi < cells.size(); ++pi) {
      const PolicyCell& cell = cells[pi];
      const auto& seeds = cell.outcome.per_seed;
      double std_sum = 0.0, pe = 0.0, pp = 0.0, pr = 0.0, served = 0.0, unserved = 0.0;
      long std_n = 0;
      for (const auto& m : seeds) {
        if (m.std_wait) {
          std_sum += *m.std_wait;
          ++std_n;
        }
        pe += m.pct_empty_distance;
        pp += m.pct_empty_pickup;
        pr += m.pct_empty_reposition;
        served += static_cast<double>(m.served_count);
        unserved += static_cast<double>(m.unserved_count);
      }
      const double ns = static_cast<double>(seeds.size());
      nlohmann::ordered_json row;
      row["policy"] = o.policies[pi];
      row["mean_wait"] = cell.outcome.mean_wait ? nlohmann::ordered_json(*cell.outcome.mean_wait)
                                                : nlohmann::ordered_json(nullptr);
      row["std_wait"] = std_n > 0 ? nlohmann::ordered_json(std_sum / std_n)
                                  : nlohmann::ordered_json(nullptr);
      row["pct_empty"] = pe / ns;
      row["pct_empty_pickup"] = pp / ns;
      row["pct_empty_reposition"] = pr / ns;
      row["mean_served"] = served / ns;
      row["mean_unserved"] = unserved / ns;
      row["mean_reward"] = cell.outcome.mean_reward;
      nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
      for (const auto& w : cell.seed_waits)
        per_seed.push_back(w ? nlohmann::ordered_json(*w) : nlohmann::ordered_json(nullptr));
      row["per_seed_mean_wait"] = per_seed;

      // paired stats against the first policy, matched by evaluation seed
      std::string d_mean = "NA", d_t = "NA", d_p2 = "NA", d_p1 = "NA", d_n = "NA";
      row["vs_ref"] = nullptr;
      if (pi > 0) {
        std::vector<double> xs, ys;
        for (std::size_t k = 0; k < cell.seed_waits.size(); ++k)
          if (cell.seed_waits[k] && cells[0].seed_waits[k]) {
            xs.push_back(*cell.seed_waits[k]);
            ys.push_back(*cells[0].seed_waits[k]);
          }
        if (xs.size() >= 2) {
          const sams::PairedTTest tt = sams::paired_ttest(xs, ys);
          row["vs_ref"] = nlohmann::ordered_json{{"ref", o.policies[0]},
                                                 {"mean_diff", tt.mean_diff},
                                                 {"t", tt.t},
                                                 {"p_two_sided", tt.p_two_sided},
                                                 {"p_one_sided_less", tt.p_one_sided_less},
                                                 {"n", xs.size()}};
          d_mean = fmt(tt.mean_diff);
          d_t = fmt(tt.t);
          d_p2 = fmt(tt.p_two_sided);
          d_p1 = fmt(tt.p_one_sided_less);
          d_n = std::to_string(xs.size());
        }
      }
      prows.push_back(row);

      csv << cfg.name << "," << o.policies[pi] << ","
          << (cell.outcome.mean_wait ? fmt(*cell.outcome.mean_wait) : "NA") << ","
          << (std_n > 0 ? fmt(std_sum / std_n) : "NA") << "," << fmt(pe / ns) << ","
          << fmt(pp / ns) << "," << fmt(pr / ns) << "," << fmt(served / ns) << ","
          << fmt(unserved / ns) << "," << fmt(cell.outcome.mean_reward) << "," << d_mean << ","
          << d_t << "," << d_p2 << "," << d_p1 << "," << d_n << "\n";
    }
    srow["policies"] = prows;
    grid.push_back(srow);
  }

  make_dir(o.out);
  nlohmann::ordered_json m = manifest_head("evaluate");
  nlohmann::ordered_json scenarios = nlohmann::ordered_json::array();
  for (const ScenarioDoc& doc : docs) scenarios.push_back(sams::scenario_to_json(doc.cfg));
  m["scenarios"] = scenarios;
  m["options"] = {{"policies", o.policies}, {"seeds", o.seeds}};
  write_text(o.out + "/manifest.json", m.dump(2) + "\n");

  nlohmann::ordered_json cj;
  cj["format_version"] = 1;
  cj["seeds"] = o.seeds;
  cj["scenarios"] = grid;
  write_text(o.out + "/comparison.json", cj.dump(2) + "\n");
  write_text(o.out + "/comparison.csv", csv.str());

  std::cout << "evaluate: " << docs.size() << " scenario(s) x " << o.policies.size()
            << " policy(ies) over " << o.seeds << " seeds -> " << o.out << "\n";
}

// ---- report ----

struct ReportOpts {
  std::string trace, out;
};

void run_report(const ReportOpts& o) {
  const sams::LoadedTrace lt = sams::load_trace(sams::resolve_data_path(o.trace));
  const sams::ServiceMetrics metrics = sams::compute_metrics(lt.trace, lt.region);

  make_dir(o.out);
  nlohmann::ordered_json m = manifest_head("report");
  m["options"] = {{"trace", o.trace}};
  write_text(o.out + "/manifest.json", m.dump(2) + "\n");
  sams::write_report(metrics, sams::ReportFormat::Json, o.out + "/report.json");
  sams::write_report(metrics, sams::ReportFormat::Csv, o.out + "/report.csv");
  sams::write_zone_heatmap(zone_means(metrics), lt.region, o.out + "/heatmap.svg");

  std::cout << "report: served " << metrics.served_count << " -> " << o.out << "\n";
}

// ---- assign ----

struct AssignOpts {
  std::string instance, strategy = "s2", out;
};

void run_assign(const AssignOpts& o) {
  sams::AssignmentInstance inst;
  try {
    inst = sams::instance_from_json(read_text(o.instance));
  } catch (const nlohmann::json::exception& e) {
    throw sams::DataError("assign: bad instance file " + o.instance + ": " + e.what());
  }
  const sams::AssignmentResult result =
      o.strategy == "s1" ? sams::assign_s1(inst) : sams::assign_s2(inst);
  const std::string text = sams::result_to_json(result) + "\n";
  if (o.out.empty())
    std::cout << text;
  else
    write_text(o.out, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shared autonomous mobility fleet simulation and RL repositioning"};
  app.set_version_flag("--version", std::string("samsfleet ") + std::string(sams::kVersion));
  app.require_subcommand(1);

  IngestOpts ingest_opts;
  auto* c_ingest = app.add_subcommand("ingest", "normalize a trip CSV into a trip store");
  c_ingest->add_option("--in", ingest_opts.in, "raw trip CSV")->required();
  c_ingest->add_option("--region", ingest_opts.region, "region JSON (bare block or config)")
      ->required();
  c_ingest->add_option("--out", ingest_opts.out, "output directory")->required();
  c_ingest->add_option("--origin-ts", ingest_opts.origin_ts, "timestamp mapped to t=0")
      ->required();
  c_ingest->add_option("--origin-lon", ingest_opts.origin_lon, "longitude mapped to x=0");
  c_ingest->add_option("--origin-lat", ingest_opts.origin_lat, "latitude mapped to y=0");
  c_ingest->add_flag("--strict", ingest_opts.strict, "abort on the first malformed row");
  c_ingest->callback([&] { run_ingest(ingest_opts); });

  SimulateOpts sim_opts;
  auto* c_sim = app.add_subcommand("simulate", "run one episode and write trace + report");
  c_sim->add_option("--config", sim_opts.config, "scenario config or frozen manifest")
      ->required();
  c_sim->add_option("--out", sim_opts.out, "output directory")->required();
  c_sim->add_option("--checkpoint", sim_opts.checkpoint, "trained policy checkpoint");
  auto* sim_seed = c_sim->add_option("--seed", sim_opts.seed, "override scenario seed");
  c_sim->callback([&] {
    sim_opts.seed_given = sim_seed->count() > 0;
    run_simulate(sim_opts);
  });

  TrainOpts train_opts;
  auto* c_train = app.add_subcommand("train", "train the repositioning agent");
  c_train->add_option("--config", train_opts.config, "scenario config or frozen manifest")
      ->required();
  c_train->add_option("--out", train_opts.out, "output directory")->required();
  c_train->add_option("--resume", train_opts.resume, "checkpoint to resume from");
  auto* train_seed = c_train->add_option("--seed", train_opts.seed, "override scenario seed");
  auto* train_eps = c_train->add_option("--episodes", train_opts.episodes,
                                        "override train.episodes");
  c_train->callback([&] {
    train_opts.seed_given = train_seed->count() > 0;
    train_opts.episodes_given = train_eps->count() > 0;
    run_train(train_opts);
  });

  EvaluateOpts eval_opts;
  auto* c_eval = app.add_subcommand("evaluate", "compare policies across scenarios");
  c_eval->add_option("--config", eval_opts.configs,
                     "scenario config(s), or one frozen evaluate manifest")
      ->required();
  c_eval->add_option("--policy", eval_opts.policies, "\"none\" or a checkpoint path");
  c_eval->add_option("--seeds", eval_opts.seeds, "held-out evaluation seeds per scenario");
  c_eval->add_option("--out", eval_opts.out, "output directory")->required();
  c_eval->callback([&] { run_evaluate(eval_opts); });

  ReportOpts report_opts;
  auto* c_report = app.add_subcommand("report", "recompute metrics from a stored trace");
  c_report->add_option("--trace", report_opts.trace, "trace JSON from simulate")->required();
  c_report->add_option("--out", report_opts.out, "output directory")->required();
  c_report->callback([&] { run_report(report_opts); });

  AssignOpts assign_opts;
  auto* c_assign = app.add_subcommand("assign", "replay one assignment instance");
  c_assign->add_option("--instance", assign_opts.instance, "instance JSON")->required();
  c_assign->add_option("--strategy", assign_opts.strategy, "s1 or s2")
      ->check(CLI::IsMember({"s1", "s2"}));
  c_assign->add_option("--out", assign_opts.out, "write result here instead of stdout");
  c_assign->callback([&] { run_assign(assign_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const sams::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const sams::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const sams::RuntimeFault& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const sams::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
