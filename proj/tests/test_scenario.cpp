#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "sams/scenario.hpp"

using namespace sams;

namespace {

nlohmann::json minimal_doc() {
  return nlohmann::json::parse(R"({
    "region": {"width_m": 2000.0, "height_m": 1000.0, "nx": 2, "ny": 1},
    "window": {"start_s": 0.0, "end_s": 3600.0},
    "demand": {"source": "synthetic",
               "rates_per_hour": [30.0, 20.0],
               "od_matrix": [[0.0, 1.0], [0.5, 0.5]]}
  })");
}

std::string preset_path(const std::string& rel) {
  return std::string(SAMS_SOURCE_DIR) + "/" + rel;
}

}  // namespace

TEST_CASE("minimal document fills every default") {
  const ScenarioConfig cfg = parse_scenario(minimal_doc());
  CHECK(cfg.name == "scenario");
  CHECK(cfg.seed == 1);
  CHECK(cfg.region.nx == 2);
  CHECK(cfg.region.demand_centroids == false);
  CHECK(cfg.window_end == 3600.0);
  CHECK(cfg.sim.fleet_size == 600);
  CHECK(cfg.sim.vehicle_speed == 5.0);
  CHECK(cfg.sim.assignment_interval == 30.0);
  CHECK(cfg.sim.repositioning_interval == 300.0);
  CHECK(cfg.sim.initial_placement == PlacementMode::UniformRandom);
  CHECK(cfg.assignment == AssignStrategy::S2);
  CHECK(cfg.mode == AgentMode::None);
  CHECK(cfg.q == 4);
  CHECK(cfg.count_assigned_waiting == false);
  CHECK(cfg.train.gamma == 0.99);
  CHECK(cfg.train.seed == cfg.seed);  // training inherits the scenario seed
  CHECK(cfg.demand.source == DemandSpec::Source::Synthetic);
}

TEST_CASE("required blocks and fields") {
  auto drop = [](const char* key) {
    nlohmann::json j = minimal_doc();
    j.erase(key);
    return j;
  };
  CHECK_THROWS_WITH_AS(parse_scenario(drop("region")), doctest::Contains("region"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario(drop("window")), doctest::Contains("window"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario(drop("demand")), doctest::Contains("demand"), ConfigError);

  nlohmann::json j = minimal_doc();
  j["region"].erase("nx");
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("nx"), ConfigError);

  j = minimal_doc();
  j["demand"].erase("source");
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("source"), ConfigError);

  j = minimal_doc();
  j["region"]["nx"] = "two";
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("bad type"), ConfigError);

  CHECK_THROWS_AS(parse_scenario(nlohmann::json::array()), ConfigError);
}

TEST_CASE("unknown keys are rejected with their location") {
  auto with = [](const char* block, const char* key) {
    nlohmann::json j = minimal_doc();
    if (std::string(block) == "top level") j[key] = 1;
    else j[block][key] = 1;
    return j;
  };
  CHECK_THROWS_WITH_AS(parse_scenario(with("top level", "episodes")),
                       doctest::Contains("top level"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario(with("region", "zx")), doctest::Contains("\"zx\""),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario(with("window", "stop_s")), doctest::Contains("window"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario(with("demand", "store")), doctest::Contains("demand"),
                       ConfigError);  // store belongs to the csv source only

  nlohmann::json j = minimal_doc();
  j["sim"] = {{"speed", 5.0}};
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("sim"), ConfigError);
  j = minimal_doc();
  j["agent"] = {{"mode", "isr"}, {"lookahead", 3}};
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("lookahead"), ConfigError);
  j = minimal_doc();
  j["train"] = {{"learning_rate", 0.5}};
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("train"), ConfigError);
}

TEST_CASE("enumerations") {
  nlohmann::json j = minimal_doc();
  j["assignment"] = "s3";
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("s1|s2"), ConfigError);
  j = minimal_doc();
  j["agent"] = {{"mode", "both"}};
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("none|isr|egr"), ConfigError);
  j = minimal_doc();
  j["demand"]["source"] = "database";
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  j = minimal_doc();
  j["train"] = {{"eval_mode", "greedy"}};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  j = minimal_doc();
  j["assignment"] = "s1";
  CHECK(parse_scenario(j).assignment == AssignStrategy::S1);
}

TEST_CASE("semantic validation") {
  nlohmann::json j = minimal_doc();
  j["window"]["end_s"] = 0.0;
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);

  j = minimal_doc();
  j["region"]["nx"] = 0;
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  j = minimal_doc();
  j["region"]["width_m"] = -5.0;
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);

  j = minimal_doc();
  j["agent"] = {{"q", 0}};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);

  // sim block flows through the simulator's own validation
  j = minimal_doc();
  j["sim"] = {{"step_s", 40.0}};  // default 45 s dwell is no longer a multiple
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);

  // per-zone demand sizes
  j = minimal_doc();
  j["demand"]["rates_per_hour"] = {30.0};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  j = minimal_doc();
  j["demand"]["od_matrix"] = {{1.0}};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);

  // csv-specific checks
  j = minimal_doc();
  j["demand"] = {{"source", "csv"}, {"store", ""}};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  j = minimal_doc();
  j["demand"] = {{"source", "csv"}, {"store", "x.csv"}, {"fraction", 0.0}};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  j = minimal_doc();
  j["demand"] = {{"source", "csv"}, {"store", "x.csv"}, {"fraction", 1.5}};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);

  // train knobs
  j = minimal_doc();
  j["train"] = {{"tau", 0.0}};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  j = minimal_doc();
  j["train"] = {{"gamma", 1.5}};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
}

TEST_CASE("guided forecast horizon must tile the repositioning interval") {
  nlohmann::json j = minimal_doc();
  j["agent"] = {{"mode", "egr"}, {"forecast_horizon_min", 90.0}};  // 18 x 300 s
  CHECK_NOTHROW(parse_scenario(j));
  j["agent"]["forecast_horizon_min"] = 7.0;  // 420 s: 1.4 intervals
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("forecast_horizon_min"), ConfigError);
  j["agent"]["forecast_horizon_min"] = 0.0;
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  // the same horizon is fine when the agent never builds a forecast
  j["agent"]["mode"] = "isr";
  j["agent"]["forecast_horizon_min"] = 7.0;
  CHECK_NOTHROW(parse_scenario(j));
}

TEST_CASE("feature width per agent mode") {
  ScenarioConfig cfg = parse_scenario(minimal_doc());
  CHECK(forecast_intervals(cfg) == 0);
  CHECK(scenario_feature_dim(cfg) == 7);  // 3 + q

  nlohmann::json j = minimal_doc();
  j["agent"] = {{"mode", "egr"}, {"q", 4}, {"forecast_horizon_min", 90.0}};
  cfg = parse_scenario(j);
  CHECK(forecast_intervals(cfg) == 18);  // 90 min / 300 s
  CHECK(scenario_feature_dim(cfg) == 25);

  j["agent"]["mode"] = "isr";
  cfg = parse_scenario(j);
  CHECK(forecast_intervals(cfg) == 0);
  CHECK(scenario_feature_dim(cfg) == 7);
}

TEST_CASE("emit-parse round trip is the identity") {
  // synthetic source
  nlohmann::json j = minimal_doc();
  j["name"] = "round";
  j["seed"] = 42;
  j["assignment"] = "s1";
  j["agent"] = {{"mode", "egr"}, {"q", 2}, {"count_assigned_waiting", true},
                {"forecast_horizon_min", 30.0}};
  j["train"] = {{"entropy_coef", 0.02}, {"episodes", 64}, {"eval_mode", "sample"}};
  const ScenarioConfig cfg = parse_scenario(j);
  const nlohmann::ordered_json emitted = scenario_to_json(cfg);
  const ScenarioConfig cfg2 = parse_scenario(emitted);
  CHECK(scenario_to_json(cfg2).dump(2) == emitted.dump(2));
  CHECK(cfg2.train.eval_mode == ActMode::Sample);
  CHECK(cfg2.forecast_horizon_min == 30.0);
  CHECK(cfg2.count_assigned_waiting == true);

  // csv source
  nlohmann::json c = minimal_doc();
  c["demand"] = {{"source", "csv"}, {"store", "nyc/store.csv"}, {"day_filter", "weekend"},
                 {"fraction", 0.25}};
  const ScenarioConfig csv_cfg = parse_scenario(c);
  const nlohmann::ordered_json csv_emitted = scenario_to_json(csv_cfg);
  CHECK(scenario_to_json(parse_scenario(csv_emitted)).dump() == csv_emitted.dump());
  CHECK(csv_emitted["demand"]["day_filter"] == "weekend");
}

TEST_CASE("data root resolution") {
  ::unsetenv(kDataRootEnv);
  CHECK(resolve_data_path("nyc/store.csv") == "nyc/store.csv");
  CHECK(resolve_data_path("/abs/store.csv") == "/abs/store.csv");
  ::setenv(kDataRootEnv, "/data/sams", 1);
  CHECK(resolve_data_path("nyc/store.csv") == "/data/sams/nyc/store.csv");
  CHECK(resolve_data_path("/abs/store.csv") == "/abs/store.csv");
  ::setenv(kDataRootEnv, "/data/sams/", 1);
  CHECK(resolve_data_path("nyc/store.csv") == "/data/sams/nyc/store.csv");
  ::setenv(kDataRootEnv, "", 1);
  CHECK(resolve_data_path("nyc/store.csv") == "nyc/store.csv");
  ::unsetenv(kDataRootEnv);
}

TEST_CASE("scenario files load bare or embedded in a manifest") {
  const std::string bare = "tmp_scn_bare.json";
  const std::string manifest = "tmp_scn_manifest.json";
  {
    std::ofstream os(bare);
    os << minimal_doc().dump(2);
  }
  {
    nlohmann::json m;
    m["scenario"] = minimal_doc();
    m["artifacts"] = {"trace.json", "report.json"};
    m["tool_version"] = "samsfleet 0.1.0";
    std::ofstream os(manifest);
    os << m.dump(2);
  }
  CHECK(load_scenario(bare).region.nx == 2);
  CHECK(load_scenario(manifest).region.nx == 2);
  std::remove(bare.c_str());
  std::remove(manifest.c_str());

  const std::string junk = "tmp_scn_junk.json";
  {
    std::ofstream os(junk);
    os << "{ nope";
  }
  CHECK_THROWS_AS(load_scenario(junk), ConfigError);
  std::remove(junk.c_str());
  CHECK_THROWS_AS(load_scenario("definitely_missing_f1le.json"), DataError);
}

TEST_CASE("benchmark presets span the three experiment axes") {
  std::vector<ScenarioConfig> cfgs;
  for (int k = 1; k <= 8; ++k)
    cfgs.push_back(load_scenario(preset_path("configs/tableIV/scenario" + std::to_string(k) +
                                             ".json")));

  for (int k = 0; k < 8; ++k) {
    const ScenarioConfig& c = cfgs[static_cast<std::size_t>(k)];
    // morning-peak window for 1-4, full day for 5-8
    if (k < 4) {
      CHECK(c.window_start == 18000.0);
      CHECK(c.window_end == 46800.0);
    } else {
      CHECK(c.window_start == 10800.0);
      CHECK(c.window_end == 86400.0);
    }
    // weekday/weekend alternate in pairs
    const DayFilter expect_day = (k % 4) < 2 ? DayFilter::Weekday : DayFilter::Weekend;
    CHECK(c.demand.day_filter == expect_day);
    // odd presets use the first-come matcher, even the optimal one
    CHECK(c.assignment == (k % 2 == 0 ? AssignStrategy::S1 : AssignStrategy::S2));

    CHECK(c.sim.fleet_size == 600);
    CHECK(c.sim.vehicle_speed == 5.0);
    CHECK(c.sim.assignment_interval == 30.0);
    CHECK(c.sim.repositioning_interval == 300.0);
    CHECK(c.demand.fraction == 0.1);
    CHECK(c.mode == AgentMode::Isr);
    CHECK(c.region.demand_centroids);
    CHECK(scenario_feature_dim(c) == 7);

    const NetConfig nc = net_config(c);
    CHECK(nc.n_zones == 16);
    CHECK(nc.feature_dim == 7);
    CHECK(nc.fleet_size == 600);
  }
}

TEST_CASE("demo presets parse and build") {
  const ScenarioConfig two = load_scenario(preset_path("configs/demo_2zone.json"));
  CHECK(two.region.nx * two.region.ny == 2);
  CHECK(two.mode == AgentMode::Isr);
  CHECK(two.demand.source == DemandSpec::Source::Synthetic);
  CHECK(two.sim.fleet_size == 8);

  const ScenarioConfig four = load_scenario(preset_path("configs/demo_4zone.json"));
  CHECK(four.region.nx * four.region.ny == 4);
  CHECK(four.sim.fleet_size == 24);

  // a synthetic scenario assembles into a runnable environment
  const EnvSpec env = build_env(two);
  CHECK(env.region.n_zones() == 2);
  CHECK(env.horizon_end == two.window_end);
  CHECK(env.episode.q == two.q);
  CHECK(env.episode.forecast_horizon_intervals == 0);
  REQUIRE(env.stream_for_seed != nullptr);
  const DemandStream s1 = env.stream_for_seed(5);
  const DemandStream s2 = env.stream_for_seed(5);
  REQUIRE(!s1.requests.empty());
  CHECK(s1.requests.size() == s2.requests.size());
  CHECK(s1.requests[0].request_time == s2.requests[0].request_time);
  // zone 0 generates nothing in this demo; every origin is in zone 1
  for (const auto& r : s1.requests) CHECK(zone_of(r.origin, env.region) == 1);
  REQUIRE(env.assign != nullptr);
}

TEST_CASE("demand-weighted centroids are frozen from the scenario seed") {
  nlohmann::json j = minimal_doc();
  j["seed"] = 31;
  j["region"]["demand_centroids"] = true;
  const ScenarioConfig cfg = parse_scenario(j);
  const EnvSpec env = build_env(cfg);

  ServiceRegion manual =
      make_grid_region(cfg.region.width_m, cfg.region.height_m, cfg.region.nx, cfg.region.ny);
  const DemandStream draw =
      synth_poisson(cfg.demand.rates_per_hour, cfg.demand.od_matrix, cfg.window_start,
                    cfg.window_end, cfg.seed, manual);
  apply_demand_centroids(manual, draw);
  REQUIRE(env.region.centroids.size() == manual.centroids.size());
  for (std::size_t z = 0; z < manual.centroids.size(); ++z) {
    CHECK(env.region.centroids[z].x == manual.centroids[z].x);
    CHECK(env.region.centroids[z].y == manual.centroids[z].y);
  }
  // and they moved off the geometric centers for zones with demand
  const ServiceRegion geometric =
      make_grid_region(cfg.region.width_m, cfg.region.height_m, cfg.region.nx, cfg.region.ny);
  bool moved = false;
  for (std::size_t z = 0; z < manual.centroids.size(); ++z)
    moved = moved || manual.centroids[z].x != geometric.centroids[z].x ||
            manual.centroids[z].y != geometric.centroids[z].y;
  CHECK(moved);
}
