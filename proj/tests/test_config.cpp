#include "doctest.h"
#include "trajproj/config.hpp"
#include "trajproj/errors.hpp"

using namespace trajproj;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("shipped presets load") {
  for (const char* name : {"lorenz", "ks", "ns"}) {
    CAPTURE(name);
    const RunConfig rc = load_run_config(std::string(TRAJPROJ_SOURCE_DIR) + "/configs/" + name + ".json");
    CHECK_NOTHROW(rc.experiment.validate());
    CHECK(rc.experiment.methods.size() == 3);
    CHECK(to_string(rc.experiment.system.grid.system) == name);
  }
  const RunConfig ns = load_run_config(std::string(TRAJPROJ_SOURCE_DIR) + "/configs/ns.json");
  CHECK(ns.experiment.methods[1].config.lambda.norm_of_uhat);
  CHECK(ns.experiment.system.grid.resolution == std::vector<std::size_t>{64, 64});
  CHECK(ns.experiment.degrade.keep_fraction == 0.25);
  CHECK(ns.experiment.seeds.size() == 16);
}

TEST_CASE("minimal config and defaults") {
  const RunConfig rc = parse_run_config(R"({"system": "lorenz", "generator": {"seeds": [1, 2]}})");
  CHECK(rc.experiment.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(rc.experiment.system.grid == SystemConfig::defaults(SystemKind::lorenz).grid);
  CHECK(rc.experiment.methods.empty());
  CHECK_FALSE(rc.output.csv.has_value());
}

TEST_CASE("seed ranges and methods") {
  const RunConfig rc = parse_run_config(R"({
    "system": "ks",
    "grid": {"steps": 20, "resolution": 32},
    "generator": {"seeds": {"first": 10, "count": 3}},
    "degrade": {"kind": "spectral-truncate", "keep_fraction": 0.5},
    "methods": [{"method": "relaxed", "lambda": 10}, {"name": "lb", "method": "lbfgs", "lambda": "norm-of-uhat",
                 "lbfgs": {"memory": 5, "max_iters": 7}}],
    "resolutions": [32, 64],
    "output": {"csv": "out.csv"}
  })");
  CHECK(rc.experiment.seeds == std::vector<std::uint64_t>{10, 11, 12});
  CHECK(rc.experiment.system.grid.num_steps == 20);
  CHECK(rc.experiment.methods[0].name == "relaxed");
  CHECK(rc.experiment.methods[0].config.lambda.value == 10.0);
  CHECK(rc.experiment.methods[1].config.lbfgs.memory == 5);
  CHECK(rc.experiment.resolutions == std::vector<std::size_t>{32, 64});
  CHECK(rc.output.csv->string() == "out.csv");
}

TEST_CASE("round trip through json") {
  const RunConfig rc = load_run_config(std::string(TRAJPROJ_SOURCE_DIR) + "/configs/lorenz.json");
  const RunConfig again = parse_run_config(run_config_to_json(rc));
  CHECK(again.experiment.seeds == rc.experiment.seeds);
  CHECK(again.experiment.system.grid == rc.experiment.system.grid);
  CHECK(again.experiment.methods.size() == rc.experiment.methods.size());
  CHECK(again.experiment.methods[2].config.lambda == rc.experiment.methods[2].config.lambda);
  CHECK(again.experiment.degrade.noise_sigma == rc.experiment.degrade.noise_sigma);
}

TEST_CASE("errors name the offending key") {
  CHECK(error_of(R"({"system": "lorenz", "grid": {"dtt": 0.1}})").find("grid.dtt") != std::string::npos);
  CHECK(error_of(R"({"system": "lorenz", "methods": [{"method": "newton"}]})").find("methods[0].method") !=
        std::string::npos);
  CHECK(error_of(R"({"system": "ks", "methods": [{"method": "relaxed", "lambda": -1}]})").find("lambda") !=
        std::string::npos);
  CHECK_FALSE(error_of(R"({"system": "lorenz", "grid": {"resolution": 64}})").empty());
  CHECK_FALSE(error_of(R"({"system": "heat"})").empty());
  CHECK_FALSE(error_of("{not json").empty());
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), Error);
}
