#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "thinfb/cli_runner.hpp"
#include "thinfb/errors.hpp"
#include "thinfb/fb_solver.hpp"
#include "thinfb/geometry.hpp"

using namespace thinfb;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thinfb_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string config_error_path(const std::string& sub, const json& cfg) {
  try {
    normalize_config(sub, cfg);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

}  // namespace

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("normalize_config: defaults, overrides, seed") {
  const auto c = normalize_config("solve-fb", json::parse(R"({"seed": 5, "solve_fb": {"h": 0.015625}})"));
  CHECK(c["seed"] == 5);
  CHECK(c["solve_fb"]["h"] == 0.015625);
  CHECK(c["solve_fb"]["n"] == 1);
  CHECK(!c.contains("flatness"));
  CHECK(normalize_config("solve-fb", json::object(), 9)["seed"] == 9);
  CHECK(normalize_config("verify-all", json::object()).contains("flatness"));
}

TEST_CASE("normalize_config reports key paths") {
  CHECK(config_error_path("solve-fb", json::parse(R"({"solve_fb": {"h": 0.03}})")) == "$.solve_fb.h");
  CHECK(config_error_path("solve-fb", json::parse(R"({"solve_fb": {"h": -0.25}})")) == "$.solve_fb.h");
  CHECK(config_error_path("solve-fb", json::parse(R"({"solve_fb": {"bogus": 1}})")) == "$.solve_fb.bogus");
  CHECK(config_error_path("solve-fb", json::parse(R"({"bogus": {}})")) == "$.bogus");
  CHECK(config_error_path("solve-fb", json::parse(R"({"solve_fb": {"n": 1.5}})")) == "$.solve_fb.n");
  CHECK(config_error_path("solve-fb", json::parse(R"({"solve_fb": {"n": 3}})")) == "$.solve_fb.n");
  CHECK(config_error_path("solve-fb", json::parse(R"({"solve_fb": {"data": "tilted"}})")) == "$.solve_fb.data");
  CHECK(config_error_path("eval-u", json::parse(R"({"schema_version": 2})")) == "$.schema_version");
  CHECK(config_error_path("eval-u", json::parse(R"({"seed": -1})")) == "$.seed");
  CHECK(config_error_path("flatness", json::parse(R"({"flatness": {"eps": 0.01}})")) == "$.flatness.eps");
  CHECK(config_error_path("domain-variation", json::parse(R"({"domain_variation": {"a0": [[0.1, 0.2]]}})")) ==
        "$.domain_variation.a0[0]");
  CHECK(config_error_path("eval-u", json::parse(R"({"eval_u": {"order_h": [0.1, "x"]}})")) == "$.eval_u.order_h[1]");
  CHECK(config_error_path("solve-linear", json::parse(R"({"solve_linear": {"h": 0.03125}})")) == "$.solve_linear.h");
  CHECK(config_error_path("nope", json::object()) == "$");
  CHECK(config_error_path("eval-u", json::array()) == "$");
}

TEST_CASE("field CSV round trip and malformed input") {
  const Lattice lat = Lattice::box(2, 0.125, 0.5);
  const GridField g = GridField::sample(lat, [](const PointXZ& X) { return eval_U(X) + 0.1 * X.xprime[0]; });
  std::stringstream ss;
  ss << "# header comment\n";
  write_field_csv(ss, g);
  const GridField back = read_field_csv(ss);
  REQUIRE(back.size() == g.size());
  CHECK(back.lattice().h() == 0.125);
  for (std::size_t k = 0; k < g.size(); ++k) REQUIRE(back[k] == g[k]);

  std::istringstream bad_header("a,b,c\n");
  CHECK_THROWS_AS(read_field_csv(bad_header), ConfigError);
  std::istringstream bad_row("i_xn,i_z,xn,z,value\n0,0,0,0\n");
  CHECK_THROWS_AS(read_field_csv(bad_row), ConfigError);
  std::istringstream partial("i_xn,i_z,xn,z,value\n1,0,0.5,0,1\n0,0,0,0,0\n");
  CHECK_THROWS_AS(read_field_csv(partial), ConfigError);
}

TEST_CASE("run: exit codes and artifacts") {
  const fs::path d2 = scratch("exit2");
  const RunOutcome r2 = run("solve-fb", json::parse(R"({"solve_fb": {"h": 0.03}})"), d2);
  CHECK(r2.exit_code == 2);
  CHECK(!fs::exists(d2));

  const fs::path d1 = scratch("exit1");
  const RunOutcome r1 = run("check-barrier", json::parse(R"({"check_barrier": {"R": 1.0}})"), d1);
  CHECK(r1.exit_code == 1);
  CHECK(fs::exists(d1 / "summary.json"));
  const json s = json::parse(slurp(d1 / "summary.json"));
  CHECK(s["certificates"][0]["id"] == "barrier_subharmonicity");
  CHECK(s["certificates"][0]["pass"] == false);
  CHECK(s["tool_version"] == kToolVersion);

  // a run error (base sandwich violated) leaves nothing behind
  const fs::path de = scratch("run_error");
  const RunOutcome re = run("flatness", json::parse(R"({"flatness": {"eps": 0.0625}})"), de);
  CHECK(re.exit_code == 1);
  CHECK(re.summary.is_null());
  CHECK(!fs::exists(de));

  // a missing CSV is a configuration error
  const fs::path dc = scratch("csv");
  CHECK(run("solve-fb", json::parse(R"({"solve_fb": {"data": "csv", "csv": "/nonexistent.csv"}})"), dc).exit_code == 2);
  CHECK(!fs::exists(dc));
}

TEST_CASE("run: every artifact carries version and config hash; reruns are byte identical") {
  const json cfg = json::parse(R"({"solve_fb": {"h": 0.015625, "box": 0.5}})");
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const RunOutcome ra = run("solve-fb", cfg, a, 3), rb = run("solve-fb", cfg, b, 3);
  REQUIRE(ra.exit_code == 0);
  REQUIRE(rb.exit_code == 0);
  const std::string hash = ra.summary["config_hash"];
  CHECK(hash.rfind("fnv1a:", 0) == 0);
  REQUIRE(ra.artifacts.size() == rb.artifacts.size());
  for (std::size_t i = 0; i < ra.artifacts.size(); ++i) {
    const std::string body = slurp(ra.artifacts[i]);
    CHECK(body == slurp(rb.artifacts[i]));
    CHECK(body.find(hash) != std::string::npos);
    CHECK(body.find(kToolVersion) != std::string::npos);
  }
  // a different seed changes the hash
  const fs::path c = scratch("det_c");
  CHECK(run("solve-fb", cfg, c, 4).summary["config_hash"] != hash);

  // custom CSV boundary data reproduces the U run
  const fs::path csv = a / "fb_field.csv";
  const fs::path d = scratch("csv_data");
  json cc = cfg;
  cc["solve_fb"]["data"] = "csv";
  cc["solve_fb"]["csv"] = csv.string();
  cc["solve_fb"]["h"] = 0.015625;
  CHECK(run("solve-fb", cc, d).exit_code == 0);
}
