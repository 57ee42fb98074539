// thinfb <subcommand> --config <path> [--out <dir>] [--seed <u64>]

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "thinfb/cli_runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Thin one-phase free boundary experiments"};
  app.set_version_flag("--version", std::string(thinfb::kToolVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir = "thinfb_out";
  std::uint64_t seed = 0;
  for (const auto& name : thinfb::subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_dir, "artifact directory");
    sub->add_option("--seed", seed, "seed of the single random generator (overrides the config)");
  }
  CLI11_PARSE(app, argc, argv);

  const CLI::App* chosen = app.get_subcommands().front();
  std::optional<std::uint64_t> seed_opt;
  if (chosen->count("--seed") > 0) seed_opt = seed;

  nlohmann::json config;
  {
    std::ifstream is(config_path);
    if (!is) {
      std::cerr << "$: cannot open config " << config_path << '\n';
      return 2;
    }
    try {
      is >> config;
    } catch (const nlohmann::json::parse_error& e) {
      std::cerr << "$: invalid JSON: " << e.what() << '\n';
      return 2;
    }
  }

  const thinfb::RunOutcome res = thinfb::run(chosen->get_name(), config, out_dir, seed_opt);
  if (res.exit_code == 2 || res.summary.is_null()) {
    std::cerr << res.message << '\n';
    return res.exit_code;
  }
  for (const auto& c : res.summary["certificates"])
    std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["id"].get<std::string>()
              << " margin=" << c["margin"].get<double>() << '\n';
  std::cout << res.message << '\n';
  return res.exit_code;
}
