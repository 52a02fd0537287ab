#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "mcilab/lab.hpp"

using namespace mcilab;

int main(int argc, char** argv) {
  CLI::App app{"mci-lab: run implementation-counting and branch-measure experiments from a scenario file"};
  app.require_subcommand(1);
  std::string scenario, out = "out", format = "json";
  std::optional<std::uint64_t> seed;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"check", "verify candidate mappings against a computation"},
      {"count", "count mutually independent implementations"},
      {"rules", "evaluate probability rules on a branch decomposition"},
      {"quantum", "run wavefunction experiments"},
      {"noise", "run the noise-limited counting experiment"},
      {"mangled", "run two-world dynamics and branch-cutoff counting"},
      {"all", "run every experiment in the scenario"},
  };
  for (auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", scenario, "scenario YAML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--format", format, "report format")->check(CLI::IsMember({"json", "csv", "both"}))->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const auto command = app.get_subcommands().front()->get_name();
  try {
    const auto start = std::chrono::steady_clock::now();
    auto s = lab::load_scenario(scenario);
    auto rep = lab::execute(s, command, seed);
    lab::stamp(rep, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    for (auto& path : lab::emit(rep, out, format != "csv", format != "json")) std::cout << path << "\n";
    for (auto& e : rep.json["experiments"])
      std::cout << e["name"].get<std::string>() << ": " << e["status"].get<std::string>() << "\n";
    return rep.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "mci-lab: " << e.what() << "\n";
    return 1;
  }
}
