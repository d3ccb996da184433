#include "rwback/runio.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{
      "Semiclassical backreaction on spatially flat Robertson-Walker "
      "spacetime: certification suites and simulation runs"};
  app.require_subcommand(1);

  std::string scope = "all";
  CLI::App* verify =
      app.add_subcommand("verify", "run the built-in certification suites");
  verify->add_option("--scope", scope,
                     "series, hadamard, subtraction, quadrature, or all")
      ->check(CLI::IsMember(
          {"series", "hadamard", "subtraction", "quadrature", "all"}));

  std::string config_path;
  std::string out_dir;
  CLI::App* run =
      app.add_subcommand("run", "run a simulation from a JSON config file");
  run->add_option("config", config_path, "configuration file")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) return rwback::cmd_verify(scope);
    if (run->parsed()) return rwback::cmd_run(config_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
