#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <micromaser/micromaser.hpp>

int main(int argc, char **argv) {
  CLI::App app{"micromaser phase-structure sweeps"};
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("config", config_path, "sweep config file (key = value)")
      ->required();
  app.add_option("--set", overrides,
                 "override a config key, e.g. --set theta=5 (repeatable)");
  CLI11_PARSE(app, argc, argv);

  micromaser::sweep::SweepConfig cfg;
  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "micromaser: cannot open '" << config_path << "'\n";
      return 2;
    }
    cfg = micromaser::sweep::parse_config(in);
    for (const auto &ov : overrides) {
      const auto eq = ov.find('=');
      if (eq == std::string::npos) {
        std::cerr << "micromaser: --set expects key=value, got '" << ov
                  << "'\n";
        return 2;
      }
      micromaser::sweep::apply_key(
          cfg, micromaser::sweep::detail2::trim(ov.substr(0, eq)),
          micromaser::sweep::detail2::trim(ov.substr(eq + 1)), 0);
    }
    micromaser::sweep::validate_config(cfg);
  } catch (const micromaser::maser_error &e) {
    std::cerr << "micromaser: " << config_path << ": " << e.what() << "\n";
    return 2;
  }

  try {
    int rc;
    if (cfg.output.empty()) {
      rc = micromaser::sweep::run(cfg, std::cout, micromaser::version());
    } else {
      std::ofstream out(cfg.output);
      if (!out) {
        std::cerr << "micromaser: cannot write '" << cfg.output << "'\n";
        return 2;
      }
      rc = micromaser::sweep::run(cfg, out, micromaser::version());
    }
    if (rc != 0)
      std::cerr << "micromaser: some cells could not be computed (nan)\n";
    return rc;
  } catch (const micromaser::maser_error &e) {
    std::cerr << "micromaser: " << e.what() << "\n";
    return 3;
  }
}
