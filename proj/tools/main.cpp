#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "rotor/errors.hpp"

namespace {

constexpr int kConfigFailure = 2;
constexpr int kNumericalFailure = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rotorsim: rotor decoherence simulations and fits"};
  app.require_subcommand(1);

  std::string config_path, out_dir, engine, from_csv;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;

  auto common = [&](CLI::App* sub, bool fits) {
    sub->add_option("--config", config_path, "flat key = value config file");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--engine", engine, "simulation engine")
        ->check(CLI::IsMember({"lindblad", "trajectory", "none"}));
    sub->add_option("--threads", threads, "worker threads, 0 = all cores");
    if (fits) sub->add_option("--from-csv", from_csv, "fit an existing CSV instead of simulating");
  };
  auto* diffusion = app.add_subcommand("diffusion", "Var(L_z) growth and fitted D");
  auto* resonance = app.add_subcommand("resonance", "D versus noise center frequency with a Lorentzian fit");
  auto* ramsey = app.add_subcommand("ramsey", "contrast decay per delta_ell with stretched-exponential fits");
  auto* scaling = app.add_subcommand("scaling", "gamma versus delta_ell and D with power-law fits");
  auto* validate = app.add_subcommand("validate", "invariant checks");
  common(diffusion, true);
  common(resonance, true);
  common(ramsey, true);
  common(scaling, false);
  common(validate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigFailure;
  }

  try {
    rotorcli::RunConfig cfg = config_path.empty() ? rotorcli::RunConfig{} : rotorcli::load_config(config_path);
    if (seed) cfg.master_seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!engine.empty()) cfg.engine = rotorcli::parse_engine(engine);
    if (threads) cfg.threads = *threads;
    cfg.validate();

    if (diffusion->parsed()) {
      rotorcli::cmd_diffusion(cfg, std::cout, from_csv);
    } else if (resonance->parsed()) {
      rotorcli::cmd_resonance(cfg, std::cout, from_csv);
    } else if (ramsey->parsed()) {
      rotorcli::cmd_ramsey(cfg, std::cout, from_csv);
    } else if (scaling->parsed()) {
      rotorcli::cmd_scaling(cfg, std::cout);
    } else if (validate->parsed()) {
      if (!rotorcli::cmd_validate(cfg, std::cout).all_pass) return kNumericalFailure;
    }
  } catch (const rotorcli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const rotor::RotorError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return 0;
}
