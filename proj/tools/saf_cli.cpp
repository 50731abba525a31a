// Command-line front end: run experiments to CSV, design analysis banks,
// synthesize test systems, and measure sparseness.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "saf/harness.hpp"

namespace {

int cmd_run(const std::string& config_path,
            const std::optional<std::string>& algo,
            const std::optional<double>& alpha,
            const std::optional<double>& gamma,
            const std::optional<int>& runs,
            const std::optional<std::uint64_t>& seed,
            const std::string& out_path) {
  saf::ExperimentConfig config = saf::load_config(config_path);
  if (algo) config.algorithm = saf::parse_algorithm(*algo);
  if (alpha) config.alpha = *alpha;
  if (gamma) config.gamma = *gamma;
  if (runs) config.runs = *runs;
  if (seed) config.seed = *seed;
  config.validate();

  const saf::ExperimentResult result = saf::run_experiment(config);
  if (result.diverged_runs > 0)
    std::cerr << "warning: " << result.diverged_runs << " of " << config.runs
              << " runs diverged and were excluded from the average\n";
  if (out_path.empty())
    saf::write_csv(result.curve, std::cout);
  else
    saf::write_csv(result.curve, out_path);
  return 0;
}

int cmd_design_bank(int bands, int length, double atten_db,
                    const std::string& out_path) {
  const saf::PrototypeFilter<double> prototype =
      saf::design_prototype<double>(bands, length, atten_db);
  const saf::AnalysisBank<double> bank = saf::modulate(prototype, bands);
  saf::save_prototype(prototype, bands, out_path);
  std::fprintf(stderr,
               "designed N=%d L=%d prototype: stopband %.2f dB, "
               "power-complementarity error %.2e\n",
               bands, length, saf::stopband_attenuation_db(bank),
               saf::power_complementarity_error(bank));
  return 0;
}

int cmd_synth_system(int taps, const std::string& kind, double chi,
                     std::uint64_t seed, int active_taps,
                     const std::string& out_path) {
  saf::SystemKind system_kind;
  if (kind == "sparse")
    system_kind = saf::SystemKind::Sparse;
  else if (kind == "dispersive")
    system_kind = saf::SystemKind::Dispersive;
  else
    throw CLI::ValidationError("--kind must be sparse or dispersive");

  std::mt19937_64 rng(saf::mix_seed(seed, 0xA1));
  const saf::SystemModel<double> model =
      saf::synth_system<double>(taps, system_kind, chi, rng, active_taps);
  saf::save_system(model, out_path);
  std::fprintf(stderr, "synthesized %s system: M=%d chi=%.4f\n", kind.c_str(),
               taps, saf::sparseness(model.response));
  return 0;
}

int cmd_chi(const std::string& in_path) {
  const saf::SystemModel<double> model = saf::load_system<double>(in_path);
  std::printf("%.10g\n", saf::sparseness(model.response));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subband adaptive filtering experiments"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run an experiment, emit a CSV curve");
  std::string config_path;
  std::optional<std::string> algo;
  std::optional<double> alpha, gamma;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  run->add_option("--config", config_path, "config file (key = value lines)")
      ->required();
  run->add_option("--algo", algo,
                  "nsaf | rnsaf | sa-rnsaf | aop-sa-nsaf | aop-sa-rnsaf");
  run->add_option("--alpha", alpha, "alpha-stable characteristic exponent");
  run->add_option("--gamma", gamma, "alpha-stable dispersion");
  run->add_option("--runs", runs, "number of Monte-Carlo runs");
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out_path, "output CSV path (stdout if omitted)");

  // design-bank
  auto* design = app.add_subcommand("design-bank",
                                    "design a cosine-modulated prototype");
  int bands = 4, length = 33;
  double atten_db = 60.0;
  std::string bank_out;
  design->add_option("--bands", bands, "number of subbands")->required();
  design->add_option("--length", length, "prototype length")->required();
  design->add_option("--atten", atten_db, "stopband attenuation target, dB")
      ->required();
  design->add_option("--out", bank_out, "prototype file path")->required();

  // synth-system
  auto* synth = app.add_subcommand("synth-system",
                                   "synthesize a system with target chi");
  int taps = 512;
  std::string kind = "sparse";
  double chi = 0.9357;
  std::uint64_t synth_seed = 1;
  int active_taps = 16;
  std::string system_out;
  synth->add_option("--taps", taps, "impulse response length")->required();
  synth->add_option("--kind", kind, "sparse | dispersive")->required();
  synth->add_option("--chi", chi, "target sparseness")->required();
  synth->add_option("--out", system_out, "system file path")->required();
  synth->add_option("--seed", synth_seed, "synthesis seed");
  synth->add_option("--active-taps", active_taps,
                    "active tap count for the sparse kind");

  // chi
  auto* chi_cmd = app.add_subcommand("chi", "print the sparseness of a system");
  std::string chi_in;
  chi_cmd->add_option("--in", chi_in, "system file path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, algo, alpha, gamma, runs, seed, out_path);
    if (design->parsed())
      return cmd_design_bank(bands, length, atten_db, bank_out);
    if (synth->parsed())
      return cmd_synth_system(taps, kind, chi, synth_seed, active_taps,
                              system_out);
    if (chi_cmd->parsed()) return cmd_chi(chi_in);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
