// Experiment orchestration: full simulation pipeline, NMSD learning curves,
// Monte-Carlo averaging with a mid-run system switch, and the CSV / config
// file formats used by the command-line tool.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "saf/filterbank.hpp"
#include "saf/scenario.hpp"
#include "saf/types.hpp"

namespace saf {

enum class Algorithm { Nsaf, Rnsaf, SaRnsaf, AopSaNsaf, AopSaRnsaf };
enum class CriterionKind { LeastSquares, ModifiedHuber };
enum class PenaltyKind { None, Log };
enum class StepMode { Fixed, Adaptive };
enum class RhoMode { Fixed, Adaptive };
enum class NoiseKind { Gaussian, AlphaStable };

Algorithm parse_algorithm(const std::string& name);
const char* to_string(Algorithm algorithm);

/// Everything a trial needs. Algorithm presets fill the four pipeline knobs
/// (criterion / penalty / step and rho modes); each can also be pinned
/// explicitly, e.g. to run the adaptive pipeline with the penalty disabled.
struct ExperimentConfig {
  int taps = 512;   // M
  int bands = 4;    // N
  long total_samples = 160000;
  int runs = 50;
  Algorithm algorithm = Algorithm::AopSaRnsaf;
  std::optional<CriterionKind> criterion;
  std::optional<PenaltyKind> penalty;
  std::optional<StepMode> step_mode;
  std::optional<RhoMode> rho_mode;

  double mu = 1.0;    // fixed step-size
  double rho = 0.0;   // fixed penalty weight
  double theta = 0.005;
  double lambda = 0.99;
  int window = 20;    // N_w
  double kappa = 6.0;
  double eps1 = 1e-5;
  double eps2 = 1e-5;
  double delta_reg = 1e-8;

  NoiseKind noise = NoiseKind::AlphaStable;
  double alpha = 1.6;
  double gamma = 0.02;
  double sigma2 = 0.04;  // Gaussian-noise variance
  double input_pole = 0.9;

  SystemKind system_kind = SystemKind::Sparse;
  double system_chi = 0.9357;
  std::string system_file;
  int active_taps = 16;
  SystemKind switch_kind = SystemKind::Dispersive;
  double switch_chi = 0.3663;
  std::string switch_file;
  long switch_at = 80000;  // sample index of the system change

  std::uint64_t seed = 1;
  int nmsd_stride = 16;  // record every s-th decimated iteration
  int bank_length = 33;
  double bank_atten_db = 60.0;
  std::string prototype_file;
  bool fullband_error = false;
  int threads = 1;

  // Effective pipeline knobs after applying the algorithm preset.
  CriterionKind effective_criterion() const;
  PenaltyKind effective_penalty() const;
  StepMode effective_step_mode() const;
  RhoMode effective_rho_mode() const;

  void validate() const;
};

/// NMSD trajectory sampled at decimated iterations (sample index kN).
struct LearningCurve {
  std::vector<long> sample;
  std::vector<double> nmsd_db;
  std::vector<double> fullband_error;  // empty unless requested
  bool averaged = false;
};

struct ExperimentResult {
  LearningCurve curve;
  int diverged_runs = 0;
  std::vector<long> divergence_iterations;  // one entry per diverged run
};

inline constexpr double kNmsdFloorDb = -300.0;

/// 10 log10(||w - w_o||^2 / ||w_o||^2), floored at -300 dB. Throws for a
/// zero reference system.
double nmsd_db(const VectorX<double>& w, const VectorX<double>& w_o);

/// dB of a linear squared-deviation ratio, with the same floor.
double ratio_to_db(double ratio);

/// Seed run_experiment assigns to trial index t.
std::uint64_t experiment_trial_seed(const ExperimentConfig& config, int trial);

/// Runs one trial with the given per-trial seed. Input and noise streams
/// derive from `trial_seed`; the systems and the filter bank derive from
/// config.seed, so every trial of an experiment identifies the same system.
/// Throws DivergenceError when the weights leave the finite range.
LearningCurve run_trial(const ExperimentConfig& config,
                        std::uint64_t trial_seed);

/// Runs config.runs trials (in parallel when config.threads > 1; results are
/// merged by trial index, so the output does not depend on the thread
/// count), averages the linear deviation ratios across completed runs, and
/// converts to dB. Diverged trials are counted, not averaged.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Deterministic CSV: header `sample,nmsd_db[,e_fullband]`, then one row per
/// recorded iteration, numbers in scientific notation with 16 fractional
/// digits so parsing reproduces the values exactly.
void write_csv(const LearningCurve& curve, std::ostream& out);
void write_csv(const LearningCurve& curve, const std::string& path);
LearningCurve read_csv(std::istream& in);
LearningCurve read_csv_file(const std::string& path);

/// `key = value` per line, `#` comments, unknown keys are errors.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(std::istream& in);

/// The analysis bank a config asks for: loaded from prototype_file when set,
/// designed otherwise.
AnalysisBank<double> make_bank(const ExperimentConfig& config);

/// The (initial, post-switch) systems a config asks for.
std::pair<SystemModel<double>, SystemModel<double>> make_systems(
    const ExperimentConfig& config);

}  // namespace saf
