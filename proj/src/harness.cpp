#include "saf/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "saf/aop.hpp"
#include "saf/saf_core.hpp"

namespace saf {
namespace {

constexpr std::uint64_t kSystemStream = 0xA1;
constexpr std::uint64_t kSwitchStream = 0xA2;
constexpr std::uint64_t kInputStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kTrialStream = 0x1000;

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

Algorithm parse_algorithm(const std::string& name) {
  const std::string id = lower(name);
  if (id == "nsaf") return Algorithm::Nsaf;
  if (id == "rnsaf") return Algorithm::Rnsaf;
  if (id == "sa-rnsaf") return Algorithm::SaRnsaf;
  if (id == "aop-sa-nsaf") return Algorithm::AopSaNsaf;
  if (id == "aop-sa-rnsaf") return Algorithm::AopSaRnsaf;
  throw std::invalid_argument("unknown algorithm: " + name);
}

const char* to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Nsaf: return "nsaf";
    case Algorithm::Rnsaf: return "rnsaf";
    case Algorithm::SaRnsaf: return "sa-rnsaf";
    case Algorithm::AopSaNsaf: return "aop-sa-nsaf";
    case Algorithm::AopSaRnsaf: return "aop-sa-rnsaf";
  }
  return "?";
}

CriterionKind ExperimentConfig::effective_criterion() const {
  if (criterion) return *criterion;
  switch (algorithm) {
    case Algorithm::Nsaf:
    case Algorithm::AopSaNsaf: return CriterionKind::LeastSquares;
    default: return CriterionKind::ModifiedHuber;
  }
}

PenaltyKind ExperimentConfig::effective_penalty() const {
  if (penalty) return *penalty;
  switch (algorithm) {
    case Algorithm::Nsaf:
    case Algorithm::Rnsaf: return PenaltyKind::None;
    default: return PenaltyKind::Log;
  }
}

StepMode ExperimentConfig::effective_step_mode() const {
  if (step_mode) return *step_mode;
  switch (algorithm) {
    case Algorithm::AopSaNsaf:
    case Algorithm::AopSaRnsaf: return StepMode::Adaptive;
    default: return StepMode::Fixed;
  }
}

RhoMode ExperimentConfig::effective_rho_mode() const {
  if (rho_mode) return *rho_mode;
  switch (algorithm) {
    case Algorithm::AopSaNsaf:
    case Algorithm::AopSaRnsaf: return RhoMode::Adaptive;
    default: return RhoMode::Fixed;
  }
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("config: " + what);
  };
  if (taps < 1) fail("taps must be >= 1");
  if (bands < 1) fail("bands must be >= 1");
  if (total_samples < 1) fail("total_samples must be >= 1");
  if (runs < 1) fail("runs must be >= 1");
  if (switch_at < 0 || switch_at > total_samples)
    fail("switch_at must lie in [0, total_samples]");
  if (effective_step_mode() == StepMode::Fixed && !(mu > 0))
    fail("fixed step-size mu must be > 0");
  if (rho < 0) fail("rho must be >= 0");
  if (effective_penalty() == PenaltyKind::Log && !(theta > 0))
    fail("theta must be > 0");
  if (effective_criterion() == CriterionKind::ModifiedHuber &&
      !(lambda > 0.9 && lambda < 1))
    fail("lambda must lie in (0.9, 1)");
  if (window < 2) fail("window must be >= 2");
  if (!(kappa >= 1)) fail("kappa must be >= 1");
  if (!(eps1 > 0) || !(eps2 > 0)) fail("eps1/eps2 must be > 0");
  if (delta_reg < 0) fail("delta_reg must be >= 0");
  if (noise == NoiseKind::AlphaStable && !(alpha > 0 && alpha <= 2))
    fail("alpha must lie in (0, 2]");
  if (noise == NoiseKind::AlphaStable && !(gamma > 0))
    fail("gamma must be > 0");
  if (noise == NoiseKind::Gaussian && sigma2 < 0) fail("sigma2 must be >= 0");
  if (!(std::abs(input_pole) < 1)) fail("|input_pole| must be < 1");
  if (system_file.empty() && !(system_chi >= 0 && system_chi < 1))
    fail("system_chi must lie in [0, 1)");
  if (switch_file.empty() && !(switch_chi >= 0 && switch_chi < 1))
    fail("switch_chi must lie in [0, 1)");
  if (active_taps < 1 || active_taps > taps)
    fail("active_taps must lie in [1, taps]");
  if (nmsd_stride < 1) fail("nmsd_stride must be >= 1");
  if (prototype_file.empty() && bank_length < 2 * bands)
    fail("bank_length must be >= 2*bands");
  if (prototype_file.empty() && !(bank_atten_db > 0))
    fail("bank_atten_db must be > 0");
  if (threads < 0) fail("threads must be >= 0");
}

double ratio_to_db(double ratio) {
  if (!(ratio > 0)) return kNmsdFloorDb;
  return std::max(10.0 * std::log10(ratio), kNmsdFloorDb);
}

double nmsd_db(const VectorX<double>& w, const VectorX<double>& w_o) {
  const double denom = w_o.squaredNorm();
  if (denom == 0)
    throw std::invalid_argument("nmsd: reference system must be nonzero");
  return ratio_to_db((w - w_o).squaredNorm() / denom);
}

AnalysisBank<double> make_bank(const ExperimentConfig& config) {
  if (!config.prototype_file.empty()) {
    Index file_bands = 0;
    PrototypeFilter<double> p =
        load_prototype<double>(config.prototype_file, &file_bands);
    if (file_bands != config.bands)
      throw std::runtime_error("prototype file is for N=" +
                               std::to_string(file_bands) +
                               " bands, config asks for N=" +
                               std::to_string(config.bands));
    return modulate(p, config.bands);
  }
  return modulate(design_prototype<double>(config.bands, config.bank_length,
                                           config.bank_atten_db),
                  config.bands);
}

std::pair<SystemModel<double>, SystemModel<double>> make_systems(
    const ExperimentConfig& config) {
  std::pair<SystemModel<double>, SystemModel<double>> systems;
  if (!config.system_file.empty()) {
    systems.first = load_system<double>(config.system_file);
    if (systems.first.response.size() != config.taps)
      throw std::runtime_error("system file tap count mismatch");
  } else {
    std::mt19937_64 rng(mix_seed(config.seed, kSystemStream));
    systems.first = synth_system<double>(config.taps, config.system_kind,
                                         config.system_chi, rng,
                                         config.active_taps);
  }
  if (!config.switch_file.empty()) {
    systems.second = load_system<double>(config.switch_file);
    if (systems.second.response.size() != config.taps)
      throw std::runtime_error("switch system file tap count mismatch");
  } else {
    std::mt19937_64 rng(mix_seed(config.seed, kSwitchStream));
    systems.second = synth_system<double>(config.taps, config.switch_kind,
                                          config.switch_chi, rng,
                                          config.active_taps);
  }
  return systems;
}

namespace {

// Raw per-trial output: linear deviation ratios, ready for averaging.
struct TrialData {
  std::vector<long> sample;
  std::vector<double> ratio;
  std::vector<double> fullband_error;
};

std::unique_ptr<RobustCriterion<double>> make_criterion(
    const ExperimentConfig& config) {
  if (config.effective_criterion() == CriterionKind::LeastSquares)
    return std::make_unique<LeastSquaresCriterion<double>>();
  return std::make_unique<MhCriterion<double>>(config.bands, config.lambda,
                                               config.window);
}

std::unique_ptr<SparsityPenalty<double>> make_penalty(
    const ExperimentConfig& config) {
  if (config.effective_penalty() == PenaltyKind::None)
    return std::make_unique<NullPenalty<double>>();
  return std::make_unique<LogPenalty<double>>(config.theta);
}

class NoiseSource {
 public:
  NoiseSource(const ExperimentConfig& config, std::uint64_t seed) {
    if (config.noise == NoiseKind::Gaussian)
      gaussian_.emplace(config.sigma2, seed);
    else
      stable_.emplace(config.alpha, config.gamma, seed);
  }
  double next() { return gaussian_ ? gaussian_->next() : stable_->next(); }

 private:
  std::optional<GaussianSampler<double>> gaussian_;
  std::optional<AlphaStableSampler<double>> stable_;
};

TrialData run_trial_impl(const ExperimentConfig& config,
                         const AnalysisBank<double>& bank,
                         const SystemModel<double>& first_system,
                         const SystemModel<double>& switch_system,
                         std::uint64_t trial_seed) {
  const int taps = config.taps;
  const int bands = config.bands;
  const bool adaptive_step =
      config.effective_step_mode() == StepMode::Adaptive;
  const bool adaptive_rho = config.effective_rho_mode() == RhoMode::Adaptive;

  Ar1Generator<double> input(config.input_pole,
                             mix_seed(trial_seed, kInputStream));
  NoiseSource noise(config, mix_seed(trial_seed, kNoiseStream));

  SubbandAnalyzer<double> input_bands(bank);
  SubbandAnalyzer<double> desired_bands(bank);
  SafState<double> state(taps, bands, config.delta_reg);
  auto criterion = make_criterion(config);
  auto penalty = make_penalty(config);
  SubbandStats<double> stats(bands, taps, config.kappa, config.eps1,
                             config.eps2);
  RhoState<double> rho;

  // fullband delay line for generating d(n) (and the optional output error)
  VectorX<double> line = VectorX<double>::Zero(taps);
  VectorX<double> phi(bands), mu(bands), errors(bands), desired_dec(bands);
  VectorX<double> grad(taps);

  TrialData data;
  const long reports =
      (config.total_samples + long(bands) * config.nmsd_stride - 1) /
      (long(bands) * config.nmsd_stride);
  data.sample.reserve(reports);
  data.ratio.reserve(reports);
  if (config.fullband_error) data.fullband_error.reserve(reports);

  for (long n = 0; n < config.total_samples; ++n) {
    const VectorX<double>& w_o = (n < config.switch_at)
                                     ? first_system.response
                                     : switch_system.response;
    const double u = input.next();
    for (Index m = taps - 1; m > 0; --m) line(m) = line(m - 1);
    line(0) = u;
    const double d = line.dot(w_o) + noise.next();

    input_bands.push(u);
    desired_bands.push(d);
    state.push_band_samples(input_bands.compute_outputs());
    if (n % bands != 0) continue;

    const long k = n / bands;
    state.refresh_regressors();
    const MatrixX<double>& regressors = state.regressors();
    desired_dec = desired_bands.compute_outputs();

    const bool record = (k % config.nmsd_stride == 0);
    if (record && config.fullband_error)
      data.fullband_error.push_back(d - line.dot(state.weights()));

    errors = subband_errors(regressors, state.weights(), desired_dec);
    for (Index i = 0; i < bands; ++i) {
      criterion->observe(i, errors(i));
      phi(i) = criterion->scaling(i, errors(i));
    }
    if (adaptive_step) {
      for (Index i = 0; i < bands; ++i) {
        update_error_power(stats, i, phi(i), errors(i));
        update_noise_power(stats, i, phi(i), errors(i), regressors(0, i),
                           regressors.col(i));
        mu(i) = step_size(stats, i);
      }
    } else {
      mu.setConstant(config.mu);
    }

    VectorX<double> psi = coarse_update(state.weights(), regressors, errors,
                                        phi, mu, config.delta_reg);
    VectorX<double> next;
    if (penalty->vanishes()) {
      rho.value = 0;
      next = psi;
    } else {
      penalty->gradient(psi, grad);
      VectorX<double> direction =
          penalty_direction(regressors, grad, config.delta_reg);
      if (adaptive_rho)
        rho.value = (k == 0) ? 0.0
                             : rho_opt_estimate(psi, state.weights(),
                                                direction, config.eps1);
      else
        rho.value = config.rho;
      next = zero_attract_update(psi, direction, rho.value);
    }
    state.set_psi(std::move(psi));
    state.commit_weights(std::move(next));

    if (record) {
      data.sample.push_back(n);
      data.ratio.push_back((state.weights() - w_o).squaredNorm() /
                           w_o.squaredNorm());
    }
  }
  return data;
}

LearningCurve to_curve(const TrialData& data, bool averaged) {
  LearningCurve curve;
  curve.sample = data.sample;
  curve.nmsd_db.resize(data.ratio.size());
  std::transform(data.ratio.begin(), data.ratio.end(), curve.nmsd_db.begin(),
                 ratio_to_db);
  curve.fullband_error = data.fullband_error;
  curve.averaged = averaged;
  return curve;
}

}  // namespace

std::uint64_t experiment_trial_seed(const ExperimentConfig& config,
                                    int trial) {
  return mix_seed(config.seed, kTrialStream + std::uint64_t(trial));
}

LearningCurve run_trial(const ExperimentConfig& config,
                        std::uint64_t trial_seed) {
  config.validate();
  const AnalysisBank<double> bank = make_bank(config);
  const auto systems = make_systems(config);
  return to_curve(run_trial_impl(config, bank, systems.first, systems.second,
                                 trial_seed),
                  false);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const AnalysisBank<double> bank = make_bank(config);
  const auto systems = make_systems(config);

  struct Slot {
    std::optional<TrialData> data;
    long divergence_iteration = -1;
    std::exception_ptr error;
  };
  std::vector<Slot> slots(config.runs);

  auto work = [&](int begin, int end) {
    for (int t = begin; t < end; ++t) {
      try {
        slots[t].data = run_trial_impl(config, bank, systems.first,
                                       systems.second,
                                       experiment_trial_seed(config, t));
      } catch (const DivergenceError& e) {
        slots[t].divergence_iteration = e.iteration();
      } catch (...) {
        slots[t].error = std::current_exception();
      }
    }
  };

  int thread_count = config.threads;
  if (thread_count == 0)
    thread_count = std::max(1u, std::thread::hardware_concurrency());
  thread_count = std::min(thread_count, config.runs);
  if (thread_count <= 1) {
    work(0, config.runs);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (config.runs + thread_count - 1) / thread_count;
    for (int j = 0; j < thread_count; ++j) {
      const int begin = j * chunk;
      const int end = std::min(config.runs, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  ExperimentResult result;
  TrialData sum;
  int completed = 0;
  // deterministic merge by trial index, independent of the thread count
  for (int t = 0; t < config.runs; ++t) {
    Slot& slot = slots[t];
    if (slot.error) std::rethrow_exception(slot.error);
    if (!slot.data) {
      ++result.diverged_runs;
      result.divergence_iterations.push_back(slot.divergence_iteration);
      continue;
    }
    if (completed == 0) {
      sum = std::move(*slot.data);
    } else {
      for (std::size_t j = 0; j < sum.ratio.size(); ++j)
        sum.ratio[j] += slot.data->ratio[j];
      for (std::size_t j = 0; j < sum.fullband_error.size(); ++j)
        sum.fullband_error[j] += slot.data->fullband_error[j];
    }
    ++completed;
  }
  if (completed == 0)
    throw std::runtime_error("run_experiment: every trial diverged");
  for (double& r : sum.ratio) r /= completed;
  for (double& e : sum.fullband_error) e /= completed;
  result.curve = to_curve(sum, true);
  return result;
}

void write_csv(const LearningCurve& curve, std::ostream& out) {
  const bool with_error = !curve.fullband_error.empty();
  out << (with_error ? "sample,nmsd_db,e_fullband\n" : "sample,nmsd_db\n");
  char buf[96];
  for (std::size_t j = 0; j < curve.sample.size(); ++j) {
    if (with_error)
      std::snprintf(buf, sizeof(buf), "%ld,%.16e,%.16e\n", curve.sample[j],
                    curve.nmsd_db[j], curve.fullband_error[j]);
    else
      std::snprintf(buf, sizeof(buf), "%ld,%.16e\n", curve.sample[j],
                    curve.nmsd_db[j]);
    out << buf;
  }
}

void write_csv(const LearningCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  write_csv(curve, out);
}

LearningCurve read_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("read_csv: empty");
  bool with_error;
  if (header == "sample,nmsd_db,e_fullband")
    with_error = true;
  else if (header == "sample,nmsd_db")
    with_error = false;
  else
    throw std::runtime_error("read_csv: unexpected header: " + header);

  LearningCurve curve;
  std::string row;
  while (std::getline(in, row)) {
    if (row.empty()) continue;
    long sample;
    double db, err = 0;
    const int got = with_error
                        ? std::sscanf(row.c_str(), "%ld,%lf,%lf", &sample, &db,
                                      &err)
                        : std::sscanf(row.c_str(), "%ld,%lf", &sample, &db);
    if (got != (with_error ? 3 : 2))
      throw std::runtime_error("read_csv: malformed row: " + row);
    curve.sample.push_back(sample);
    curve.nmsd_db.push_back(db);
    if (with_error) curve.fullband_error.push_back(err);
  }
  return curve;
}

LearningCurve read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  return read_csv(in);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": " +
                                value);
  }
  if (used != value.size())
    throw std::invalid_argument("config: bad number for " + key + ": " +
                                value);
  return out;
}

long to_long(const std::string& key, const std::string& value) {
  const double d = to_double(key, value);
  const long l = long(d);
  if (double(l) != d)
    throw std::invalid_argument("config: expected integer for " + key);
  return l;
}

bool to_bool(const std::string& key, const std::string& value) {
  const std::string v = lower(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: expected boolean for " + key);
}

SystemKind to_system_kind(const std::string& key, const std::string& value) {
  const std::string v = lower(value);
  if (v == "sparse") return SystemKind::Sparse;
  if (v == "dispersive") return SystemKind::Dispersive;
  throw std::invalid_argument("config: bad system kind for " + key + ": " +
                              value);
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string entry = trim(raw);
    if (entry.empty()) continue;
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(entry.substr(0, eq));
    const std::string value = trim(entry.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");

    if (key == "taps") config.taps = int(to_long(key, value));
    else if (key == "bands") config.bands = int(to_long(key, value));
    else if (key == "total_samples") config.total_samples = to_long(key, value);
    else if (key == "runs") config.runs = int(to_long(key, value));
    else if (key == "algorithm") config.algorithm = parse_algorithm(value);
    else if (key == "criterion") {
      const std::string v = lower(value);
      if (v == "mh") config.criterion = CriterionKind::ModifiedHuber;
      else if (v == "ls") config.criterion = CriterionKind::LeastSquares;
      else throw std::invalid_argument("config: criterion must be mh or ls");
    } else if (key == "penalty") {
      const std::string v = lower(value);
      if (v == "log") config.penalty = PenaltyKind::Log;
      else if (v == "none") config.penalty = PenaltyKind::None;
      else throw std::invalid_argument("config: penalty must be log or none");
    } else if (key == "step_mode") {
      const std::string v = lower(value);
      if (v == "aop") config.step_mode = StepMode::Adaptive;
      else if (v == "fixed") config.step_mode = StepMode::Fixed;
      else throw std::invalid_argument("config: step_mode must be aop or fixed");
    } else if (key == "rho_mode") {
      const std::string v = lower(value);
      if (v == "aop") config.rho_mode = RhoMode::Adaptive;
      else if (v == "fixed") config.rho_mode = RhoMode::Fixed;
      else throw std::invalid_argument("config: rho_mode must be aop or fixed");
    }
    else if (key == "mu") config.mu = to_double(key, value);
    else if (key == "rho") config.rho = to_double(key, value);
    else if (key == "theta") config.theta = to_double(key, value);
    else if (key == "lambda") config.lambda = to_double(key, value);
    else if (key == "window") config.window = int(to_long(key, value));
    else if (key == "kappa") config.kappa = to_double(key, value);
    else if (key == "eps1") config.eps1 = to_double(key, value);
    else if (key == "eps2") config.eps2 = to_double(key, value);
    else if (key == "delta_reg") config.delta_reg = to_double(key, value);
    else if (key == "noise") {
      const std::string v = lower(value);
      if (v == "gaussian") config.noise = NoiseKind::Gaussian;
      else if (v == "alpha-stable") config.noise = NoiseKind::AlphaStable;
      else
        throw std::invalid_argument(
            "config: noise must be gaussian or alpha-stable");
    }
    else if (key == "alpha") config.alpha = to_double(key, value);
    else if (key == "gamma") config.gamma = to_double(key, value);
    else if (key == "sigma2") config.sigma2 = to_double(key, value);
    else if (key == "input_pole") config.input_pole = to_double(key, value);
    else if (key == "system_kind")
      config.system_kind = to_system_kind(key, value);
    else if (key == "system_chi") config.system_chi = to_double(key, value);
    else if (key == "system_file") config.system_file = value;
    else if (key == "active_taps") config.active_taps = int(to_long(key, value));
    else if (key == "switch_kind")
      config.switch_kind = to_system_kind(key, value);
    else if (key == "switch_chi") config.switch_chi = to_double(key, value);
    else if (key == "switch_file") config.switch_file = value;
    else if (key == "switch_at") config.switch_at = to_long(key, value);
    else if (key == "seed") config.seed = std::uint64_t(to_long(key, value));
    else if (key == "nmsd_stride") config.nmsd_stride = int(to_long(key, value));
    else if (key == "bank_length") config.bank_length = int(to_long(key, value));
    else if (key == "bank_atten_db")
      config.bank_atten_db = to_double(key, value);
    else if (key == "prototype_file") config.prototype_file = value;
    else if (key == "fullband_error")
      config.fullband_error = to_bool(key, value);
    else if (key == "threads") config.threads = int(to_long(key, value));
    else
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown key: " + key);
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  return parse_config(in);
}

}  // namespace saf
