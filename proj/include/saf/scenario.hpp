// Experiment world: correlated AR(1) input, Gaussian / symmetric alpha-stable
// additive noise, and synthetic unknown systems with controlled sparseness.
#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "saf/types.hpp"

namespace saf {

enum class SystemKind { Sparse, Dispersive };

inline const char* to_string(SystemKind kind) {
  return kind == SystemKind::Sparse ? "sparse" : "dispersive";
}

/// Unknown system to identify: an impulse response and its family.
template <typename Scalar>
struct SystemModel {
  VectorX<Scalar> response;
  SystemKind kind = SystemKind::Sparse;
};

/// Sparseness measure
///   chi(w) = M/(M - sqrt(M)) (1 - ||w||_1 / (sqrt(M) ||w||_2)),
/// 1 for a single active tap, 0 for a uniform response. Undefined (throws)
/// for the zero vector.
template <typename Derived>
typename Derived::Scalar sparseness(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm2 = w.norm();
  if (norm2 == Scalar(0))
    throw std::invalid_argument("sparseness: undefined for the zero vector");
  const Scalar m = Scalar(w.size());
  const Scalar root = std::sqrt(m);
  return m / (m - root) * (Scalar(1) - w.template lpNorm<1>() / (root * norm2));
}

/// First-order autoregressive input u(n) = pole u(n-1) + g(n) with unit
/// variance white Gaussian driving noise and u(-1) = 0.
template <typename Scalar>
class Ar1Generator {
 public:
  Ar1Generator(Scalar pole, std::uint64_t seed) : pole_(pole), rng_(seed) {
    if (!(std::abs(pole) < Scalar(1)))
      throw std::invalid_argument("Ar1Generator: |pole| must be < 1");
  }

  Scalar next() {
    previous_ = pole_ * previous_ + Scalar(normal_(rng_));
    return previous_;
  }

  VectorX<Scalar> generate(Index count) {
    VectorX<Scalar> out(count);
    for (Index n = 0; n < count; ++n) out(n) = next();
    return out;
  }

 private:
  Scalar pole_;
  Scalar previous_ = 0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Symmetric alpha-stable sampler with characteristic function
/// exp(-gamma |t|^alpha), via the Chambers-Mallows-Stuck transform scaled by
/// gamma^(1/alpha). alpha = 2 coincides with a Gaussian of variance 2 gamma;
/// alpha = 1 is Cauchy with scale gamma.
template <typename Scalar>
class AlphaStableSampler {
 public:
  AlphaStableSampler(Scalar alpha, Scalar gamma, std::uint64_t seed)
      : alpha_(alpha), scale_(std::pow(gamma, Scalar(1) / alpha)), rng_(seed) {
    if (!(alpha > Scalar(0) && alpha <= Scalar(2)))
      throw std::invalid_argument("AlphaStableSampler: alpha in (0, 2]");
    if (!(gamma > Scalar(0)))
      throw std::invalid_argument("AlphaStableSampler: gamma > 0");
  }

  Scalar next() {
    const Scalar angle =
        Scalar(EIGEN_PI) * (Scalar(uniform_(rng_)) - Scalar(0.5));
    const Scalar expo = std::max(
        -std::log(Scalar(1) - Scalar(uniform_(rng_))),
        std::numeric_limits<Scalar>::min());
    Scalar standard;
    if (alpha_ == Scalar(1)) {
      standard = std::tan(angle);
    } else {
      standard = std::sin(alpha_ * angle) /
                     std::pow(std::cos(angle), Scalar(1) / alpha_) *
                 std::pow(std::cos(angle - alpha_ * angle) / expo,
                          (Scalar(1) - alpha_) / alpha_);
    }
    return scale_ * standard;
  }

  VectorX<Scalar> generate(Index count) {
    VectorX<Scalar> out(count);
    for (Index n = 0; n < count; ++n) out(n) = next();
    return out;
  }

 private:
  Scalar alpha_;
  Scalar scale_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Zero-mean Gaussian noise of the given variance (variance 0 is allowed and
/// yields a silent stream).
template <typename Scalar>
class GaussianSampler {
 public:
  GaussianSampler(Scalar variance, std::uint64_t seed)
      : sigma_(std::sqrt(variance)), rng_(seed) {
    if (!(variance >= Scalar(0)))
      throw std::invalid_argument("GaussianSampler: variance >= 0");
  }

  Scalar next() { return sigma_ * Scalar(normal_(rng_)); }

  VectorX<Scalar> generate(Index count) {
    VectorX<Scalar> out(count);
    for (Index n = 0; n < count; ++n) out(n) = next();
    return out;
  }

 private:
  Scalar sigma_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

namespace detail {

// Bisection on the decay exponent of a magnitude profile: steeper decay
// means higher sparseness, so chi(decay) is monotone.
template <typename Scalar, typename Make>
VectorX<Scalar> tune_sparseness(Make make, Scalar target, Scalar tolerance,
                                int budget) {
  Scalar lo = 0, hi = 60;
  VectorX<Scalar> w;
  for (int it = 0; it < budget; ++it) {
    const Scalar mid = (lo + hi) / 2;
    w = make(mid);
    const Scalar chi = sparseness(w);
    if (std::abs(chi - target) <= tolerance / 4) return w;
    (chi < target ? lo : hi) = mid;
  }
  w = make((lo + hi) / 2);
  if (std::abs(sparseness(w) - target) > tolerance) {
    std::ostringstream msg;
    msg << "synth_system: could not reach sparseness " << target
        << " (closest " << sparseness(w) << ")";
    throw SynthesisError(msg.str());
  }
  return w;
}

}  // namespace detail

/// Synthesizes a unit-norm system with sparseness within 0.02 of the target.
/// Sparse kind: `active_taps` taps at random positions with exponentially
/// decaying magnitudes and random signs. Dispersive kind: dense Gaussian
/// response under an exponential decay envelope. The decay rate is tuned by
/// bisection; an unreachable target throws SynthesisError.
template <typename Scalar>
SystemModel<Scalar> synth_system(Index taps, SystemKind kind, Scalar target_chi,
                                 std::mt19937_64& rng, Index active_taps = 16) {
  if (!(target_chi >= Scalar(0) && target_chi < Scalar(1)))
    throw std::invalid_argument("synth_system: target_chi in [0, 1)");
  if (taps < 2) throw std::invalid_argument("synth_system: taps >= 2");
  const Scalar tolerance = Scalar(0.02);

  SystemModel<Scalar> model;
  model.kind = kind;
  if (kind == SystemKind::Sparse) {
    if (active_taps < 1 || active_taps > taps)
      throw std::invalid_argument("synth_system: active_taps in [1, taps]");
    // sample distinct positions and signs once; only the decay is tuned
    std::vector<Index> positions(taps);
    std::iota(positions.begin(), positions.end(), Index(0));
    for (Index j = 0; j < active_taps; ++j) {
      std::uniform_int_distribution<Index> pick(j, taps - 1);
      std::swap(positions[j], positions[pick(rng)]);
    }
    VectorX<Scalar> signs(active_taps);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (Index j = 0; j < active_taps; ++j)
      signs(j) = coin(rng) < 0.5 ? Scalar(-1) : Scalar(1);

    auto make = [&](Scalar decay) {
      VectorX<Scalar> w = VectorX<Scalar>::Zero(taps);
      for (Index j = 0; j < active_taps; ++j)
        w(positions[j]) =
            signs(j) * std::exp(-decay * Scalar(j) / Scalar(active_taps));
      w /= w.norm();
      return w;
    };
    if (active_taps == 1) {
      model.response = make(Scalar(0));
      if (std::abs(sparseness(model.response) - target_chi) > tolerance)
        throw SynthesisError("synth_system: single active tap pins chi at 1");
      return model;
    }
    model.response = detail::tune_sparseness<Scalar>(make, target_chi,
                                                     tolerance, 200);
  } else {
    VectorX<Scalar> dense(taps);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index m = 0; m < taps; ++m) dense(m) = Scalar(normal(rng));
    auto make = [&](Scalar decay) {
      VectorX<Scalar> w =
          (dense.array() *
           (-decay / Scalar(taps) *
            VectorX<Scalar>::LinSpaced(taps, 0, Scalar(taps - 1)).array())
               .exp())
              .matrix();
      w /= w.norm();
      return w;
    };
    model.response = detail::tune_sparseness<Scalar>(make, target_chi,
                                                     tolerance, 200);
  }
  return model;
}

/// d = u^T w_o + nu; the regressor length must match the system.
template <typename DerivedU, typename DerivedW>
typename DerivedU::Scalar desired(const Eigen::MatrixBase<DerivedU>& regressor,
                                  const Eigen::MatrixBase<DerivedW>& system,
                                  typename DerivedU::Scalar noise) {
  if (regressor.size() != system.size())
    throw std::invalid_argument("desired: regressor/system length mismatch");
  return regressor.dot(system) + noise;
}

template <typename Scalar>
void save_system(const SystemModel<Scalar>& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_system: cannot open " + path);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", double(sparseness(model.response)));
  out << "# system M=" << model.response.size() << " chi=" << buf << "\n";
  for (Index m = 0; m < model.response.size(); ++m) {
    std::snprintf(buf, sizeof(buf), "%.20f", double(model.response(m)));
    out << buf << "\n";
  }
}

template <typename Scalar>
SystemModel<Scalar> load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_system: cannot open " + path);
  std::string header;
  std::getline(in, header);
  Index taps = 0;
  double chi = 0;
  if (std::sscanf(header.c_str(), "# system M=%td chi=%lf", &taps, &chi) != 2)
    throw std::runtime_error("load_system: bad header in " + path);
  SystemModel<Scalar> model;
  model.response.resize(taps);
  for (Index m = 0; m < taps; ++m) {
    double value;
    if (!(in >> value))
      throw std::runtime_error("load_system: truncated file " + path);
    model.response(m) = Scalar(value);
  }
  model.kind = sparseness(model.response) > Scalar(0.5) ? SystemKind::Sparse
                                                        : SystemKind::Dispersive;
  return model;
}

}  // namespace saf
