// Alternating optimization of the two free parameters of the sparsity-aware
// robust update: per-band variable step-sizes driven by noise/error power
// estimates, and the penalty weight driven by the deviation quadratic.
#pragma once

#include <algorithm>
#include <cmath>

#include "saf/types.hpp"

namespace saf {

/// Per-band exponential-window estimates powering the variable step-size:
/// error power, input power, input/error cross-correlation and the derived
/// subband noise power. All estimates start at zero.
template <typename Scalar>
struct SubbandStats {
  SubbandStats(Index bands, Index taps, Scalar kappa = Scalar(6),
               Scalar eps1 = Scalar(1e-5), Scalar eps2 = Scalar(1e-5))
      : zeta(Scalar(1) - Scalar(1) / (kappa * Scalar(taps))),
        eps1(eps1),
        eps2(eps2),
        error_power(VectorX<Scalar>::Zero(bands)),
        input_power(VectorX<Scalar>::Zero(bands)),
        noise_power(VectorX<Scalar>::Zero(bands)),
        cross_corr(MatrixX<Scalar>::Zero(taps, bands)) {
    if (!(kappa >= Scalar(1)))
      throw std::invalid_argument("SubbandStats: kappa must be >= 1");
  }

  Scalar zeta;  // window factor, 1 - 1/(kappa M)
  Scalar eps1;
  Scalar eps2;
  VectorX<Scalar> error_power;  // sigma^2_e per band (impulses gated out)
  VectorX<Scalar> input_power;  // sigma^2_u per band
  VectorX<Scalar> noise_power;  // sigma^2_nu per band
  MatrixX<Scalar> cross_corr;   // M x N, column i = r_ue of band i
};

/// sigma^2_e(k) = zeta sigma^2_e(k-1) + (1-zeta) phi^2 e^2.
template <typename Scalar>
Scalar update_error_power(SubbandStats<Scalar>& stats, Index band, Scalar phi,
                          Scalar error) {
  stats.error_power(band) = stats.zeta * stats.error_power(band) +
                            (Scalar(1) - stats.zeta) * phi * phi * error *
                                error;
  return stats.error_power(band);
}

/// Input-power and cross-correlation windows, then the noise-power estimate
///   sigma^2_nu = sigma^2_e - ||r_ue||^2 / (sigma^2_u + eps1).
/// A negative estimate carries the previous value instead of propagating.
/// `newest_input` is u_i(kN), the newest sample of the band's regressor.
template <typename Scalar, typename Derived>
Scalar update_noise_power(SubbandStats<Scalar>& stats, Index band, Scalar phi,
                          Scalar error, Scalar newest_input,
                          const Eigen::MatrixBase<Derived>& regressor) {
  const Scalar one_minus = Scalar(1) - stats.zeta;
  stats.input_power(band) = stats.zeta * stats.input_power(band) +
                            one_minus * newest_input * newest_input;
  stats.cross_corr.col(band) = stats.zeta * stats.cross_corr.col(band) +
                               one_minus * phi * error * regressor;
  const Scalar candidate =
      stats.error_power(band) - stats.cross_corr.col(band).squaredNorm() /
                                    (stats.input_power(band) + stats.eps1);
  if (candidate >= Scalar(0)) stats.noise_power(band) = candidate;
  return stats.noise_power(band);
}

/// mu_i(k) = 1 - sqrt( sigma^2_nu / (sigma^2_e + eps2) ), clamped to [0, 1].
template <typename Scalar>
Scalar step_size(const SubbandStats<Scalar>& stats, Index band) {
  const Scalar raw =
      Scalar(1) - std::sqrt(stats.noise_power(band) /
                            (stats.error_power(band) + stats.eps2));
  return std::clamp(raw, Scalar(0), Scalar(1));
}

/// Current penalty weight; starts (and stays until told otherwise) at zero.
template <typename Scalar>
struct RhoState {
  Scalar value = Scalar(0);
};

/// Shipped estimator of the optimal penalty weight, with the previous
/// estimate standing in for the unknown system:
///   rho = max( (psi - w)^T P / (||P||^2 + eps1), 0 ).
template <typename Scalar>
Scalar rho_opt_estimate(const VectorX<Scalar>& psi, const VectorX<Scalar>& w,
                        const VectorX<Scalar>& direction, Scalar eps1) {
  const Scalar denom = direction.squaredNorm() + eps1;
  return std::max((psi - w).dot(direction) / denom, Scalar(0));
}

/// Exact minimizer of the deviation quadratic when the reference system is
/// known: rho_opt = (psi - w_ref)^T P / ||P||^2, or 0 for a zero direction.
template <typename Scalar>
Scalar rho_opt_oracle(const VectorX<Scalar>& psi, const VectorX<Scalar>& w_ref,
                      const VectorX<Scalar>& direction) {
  const Scalar denom = direction.squaredNorm();
  if (denom == Scalar(0)) return Scalar(0);
  return (psi - w_ref).dot(direction) / denom;
}

/// Deviation change of the zero-attraction step,
///   Delta = -2 rho (psi - w_ref)^T P + rho^2 ||P||^2,
/// so that ||w_ref - w(k+1)||^2 = ||w_ref - psi||^2 + Delta. `psi_dev` is
/// psi - w_ref.
template <typename Scalar>
Scalar delta_of_rho(const VectorX<Scalar>& psi_dev,
                    const VectorX<Scalar>& direction, Scalar rho) {
  return Scalar(-2) * rho * psi_dev.dot(direction) +
         rho * rho * direction.squaredNorm();
}

}  // namespace saf
