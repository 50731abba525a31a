// Multiband adaptive filter state and the two-step sparsity-aware robust
// update: a robustness-gated normalized coarse step followed by a
// zero-attraction step along the projected penalty gradient.
#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "saf/types.hpp"

namespace saf {

/// Maps a subband error to a scaling factor in [0, 1] gating that band's
/// update. Implementations may keep per-band state; observe() must be called
/// exactly once per band per decimated iteration, before scaling().
template <typename Scalar>
class RobustCriterion {
 public:
  virtual ~RobustCriterion() = default;
  virtual void observe(Index band, Scalar error) = 0;
  virtual Scalar scaling(Index band, Scalar error) const = 0;
};

/// Constant scaling factor 1: the least-squares cost, suited to Gaussian
/// noise. Turns the robust update into its non-robust counterpart.
template <typename Scalar>
class LeastSquaresCriterion final : public RobustCriterion<Scalar> {
 public:
  void observe(Index, Scalar) override {}
  Scalar scaling(Index, Scalar) const override { return Scalar(1); }
};

/// Modified Huber criterion: passes errors below a per-band threshold
/// unchanged (factor 1) and freezes the update above it (factor 0). The
/// threshold tracks 2.576 times a median-based robust estimate of the error
/// standard deviation, so impulsive samples do not inflate it.
template <typename Scalar>
class MhCriterion final : public RobustCriterion<Scalar> {
 public:
  explicit MhCriterion(Index bands, Scalar forgetting = Scalar(0.99),
                       int window = 20)
      : forgetting_(forgetting),
        window_(window),
        correction_(correction_factor(window)),
        variance_(VectorX<Scalar>::Zero(bands)),
        seen_(bands, 0),
        history_(bands) {
    if (window < 2) throw std::invalid_argument("MhCriterion: window >= 2");
    for (auto& h : history_) h.reserve(window);
  }

  /// c_sigma = 1.483 (1 + 5/(N_w - 1)).
  static Scalar correction_factor(int window) {
    return Scalar(1.483) * (Scalar(1) + Scalar(5) / Scalar(window - 1));
  }

  void observe(Index band, Scalar error) override {
    auto& h = history_[band];
    if (Index(h.size()) < window_)
      h.push_back(error * error);
    else
      h[seen_[band] % window_] = error * error;
    // forgetting factor is 0 on the very first update
    const Scalar lam = seen_[band] == 0 ? Scalar(0) : forgetting_;
    variance_(band) = lam * variance_(band) +
                      correction_ * (Scalar(1) - lam) * median(h);
    ++seen_[band];
  }

  Scalar scaling(Index band, Scalar error) const override {
    const Scalar xi = threshold(band);
    if (xi == Scalar(0)) return error == Scalar(0) ? Scalar(1) : Scalar(0);
    return std::abs(error) < xi ? Scalar(1) : Scalar(0);
  }

  Scalar threshold(Index band) const {
    return Scalar(2.576) * std::sqrt(variance_(band));
  }
  Scalar error_variance(Index band) const { return variance_(band); }

 private:
  Scalar median(const std::vector<Scalar>& values) const {
    scratch_ = values;
    const auto mid = scratch_.begin() + scratch_.size() / 2;
    std::nth_element(scratch_.begin(), mid, scratch_.end());
    if (scratch_.size() % 2 == 1) return *mid;
    const Scalar upper = *mid;
    return (upper + *std::max_element(scratch_.begin(), mid)) / Scalar(2);
  }

  Scalar forgetting_;
  Index window_;
  Scalar correction_;
  VectorX<Scalar> variance_;          // sigma^2 per band
  std::vector<long> seen_;            // updates observed per band
  std::vector<std::vector<Scalar>> history_;  // squared-error windows
  mutable std::vector<Scalar> scratch_;
};

/// Elementwise gradient of a sparsity penalty, evaluated at the intermediate
/// estimate. Implementations must return finite values for finite inputs.
template <typename Scalar>
class SparsityPenalty {
 public:
  virtual ~SparsityPenalty() = default;
  virtual void gradient(const VectorX<Scalar>& psi,
                        VectorX<Scalar>& grad) const = 0;
  /// True when the gradient is identically zero (disables zero attraction).
  virtual bool vanishes() const { return false; }
};

/// Zero penalty: no sparsity awareness, gradient identically 0.
template <typename Scalar>
class NullPenalty final : public SparsityPenalty<Scalar> {
 public:
  void gradient(const VectorX<Scalar>& psi,
                VectorX<Scalar>& grad) const override {
    grad.setZero(psi.size());
  }
  bool vanishes() const override { return true; }
};

/// Log penalty sum_m ln(1 + |psi_m|/theta): gradient sgn(psi_m)/(theta+|psi_m|)
/// shrinks inactive entries strongly and active ones weakly. The shrinkage
/// factor theta separates the two regimes; |gradient| <= 1/theta everywhere.
template <typename Scalar>
class LogPenalty final : public SparsityPenalty<Scalar> {
 public:
  explicit LogPenalty(Scalar theta) : theta_(theta) {
    if (!(theta > Scalar(0)))
      throw std::invalid_argument("LogPenalty: theta must be > 0");
  }

  void gradient(const VectorX<Scalar>& psi,
                VectorX<Scalar>& grad) const override {
    grad = (psi.array().sign() / (theta_ + psi.array().abs())).matrix();
  }

  Scalar theta() const { return theta_; }

 private:
  Scalar theta_;
};

/// e_i = d_i - u_i^T w for every band (columns of `regressors`).
template <typename DerivedU, typename DerivedW, typename DerivedD>
VectorX<typename DerivedU::Scalar> subband_errors(
    const Eigen::MatrixBase<DerivedU>& regressors,
    const Eigen::MatrixBase<DerivedW>& weights,
    const Eigen::MatrixBase<DerivedD>& desired) {
  return desired - regressors.transpose() * weights;
}

/// Coarse (robust NSAF) step:
///   psi = w + sum_i mu_i phi_i e_i u_i / (||u_i||^2 + delta).
template <typename DerivedW, typename DerivedU, typename DerivedE,
          typename DerivedP, typename DerivedM>
VectorX<typename DerivedU::Scalar> coarse_update(
    const Eigen::MatrixBase<DerivedW>& weights,
    const Eigen::MatrixBase<DerivedU>& regressors,
    const Eigen::MatrixBase<DerivedE>& errors,
    const Eigen::MatrixBase<DerivedP>& scalings,
    const Eigen::MatrixBase<DerivedM>& step_sizes,
    typename DerivedU::Scalar delta_reg) {
  using Scalar = typename DerivedU::Scalar;
  const VectorX<Scalar> norms =
      (regressors.colwise().squaredNorm().transpose().array() + delta_reg)
          .matrix();
  const VectorX<Scalar> gains = step_sizes.cwiseProduct(scalings)
                                    .cwiseProduct(errors)
                                    .cwiseQuotient(norms);
  return weights + regressors * gains;
}

/// Projected penalty direction, O(M) per band via the scalar inner products
/// s_i = u_i^T g first:
///   P = g - sum_i u_i s_i / (||u_i||^2 + delta),  g = f'(psi).
template <typename DerivedU, typename DerivedG>
VectorX<typename DerivedU::Scalar> penalty_direction(
    const Eigen::MatrixBase<DerivedU>& regressors,
    const Eigen::MatrixBase<DerivedG>& gradient,
    typename DerivedU::Scalar delta_reg) {
  using Scalar = typename DerivedU::Scalar;
  const VectorX<Scalar> norms =
      (regressors.colwise().squaredNorm().transpose().array() + delta_reg)
          .matrix();
  const VectorX<Scalar> projections =
      (regressors.transpose() * gradient).cwiseQuotient(norms);
  return gradient - regressors * projections;
}

/// Zero-attraction step: w(k+1) = psi(k) - rho P(k).
template <typename DerivedPsi, typename DerivedP>
VectorX<typename DerivedPsi::Scalar> zero_attract_update(
    const Eigen::MatrixBase<DerivedPsi>& psi,
    const Eigen::MatrixBase<DerivedP>& direction,
    typename DerivedPsi::Scalar rho) {
  return psi - rho * direction;
}

/// Fullband weight vector, intermediate estimate and per-band regressor
/// buffers of the multiband filter. Strictly sequential per instance.
template <typename Scalar>
class SafState {
 public:
  SafState(Index taps, Index bands, Scalar delta_reg = Scalar(1e-8))
      : delta_reg_(delta_reg),
        weights_(VectorX<Scalar>::Zero(taps)),
        psi_(VectorX<Scalar>::Zero(taps)),
        history_(MatrixX<Scalar>::Zero(taps, bands)),
        regressors_(MatrixX<Scalar>::Zero(taps, bands)) {}

  /// Appends one full-rate tick of band-filtered input samples (entry i is
  /// u_i(n)). Buffers advance by one sample; call refresh_regressors() after
  /// N ticks to materialize u_i(k).
  void push_band_samples(const VectorX<Scalar>& samples) {
    head_ = (head_ + 1) % history_.rows();
    history_.row(head_) = samples.transpose();
  }

  /// Materializes u_i(k) = [u_i(kN), u_i(kN-1), ..., u_i(kN-M+1)] into
  /// column i of regressors().
  void refresh_regressors() {
    const Index taps = history_.rows();
    const Index front = head_ + 1;
    regressors_.topRows(front) =
        history_.topRows(front).colwise().reverse();
    regressors_.bottomRows(taps - front) =
        history_.bottomRows(taps - front).colwise().reverse();
  }

  Index taps() const { return weights_.size(); }
  Index bands() const { return history_.cols(); }
  Scalar delta_reg() const { return delta_reg_; }
  long iteration() const { return iteration_; }

  const MatrixX<Scalar>& regressors() const { return regressors_; }
  const VectorX<Scalar>& weights() const { return weights_; }
  const VectorX<Scalar>& psi() const { return psi_; }

  void set_psi(VectorX<Scalar> psi) {
    if (!psi.allFinite())
      throw DivergenceError(iteration_,
                            "non-finite intermediate estimate at decimated "
                            "iteration " +
                                std::to_string(iteration_));
    psi_ = std::move(psi);
  }

  /// Installs w(k+1) and advances the iteration counter; throws
  /// DivergenceError when the new weights are not all finite.
  void commit_weights(VectorX<Scalar> next) {
    if (!next.allFinite())
      throw DivergenceError(iteration_,
                            "non-finite weights at decimated iteration " +
                                std::to_string(iteration_));
    weights_ = std::move(next);
    ++iteration_;
  }

 private:
  Scalar delta_reg_;
  VectorX<Scalar> weights_;
  VectorX<Scalar> psi_;
  MatrixX<Scalar> history_;     // ring of band samples, row head_ = newest
  MatrixX<Scalar> regressors_;  // M x N, column i = u_i(k)
  Index head_ = -1;
  long iteration_ = 0;
};

}  // namespace saf
