// Cosine-modulated (pseudo-QMF) analysis filter banks and streaming subband
// decomposition for the multiband adaptive filter structure.
#pragma once

#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "saf/types.hpp"

namespace saf {

// Frequency-grid sizes: the coarse grid drives the cutoff search, the fine
// grid is used for design validation.
inline constexpr int kDesignGrid = 1024;
inline constexpr int kEvalGrid = 4096;

// A valid design keeps max_w |sum_i |H_i(w)|^2 - 1| below this bound.
inline constexpr double kPowerComplementarityTol = 0.02;

/// Linear-phase lowpass prototype, normalized to unit DC gain.
template <typename Scalar>
struct PrototypeFilter {
  VectorX<Scalar> coefficients;

  Index length() const { return coefficients.size(); }
};

/// Bank of N cosine-modulated analysis filters, one per column.
template <typename Scalar>
struct AnalysisBank {
  Index bands = 0;
  MatrixX<Scalar> filters;  // L x N

  Index length() const { return filters.rows(); }
  Scalar band_center(Index i) const {
    return Scalar(2 * i + 1) * Scalar(EIGEN_PI) / Scalar(2 * bands);
  }
};

/// |H(w)| of an FIR filter on a uniform grid of `grid` points over [0, pi].
template <typename Derived>
VectorX<typename Derived::Scalar> magnitude_response(
    const Eigen::MatrixBase<Derived>& taps, int grid) {
  using Scalar = typename Derived::Scalar;
  using Complex = std::complex<Scalar>;
  VectorX<Scalar> mag(grid);
  for (int j = 0; j < grid; ++j) {
    const Scalar w = Scalar(EIGEN_PI) * Scalar(j) / Scalar(grid - 1);
    Complex acc(0, 0);
    for (Index n = 0; n < taps.size(); ++n)
      acc += taps(n) * std::polar(Scalar(1), -w * Scalar(n));
    mag(j) = std::abs(acc);
  }
  return mag;
}

template <typename Scalar>
Scalar kaiser_beta(Scalar atten_db) {
  if (atten_db > Scalar(50)) return Scalar(0.1102) * (atten_db - Scalar(8.7));
  if (atten_db >= Scalar(21))
    return Scalar(0.5842) * std::pow(atten_db - Scalar(21), Scalar(0.4)) +
           Scalar(0.07886) * (atten_db - Scalar(21));
  return Scalar(0);
}

/// Kaiser-windowed sinc lowpass with the given cutoff (rad/sample).
template <typename Scalar>
VectorX<Scalar> kaiser_lowpass(Index length, Scalar cutoff, Scalar beta) {
  VectorX<Scalar> h(length);
  const Scalar mid = Scalar(length - 1) / Scalar(2);
  const Scalar i0beta = Scalar(std::cyl_bessel_i(0.0, double(beta)));
  for (Index n = 0; n < length; ++n) {
    const Scalar m = Scalar(n) - mid;
    const Scalar ideal = (std::abs(m) < Scalar(1e-12))
                             ? cutoff / Scalar(EIGEN_PI)
                             : std::sin(cutoff * m) / (Scalar(EIGEN_PI) * m);
    const Scalar t = Scalar(2) * m / Scalar(length - 1);
    const Scalar win =
        Scalar(std::cyl_bessel_i(0.0, double(beta * std::sqrt(std::max(
                                            Scalar(0), 1 - t * t))))) /
        i0beta;
    h(n) = ideal * win;
  }
  return h;
}

/// Modulates a prototype into N analysis filters:
///   h_i(n) = 2 p(n) cos( (pi/N)(i+1/2)(n-(L-1)/2) + (-1)^i pi/4 ).
template <typename Scalar>
AnalysisBank<Scalar> modulate(const PrototypeFilter<Scalar>& prototype,
                              Index bands) {
  if (bands < 1) throw std::invalid_argument("modulate: bands must be >= 1");
  const Index length = prototype.length();
  AnalysisBank<Scalar> bank;
  bank.bands = bands;
  bank.filters.resize(length, bands);
  const Scalar mid = Scalar(length - 1) / Scalar(2);
  for (Index i = 0; i < bands; ++i) {
    const Scalar sign = (i % 2 == 0) ? Scalar(1) : Scalar(-1);
    for (Index n = 0; n < length; ++n) {
      const Scalar phase =
          Scalar(EIGEN_PI) / Scalar(bands) * (Scalar(i) + Scalar(0.5)) *
              (Scalar(n) - mid) +
          sign * Scalar(EIGEN_PI) / Scalar(4);
      bank.filters(n, i) = Scalar(2) * prototype.coefficients(n) *
                           std::cos(phase);
    }
  }
  return bank;
}

/// max_w |sum_i |H_i(w)|^2 - 1| over a `grid`-point frequency grid.
template <typename Scalar>
Scalar power_complementarity_error(const AnalysisBank<Scalar>& bank,
                                   int grid = kEvalGrid) {
  VectorX<Scalar> total = VectorX<Scalar>::Zero(grid);
  for (Index i = 0; i < bank.bands; ++i)
    total += magnitude_response(bank.filters.col(i), grid)
                 .array()
                 .square()
                 .matrix();
  return (total.array() - Scalar(1)).abs().maxCoeff();
}

/// Minimum over bands of the passband-peak-to-stopband-peak ratio in dB.
///
/// The stopband of band i is where non-adjacent bands live: frequencies at
/// least 3pi/(2N) away from both the band center and its negative image.
/// Adjacent bands overlap by construction in this bank family, so the region
/// between them is transition, not stopband.
template <typename Scalar>
Scalar stopband_attenuation_db(const AnalysisBank<Scalar>& bank,
                               int grid = kEvalGrid) {
  const Scalar margin =
      Scalar(3) * Scalar(EIGEN_PI) / (Scalar(2) * Scalar(bank.bands));
  Scalar worst = std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < bank.bands; ++i) {
    const VectorX<Scalar> mag = magnitude_response(bank.filters.col(i), grid);
    const Scalar peak = mag.maxCoeff();
    const Scalar center = bank.band_center(i);
    Scalar stop_peak = Scalar(0);
    bool any = false;
    for (int j = 0; j < grid; ++j) {
      const Scalar w = Scalar(EIGEN_PI) * Scalar(j) / Scalar(grid - 1);
      if (std::abs(w - center) >= margin && std::abs(w + center) >= margin) {
        stop_peak = std::max(stop_peak, mag(j));
        any = true;
      }
    }
    if (!any) continue;  // single band: no stopband region
    worst = std::min(worst,
                     Scalar(20) * std::log10(peak / std::max(
                                      stop_peak,
                                      std::numeric_limits<Scalar>::min())));
  }
  return worst;
}

/// Designs a unit-DC-gain Kaiser prototype whose modulated bank meets the
/// attenuation target. The Kaiser beta follows from the target; the cutoff
/// is found by a golden-section search minimizing the power-complementarity
/// error. Throws DesignError when the length is too short for the target.
template <typename Scalar>
PrototypeFilter<Scalar> design_prototype(Index bands, Index length,
                                         Scalar atten_db) {
  if (bands < 1) throw std::invalid_argument("design_prototype: bands >= 1");
  if (length < 2 * bands)
    throw std::invalid_argument("design_prototype: length must be >= 2N");
  if (!(atten_db > Scalar(0)))
    throw std::invalid_argument("design_prototype: attenuation must be > 0");

  const Scalar beta = kaiser_beta(atten_db);
  const Scalar nominal = Scalar(EIGEN_PI) / (Scalar(2) * Scalar(bands));

  auto build = [&](Scalar cutoff) {
    PrototypeFilter<Scalar> p;
    p.coefficients = kaiser_lowpass<Scalar>(length, cutoff, beta);
    p.coefficients /= p.coefficients.sum();
    return p;
  };
  auto objective = [&](Scalar cutoff) {
    return power_complementarity_error(modulate(build(cutoff), bands),
                                       kDesignGrid);
  };

  Scalar lo = Scalar(0.5) * nominal;
  Scalar hi = Scalar(2.2) * nominal;
  const Scalar invphi = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar c = hi - invphi * (hi - lo);
  Scalar d = lo + invphi * (hi - lo);
  Scalar fc = objective(c);
  Scalar fd = objective(d);
  for (int it = 0; it < 60; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - invphi * (hi - lo);
      fc = objective(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + invphi * (hi - lo);
      fd = objective(d);
    }
  }

  PrototypeFilter<Scalar> prototype = build((lo + hi) / Scalar(2));
  const Scalar achieved =
      stopband_attenuation_db(modulate(prototype, bands), kEvalGrid);
  if (achieved < atten_db) {
    std::ostringstream msg;
    msg << "design_prototype: N=" << bands << " L=" << length << " reaches "
        << achieved << " dB stopband attenuation, below the " << atten_db
        << " dB target; increase the prototype length";
    throw DesignError(msg.str());
  }
  return prototype;
}

/// Batch analysis: column i of the result is h_i * x (zero initial state),
/// truncated to the input length.
template <typename Scalar>
MatrixX<Scalar> analyze(const AnalysisBank<Scalar>& bank,
                        const VectorX<Scalar>& x) {
  const Index count = x.size();
  const Index length = bank.length();
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(count, bank.bands);
  for (Index i = 0; i < bank.bands; ++i)
    for (Index n = 0; n < count; ++n) {
      Scalar acc = 0;
      const Index taps = std::min(length, n + 1);
      for (Index m = 0; m < taps; ++m) acc += bank.filters(m, i) * x(n - m);
      out(n, i) = acc;
    }
  return out;
}

/// Every `factor`-th sample of a full-rate stream: y(k) = x(k*factor).
template <typename Scalar>
VectorX<Scalar> decimate(const VectorX<Scalar>& x, Index factor) {
  const Index count = (x.size() + factor - 1) / factor;
  VectorX<Scalar> y(count);
  for (Index k = 0; k < count; ++k) y(k) = x(k * factor);
  return y;
}

/// Streaming analysis with an internal delay line (cold start: all zeros).
/// One instance per stream; instances share no state.
template <typename Scalar>
class SubbandAnalyzer {
 public:
  explicit SubbandAnalyzer(const AnalysisBank<Scalar>& bank)
      : filters_(bank.filters),
        line_(VectorX<Scalar>::Zero(bank.length())),
        out_(bank.bands) {}

  /// Consumes one full-rate sample; band outputs are available via outputs()
  /// after compute_outputs().
  void push(Scalar x) {
    const Index length = line_.size();
    for (Index m = length - 1; m > 0; --m) line_(m) = line_(m - 1);
    line_(0) = x;
  }

  /// y_i(n) = sum_m h_i(m) x(n-m) for the current delay line.
  const VectorX<Scalar>& compute_outputs() {
    out_.noalias() = filters_.transpose() * line_;
    return out_;
  }

  const VectorX<Scalar>& outputs() const { return out_; }
  Index bands() const { return out_.size(); }

 private:
  MatrixX<Scalar> filters_;  // L x N
  VectorX<Scalar> line_;     // x(n), x(n-1), ..., x(n-L+1)
  VectorX<Scalar> out_;
};

template <typename Scalar>
void save_prototype(const PrototypeFilter<Scalar>& prototype, Index bands,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_prototype: cannot open " + path);
  out << "# prototype N=" << bands << " L=" << prototype.length() << "\n";
  char buf[64];
  for (Index n = 0; n < prototype.length(); ++n) {
    std::snprintf(buf, sizeof(buf), "%.20f", double(prototype.coefficients(n)));
    out << buf << "\n";
  }
}

/// Reads a prototype file; returns the coefficients and the band count the
/// file was designed for.
template <typename Scalar>
PrototypeFilter<Scalar> load_prototype(const std::string& path,
                                       Index* bands_out = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_prototype: cannot open " + path);
  std::string header;
  std::getline(in, header);
  Index bands = 0, length = 0;
  if (std::sscanf(header.c_str(), "# prototype N=%td L=%td", &bands,
                  &length) != 2)
    throw std::runtime_error("load_prototype: bad header in " + path);
  PrototypeFilter<Scalar> p;
  p.coefficients.resize(length);
  for (Index n = 0; n < length; ++n) {
    double value;
    if (!(in >> value))
      throw std::runtime_error("load_prototype: truncated file " + path);
    p.coefficients(n) = Scalar(value);
  }
  if (bands_out) *bands_out = bands;
  return p;
}

}  // namespace saf
