#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "saf/scenario.hpp"

using namespace saf;

TEST_CASE("sparseness: canonical values and scale invariance") {
  VectorX<double> single = VectorX<double>::Zero(64);
  single(17) = -2.5;
  CHECK(sparseness(single) == doctest::Approx(1.0).epsilon(1e-12));

  const VectorX<double> uniform = VectorX<double>::Constant(50, 0.3);
  CHECK(std::abs(sparseness(uniform)) < 1e-12);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  VectorX<double> w(32);
  for (Index m = 0; m < 32; ++m) w(m) = normal(rng);
  const VectorX<double> scaled = -7.3 * w;
  CHECK(sparseness(w) == doctest::Approx(sparseness(scaled)).epsilon(1e-12));

  CHECK_THROWS_AS(sparseness(VectorX<double>::Zero(8)),
                  std::invalid_argument);
}

TEST_CASE("sparseness lies in [0, 1] for random nonzero vectors") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> size(2, 100);
  for (int trial = 0; trial < 200; ++trial) {
    VectorX<double> w(size(rng));
    for (Index m = 0; m < w.size(); ++m) w(m) = normal(rng);
    const double chi = sparseness(w);
    CHECK(chi >= -1e-12);
    CHECK(chi <= 1.0 + 1e-12);
  }
}

TEST_CASE("AR(1): white case and stationary statistics at pole 0.9") {
  CHECK_THROWS_AS(Ar1Generator<double>(1.0, 1), std::invalid_argument);

  Ar1Generator<double> white(0.0, 42);
  const VectorX<double> w = white.generate(200000);
  const double wmean = w.mean();
  const double wvar = (w.array() - wmean).square().mean();
  CHECK(wvar == doctest::Approx(1.0).epsilon(0.02));

  Ar1Generator<double> correlated(0.9, 43);
  const VectorX<double> u = correlated.generate(1000000);
  const double mean = u.mean();
  const double var = (u.array() - mean).square().mean();
  CHECK(var == doctest::Approx(1.0 / (1.0 - 0.81)).epsilon(0.05));

  double lag1 = 0;
  for (Index n = 1; n < u.size(); ++n)
    lag1 += (u(n) - mean) * (u(n - 1) - mean);
  lag1 /= double(u.size() - 1) * var;
  CHECK(lag1 == doctest::Approx(0.9).epsilon(0.0222));  // +-0.02 absolute
}

TEST_CASE("alpha-stable: Gaussian edge case has variance 2*gamma") {
  AlphaStableSampler<double> gaussian(2.0, 0.02, 7);
  const VectorX<double> x = gaussian.generate(1000000);
  const double var = (x.array() - x.mean()).square().mean();
  CHECK(var == doctest::Approx(0.04).epsilon(0.05));
}

TEST_CASE("alpha-stable: Cauchy case has median |X| = gamma") {
  const double gamma = 0.02;
  AlphaStableSampler<double> cauchy(1.0, gamma, 8);
  VectorX<double> x = cauchy.generate(1000000);
  std::vector<double> magnitude(x.size());
  for (Index n = 0; n < x.size(); ++n) magnitude[size_t(n)] = std::abs(x(n));
  auto mid = magnitude.begin() + magnitude.size() / 2;
  std::nth_element(magnitude.begin(), mid, magnitude.end());
  CHECK(*mid == doctest::Approx(gamma).epsilon(0.05));
}

TEST_CASE("alpha-stable: scale family on matched seeds") {
  const double alpha = 1.6, gamma = 0.02;
  AlphaStableSampler<double> base(alpha, gamma, 99);
  AlphaStableSampler<double> wide(alpha, std::pow(2.0, alpha) * gamma, 99);
  for (int n = 0; n < 10000; ++n) {
    const double a = base.next();
    const double b = wide.next();
    CHECK(b == doctest::Approx(2.0 * a).epsilon(1e-12));
  }
}

TEST_CASE("alpha-stable: parameter validation") {
  CHECK_THROWS_AS(AlphaStableSampler<double>(0.0, 0.02, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(AlphaStableSampler<double>(2.5, 0.02, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(AlphaStableSampler<double>(1.6, 0.0, 1),
                  std::invalid_argument);
}

TEST_CASE("generators are deterministic given a seed") {
  Ar1Generator<double> a(0.9, 123), b(0.9, 123);
  CHECK((a.generate(5000) - b.generate(5000)).norm() == 0.0);

  AlphaStableSampler<double> c(1.6, 0.02, 123), d(1.6, 0.02, 123);
  CHECK((c.generate(5000) - d.generate(5000)).norm() == 0.0);

  GaussianSampler<double> e(0.04, 123), f(0.04, 123);
  CHECK((e.generate(5000) - f.generate(5000)).norm() == 0.0);

  // distinct derived streams decouple input and noise
  CHECK(mix_seed(123, 1) != mix_seed(123, 2));
}

TEST_CASE("synth_system: paper sparseness targets") {
  std::mt19937_64 rng(11);
  const SystemModel<double> sparse =
      synth_system<double>(512, SystemKind::Sparse, 0.9357, rng);
  CHECK(sparse.response.size() == 512);
  CHECK(sparseness(sparse.response) == doctest::Approx(0.9357).epsilon(0.022));
  CHECK(sparse.response.norm() == doctest::Approx(1.0));

  const SystemModel<double> dispersive =
      synth_system<double>(512, SystemKind::Dispersive, 0.3663, rng);
  CHECK(sparseness(dispersive.response) ==
        doctest::Approx(0.3663).epsilon(0.06));
  // tolerance contract: |chi - target| <= 0.02
  CHECK(std::abs(sparseness(dispersive.response) - 0.3663) <= 0.02);
  CHECK(std::abs(sparseness(sparse.response) - 0.9357) <= 0.02);
}

TEST_CASE("synth_system: single active tap pins sparseness at 1") {
  std::mt19937_64 rng(12);
  const SystemModel<double> one =
      synth_system<double>(64, SystemKind::Sparse, 0.99, rng, 1);
  CHECK((one.response.array() != 0.0).count() == 1);
  CHECK(sparseness(one.response) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("synth_system: unreachable target fails loudly") {
  std::mt19937_64 rng(13);
  CHECK_THROWS_AS(
      synth_system<double>(512, SystemKind::Sparse, 0.05, rng, 16),
      SynthesisError);
  CHECK_THROWS_AS(synth_system<double>(512, SystemKind::Sparse, 1.5, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(synth_system<double>(512, SystemKind::Sparse, 0.9, rng, 0),
                  std::invalid_argument);
}

TEST_CASE("desired: trivial and hand-computed cases") {
  VectorX<double> regressor(4);
  regressor << 1.0, 2.0, 3.0, 4.0;
  VectorX<double> system(4);
  system << 0.5, -1.0, 0.25, 2.0;
  CHECK(desired(regressor, system, 0.3) == doctest::Approx(7.55).epsilon(1e-15));

  const VectorX<double> zero = VectorX<double>::Zero(4);
  CHECK(desired(regressor, zero, 0.0) == 0.0);
  CHECK(desired(regressor, zero, -1.25) == -1.25);

  CHECK_THROWS_AS(desired(VectorX<double>::Ones(3), system, 0.0),
                  std::invalid_argument);
}

TEST_CASE("system file round trip") {
  std::mt19937_64 rng(14);
  const SystemModel<double> model =
      synth_system<double>(128, SystemKind::Sparse, 0.9, rng, 8);
  const std::string path = "system_roundtrip.txt";
  save_system(model, path);
  const SystemModel<double> loaded = load_system<double>(path);
  REQUIRE(loaded.response.size() == 128);
  CHECK((loaded.response - model.response).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.kind == SystemKind::Sparse);
  CHECK_THROWS(load_system<double>("missing_system.txt"));
  std::remove(path.c_str());
}
