#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "twintune/gp.hpp"

using namespace twintune;

namespace {

TrialDataset make_1d_dataset() {
  TrialDataset data;
  const double xs[] = {0.05, 0.25, 0.5, 0.75, 0.95};
  for (double x : xs) {
    VecX v(1);
    v << x;
    data.append(v, std::sin(6.0 * x));
  }
  return data;
}

// Dense closed-form GP conditionals, written independently of gp.cpp.
GpPrediction oracle_posterior(const TrialDataset& data,
                              const KernelHyperparams& hyper,
                              const VecX& query) {
  const int n = data.size();
  MatX K(n, n);
  VecX ks(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      K(i, j) = matern52(data.X.row(i).transpose(), data.X.row(j).transpose(),
                         hyper);
    K(i, i) += hyper.noise;
    ks[i] = matern52(data.X.row(i).transpose(), query, hyper);
  }
  const VecX y = data.standardized_y();
  const MatX Kinv = K.inverse();
  GpPrediction out;
  out.mean = ks.dot(Kinv * y);
  out.variance = hyper.sigma2 - ks.dot(Kinv * ks);
  return out;
}

}  // namespace

TEST_CASE("matern52: exact values and monotone decay") {
  KernelHyperparams hyper;
  hyper.sigma2 = 1.0;
  hyper.lengthscales = VecX::Ones(1);
  VecX a(1), b(1);
  a << 0.3;
  b << 0.3;
  CHECK(matern52(a, a, hyper) == 1.0);

  b << 1.3;  // unit distance
  const double expected = (1.0 + std::sqrt(5.0) + 5.0 / 3.0) *
                          std::exp(-std::sqrt(5.0));
  CHECK(matern52(a, b, hyper) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.52399).epsilon(1e-4));

  double prev = 1.0;
  for (double r = 0.1; r < 6.0; r += 0.1) {
    b << 0.3 + r;
    const double k = matern52(a, b, hyper);
    CHECK(k < prev);
    prev = k;
  }

  hyper.sigma2 = 3.7;
  CHECK(matern52(a, a, hyper) == 3.7);
}

TEST_CASE("gp posterior: near-interpolation and the dense oracle") {
  const TrialDataset data = make_1d_dataset();
  KernelHyperparams hyper;
  hyper.sigma2 = 1.2;
  hyper.lengthscales = VecX::Constant(1, 0.3);

  // Near-interpolation at a training input with tiny noise.
  VecX q0 = data.X.row(2).transpose();
  const GpPrediction at_train = gp_posterior(data, hyper, q0);
  CHECK(std::abs(at_train.mean - data.standardized_y()[2]) < 1e-4);
  CHECK(at_train.variance >= 0.0);
  CHECK(at_train.variance <= hyper.sigma2);

  for (double x : {0.1, 0.37, 0.62, 0.88}) {
    VecX q(1);
    q << x;
    const GpPrediction got = gp_posterior(data, hyper, q);
    const GpPrediction want = oracle_posterior(data, hyper, q);
    CHECK(std::abs(got.mean - want.mean) < 1e-10);
    CHECK(std::abs(got.variance - want.variance) < 1e-10);
  }
}

TEST_CASE("tiny lengthscales revert far queries to the prior") {
  const TrialDataset data = make_1d_dataset();
  KernelHyperparams hyper;
  hyper.sigma2 = 1.0;
  hyper.lengthscales = VecX::Constant(1, 1e-4);
  VecX q(1);
  q << 0.15;  // away from every training point
  const GpPrediction p = gp_posterior(data, hyper, q);
  CHECK(std::abs(p.mean) < 1e-10);
  CHECK(p.variance == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("kernel matrix is stationary under distance/lengthscale rescaling") {
  std::mt19937_64 rng(3);
  MatX X(6, 2);
  for (int i = 0; i < 6; ++i)
    X.row(i) = test::random_vector(2, rng, 0.5).transpose().array() + 0.5;
  KernelHyperparams hyper;
  hyper.sigma2 = 0.8;
  hyper.lengthscales = VecX::Constant(2, 0.4);

  KernelHyperparams scaled = hyper;
  scaled.lengthscales *= 0.5;
  const MatX K1 = kernel_matrix(X, hyper);
  const MatX K2 = kernel_matrix(0.5 * X, scaled);
  CHECK((K1 - K2).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((K1 - K1.transpose()).norm() == 0.0);
  CHECK(Eigen::LLT<MatX>(K1).info() == Eigen::Success);
}

TEST_CASE("saas log density gradient matches finite differences") {
  std::mt19937_64 rng(4);
  TrialDataset data;
  for (int i = 0; i < 12; ++i) {
    const VecX x = (test::random_vector(4, rng, 0.5).array() + 0.5).matrix();
    data.append(x, std::sin(3.0 * x[0]) + 0.2 * x[1]);
  }
  const SaasDensity density(data);
  for (int trial = 0; trial < 50; ++trial) {
    const VecX z = test::random_vector(density.dim(), rng, 1.0);
    VecX grad(density.dim());
    const double lp = density.logp_grad(z, grad);
    CHECK(std::isfinite(lp));
    const double h = 1e-6;
    for (int i = 0; i < density.dim(); ++i) {
      VecX zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      const double fd = (density.logp(zp) - density.logp(zm)) / (2 * h);
      const double scale = std::max(1.0, std::abs(fd));
      CHECK(std::abs(grad[i] - fd) / scale < 1e-5);
    }
  }
}

TEST_CASE("half-cauchy tail: growing an inverse lengthscale lowers the prior") {
  // Two far-apart points make the likelihood insensitive to the lengthscale,
  // isolating the prior term.
  TrialDataset data;
  VecX a(1), b(1);
  a << 0.0;
  b << 1.0;
  data.append(a, -1.0);
  data.append(b, 1.0);
  KernelHyperparams sharp, sharper;
  sharp.sigma2 = sharper.sigma2 = 1.0;
  sharp.lengthscales = VecX::Constant(1, 1e-2);
  sharper.lengthscales = VecX::Constant(1, 1e-4);
  const double tau = 0.1;
  CHECK(log_posterior_density(data, sharper, tau) <
        log_posterior_density(data, sharp, tau));
}

TEST_CASE("nuts posterior sampling: determinism and retained counts") {
  const TrialDataset data = make_1d_dataset();
  const PosteriorSamples a = sample_hyperparams(data, 64, 64, 8, 42);
  const PosteriorSamples b = sample_hyperparams(data, 64, 64, 8, 42);
  CHECK(a.samples.size() == 8);  // floor(64 / 8)
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].sigma2 == b.samples[i].sigma2);
    CHECK((a.samples[i].lengthscales - b.samples[i].lengthscales).norm() ==
          0.0);
    CHECK(a.tau_saas[i] == b.tau_saas[i]);
  }
  const PosteriorSamples full = sample_hyperparams(data, 128, 1024, 16, 1);
  CHECK(full.samples.size() == 64);
  for (const auto& h : full.samples) CHECK_NOTHROW(h.validate());
}

TEST_CASE("saas sparsity signature on a 6-d synthetic function") {
  // One active dimension out of six; inactive lengthscales should stay long.
  int wins = 0;
  for (uint64_t seed : {10ull, 20ull, 30ull}) {
    std::mt19937_64 rng(seed);
    TrialDataset data;
    for (int i = 0; i < 30; ++i) {
      const VecX x = (test::random_vector(6, rng, 0.5).array() + 0.5).matrix();
      data.append(x, std::sin(8.0 * x[0]));
    }
    const PosteriorSamples post = sample_hyperparams(data, 256, 256, 8, seed);
    VecX med(6);
    for (int d = 0; d < 6; ++d) {
      std::vector<double> ells;
      for (const auto& h : post.samples) ells.push_back(h.lengthscales[d]);
      std::nth_element(ells.begin(), ells.begin() + ells.size() / 2,
                       ells.end());
      med[d] = ells[ells.size() / 2];
    }
    bool ok = true;
    for (int d = 1; d < 6; ++d) ok = ok && med[d] > med[0];
    wins += ok ? 1 : 0;
  }
  CHECK(wins >= 2);
}

TEST_CASE("mixture prediction: degenerate cases and variance inflation") {
  const TrialDataset data = make_1d_dataset();
  KernelHyperparams hyper;
  hyper.sigma2 = 1.0;
  hyper.lengthscales = VecX::Constant(1, 0.25);

  PosteriorSamples one;
  one.samples.push_back(hyper);
  one.tau_saas.push_back(0.1);
  VecX q(1);
  q << 0.4;
  const GpPrediction single = gp_posterior(data, hyper, q);
  const GpPrediction mixed = predict_mixture(one, data, q);
  CHECK(mixed.mean == single.mean);
  CHECK(mixed.variance == doctest::Approx(single.variance).epsilon(1e-14));

  PosteriorSamples two = one;
  two.samples.push_back(hyper);
  two.tau_saas.push_back(0.1);
  const GpPrediction dup = predict_mixture(two, data, q);
  CHECK(dup.mean == doctest::Approx(single.mean).epsilon(1e-14));
  CHECK(dup.variance == doctest::Approx(single.variance).epsilon(1e-12));

  // Distinct components: mixture variance >= min component variance.
  KernelHyperparams other = hyper;
  other.lengthscales = VecX::Constant(1, 0.05);
  PosteriorSamples pair;
  pair.samples = {hyper, other};
  pair.tau_saas = {0.1, 0.1};
  const GpPrediction m = predict_mixture(pair, data, q);
  const double v1 = gp_posterior(data, hyper, q).variance;
  const double v2 = gp_posterior(data, other, q).variance;
  CHECK(m.variance >= std::min(v1, v2) - 1e-14);

  const MixtureGp fast(pair, data);
  const GpPrediction viamix = fast.predict(q);
  CHECK(viamix.mean == doctest::Approx(m.mean).epsilon(1e-14));
  CHECK(viamix.variance == doctest::Approx(m.variance).epsilon(1e-12));
}

TEST_CASE("standardization round trip and validation") {
  TrialDataset data = make_1d_dataset();
  const VecX z = data.standardized_y();
  const VecX back = (z.array() * data.y_std() + data.y_mean()).matrix();
  CHECK((back - data.y).cwiseAbs().maxCoeff() < 1e-12);

  TrialDataset tiny;
  VecX x(1);
  x << 0.5;
  tiny.append(x, 1.0);
  CHECK_THROWS(tiny.validate());  // needs >= 2 points

  TrialDataset flat;
  flat.append(x, 2.0);
  x << 0.8;
  flat.append(x, 2.0);
  CHECK(flat.y_std() >= 1e-12);  // constant data keeps a positive floor
}
