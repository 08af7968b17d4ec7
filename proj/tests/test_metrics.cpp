#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "atat/metrics.hpp"
#include "atat/signal.hpp"

using namespace atat;

namespace {

// sum-based Pearson oracle
double pearson_oracle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

// naive DFT |X_k|^2 over the Hamming-windowed segment
Eigen::VectorXd psd_oracle(const Eigen::VectorXd& x, double fs) {
  const int n = static_cast<int>(x.size());
  double u = 0.0;
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (n - 1));
    u += w[i] * w[i];
  }
  Eigen::VectorXd psd(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int i = 0; i < n; ++i)
      acc += x[i] * w[i] * std::exp(std::complex<double>(0.0, -2.0 * M_PI * k * i / n));
    double v = std::norm(acc) / (fs * u);
    if (k != 0 && k != n / 2) v *= 2.0;
    psd[k] = v;
  }
  return psd;
}

}  // namespace

TEST_CASE("pearson_cc: identities and oracle equivalence") {
  Rng rng(3);
  Eigen::VectorXd x(32);
  for (int i = 0; i < 32; ++i) x[i] = rng.gaussian();
  CHECK(pearson_cc(x, x) == doctest::Approx(1.0).epsilon(1e-12));

  // affine invariance with positive gain
  Eigen::VectorXd y = 2.5 * x.array() + 0.7;
  CHECK(pearson_cc(x, y) == doctest::Approx(1.0).epsilon(1e-12));

  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd a(10), b(10);
    for (int i = 0; i < 10; ++i) {
      a[i] = rng.uniform(-2.0, 2.0);
      b[i] = rng.uniform(-2.0, 2.0);
    }
    CHECK(pearson_cc(a, b) == doctest::Approx(pearson_oracle(a, b)).epsilon(1e-9));
  }

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(8, 3.0);
  try {
    (void)pearson_cc(flat, x.head(8));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateSegment);
  }
}

TEST_CASE("trrmse: pinned values") {
  Rng rng(5);
  Eigen::VectorXd x(64);
  for (int i = 0; i < 64; ++i) x[i] = rng.gaussian();
  CHECK(trrmse(x, x) == 0.0);
  CHECK(trrmse(Eigen::VectorXd::Zero(64), x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(trrmse(2.0 * x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)trrmse(x, Eigen::VectorXd::Zero(64)), Error);
}

TEST_CASE("fft matches the naive DFT") {
  Rng rng(7);
  const int n = 64;
  std::vector<std::complex<double>> buf(n);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.gaussian();
    buf[static_cast<size_t>(i)] = x[i];
  }
  fft_radix2(buf);
  for (int k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int i = 0; i < n; ++i)
      acc += x[i] * std::exp(std::complex<double>(0.0, -2.0 * M_PI * k * i / n));
    CHECK(std::abs(buf[static_cast<size_t>(k)] - acc) < 1e-9);
  }
}

TEST_CASE("psd: length, positivity, DFT oracle") {
  Rng rng(9);
  Eigen::VectorXd x(kSegmentLen);
  for (int i = 0; i < kSegmentLen; ++i) x[i] = rng.gaussian() + std::sin(0.2 * i);
  auto psd = psd_periodogram(x);
  CHECK(psd.size() == 257);
  CHECK(psd.minCoeff() >= 0.0);
  auto expect = psd_oracle(x, 256.0);
  for (int k = 0; k <= 256; ++k) {
    const double denom = std::max(std::abs(expect[k]), 1e-12);
    CHECK(std::abs(psd[k] - expect[k]) / denom < 1e-9);
  }
}

TEST_CASE("srrmse: identity and phase blindness") {
  Rng rng(11);
  Eigen::VectorXd x(kSegmentLen);
  for (int i = 0; i < kSegmentLen; ++i) x[i] = std::sin(2.0 * M_PI * 10.0 * i / 256.0);
  CHECK(srrmse(x, x) == 0.0);

  // phase-shifted 10 Hz sinusoid: PSD nearly unchanged
  Eigen::VectorXd y(kSegmentLen);
  for (int i = 0; i < kSegmentLen; ++i)
    y[i] = std::sin(2.0 * M_PI * 10.0 * i / 256.0 + 1.234);
  CHECK(srrmse(y, x) < 0.05);

  Eigen::VectorXd noisy = x;
  for (int i = 0; i < kSegmentLen; ++i) noisy[i] += rng.gaussian();
  CHECK(srrmse(noisy, x) > 0.05);
}

TEST_CASE("student t quantile: reference values") {
  // classic table entries
  CHECK(student_t_quantile(0.975, 1) == doctest::Approx(12.7062).epsilon(1e-4));
  CHECK(student_t_quantile(0.975, 10) == doctest::Approx(2.2281).epsilon(1e-4));
  CHECK(student_t_quantile(0.975, 99) == doctest::Approx(1.9842).epsilon(1e-4));
  CHECK(student_t_quantile(0.95, 30) == doctest::Approx(1.6973).epsilon(1e-4));
  CHECK(student_t_quantile(0.025, 10) == doctest::Approx(-2.2281).epsilon(1e-4));
  CHECK(student_t_quantile(0.5, 7) == 0.0);
}

TEST_CASE("confidence interval: degenerate, symmetric, Monte Carlo width") {
  std::vector<double> same(5, 0.42);
  auto [lo, hi] = confidence_interval(same);
  CHECK(lo == hi);  // zero width
  CHECK(lo == doctest::Approx(0.42).epsilon(1e-15));

  auto [l2, h2] = confidence_interval({0.0, 1.0});
  CHECK((l2 + h2) / 2.0 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(h2 - 0.5 == doctest::Approx(0.5 - l2).epsilon(1e-12));
  // half-width = t_{0.975,1} * sd/sqrt(2) with sd = sqrt(0.5)
  CHECK(h2 - l2 == doctest::Approx(2.0 * 12.7062 * std::sqrt(0.5) / std::sqrt(2.0)).epsilon(1e-4));

  Rng rng(13);
  std::vector<double> sample(100);
  for (auto& v : sample) v = rng.gaussian();
  auto [l3, h3] = confidence_interval(sample);
  const double width = h3 - l3;
  CHECK(std::abs(width - 2.0 * 1.9842 / 10.0) / (2.0 * 1.9842 / 10.0) < 0.10);

  CHECK_THROWS_AS((void)confidence_interval({1.0}), Error);
}

TEST_CASE("ci bounds bracket the mean") {
  Rng rng(17);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> vals(12);
    double mean = 0;
    for (auto& v : vals) {
      v = rng.uniform(-4.0, 4.0);
      mean += v;
    }
    mean /= vals.size();
    auto [lo, hi] = confidence_interval(vals);
    CHECK(lo <= mean + 1e-12);
    CHECK(hi >= mean - 1e-12);
  }
}
