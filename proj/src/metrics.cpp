#include "atat/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace atat {

double pearson_cc(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require(a.size() == b.size(), Errc::InvalidInput, "pearson_cc length mismatch");
  require(a.size() >= 2, Errc::InvalidInput, "pearson_cc needs length >= 2");
  const double ma = a.mean(), mb = b.mean();
  const double sa = (a.array() - ma).square().sum();
  const double sb = (b.array() - mb).square().sum();
  require(sa > 0.0 && sb > 0.0, Errc::DegenerateSegment, "pearson_cc on constant input");
  const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
  return std::clamp(cov / std::sqrt(sa * sb), -1.0, 1.0);
}

double trrmse(const Eigen::VectorXd& denoised, const Eigen::VectorXd& clean) {
  require(denoised.size() == clean.size(), Errc::InvalidInput, "trrmse length mismatch");
  const double rc = std::sqrt(clean.squaredNorm() / static_cast<double>(clean.size()));
  require(rc > 0.0, Errc::DegenerateSegment, "trrmse against zero-RMS clean signal");
  const double re =
      std::sqrt((denoised - clean).squaredNorm() / static_cast<double>(clean.size()));
  return re / rc;
}

void fft_radix2(std::vector<std::complex<double>>& data) {
  const size_t n = data.size();
  require(n > 0 && (n & (n - 1)) == 0, Errc::InvalidInput, "fft size must be a power of two");
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * 3.141592653589793238462643383279 / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = data[i + k];
        const std::complex<double> v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

Eigen::VectorXd psd_periodogram(const Eigen::VectorXd& samples, const PsdConfig& cfg) {
  const auto n = samples.size();
  require(n > 1 && (n & (n - 1)) == 0, Errc::InvalidInput,
          "periodogram wants a power-of-two segment");
  require(samples.allFinite(), Errc::InvalidInput, "periodogram of non-finite input");

  std::vector<std::complex<double>> buf(static_cast<size_t>(n));
  double win_power = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w =
        0.54 - 0.46 * std::cos(2.0 * 3.141592653589793238462643383279 * i / (n - 1));
    win_power += w * w;
    buf[static_cast<size_t>(i)] = samples[i] * w;
  }
  fft_radix2(buf);

  const double norm = 1.0 / (cfg.fs_hz * win_power);
  const Eigen::Index half = n / 2;
  Eigen::VectorXd psd(half + 1);
  for (Eigen::Index k = 0; k <= half; ++k) {
    const double mag2 = std::norm(buf[static_cast<size_t>(k)]);
    double v = mag2 * norm;
    if (k != 0 && k != half) v *= 2.0;  // one-sided doubling
    psd[k] = v;
  }
  return psd;
}

double srrmse(const Eigen::VectorXd& denoised, const Eigen::VectorXd& clean,
              const PsdConfig& cfg) {
  require(denoised.size() == clean.size(), Errc::InvalidInput, "srrmse length mismatch");
  const Eigen::VectorXd pd = psd_periodogram(denoised, cfg);
  const Eigen::VectorXd pc = psd_periodogram(clean, cfg);
  const double rc = std::sqrt(pc.squaredNorm() / static_cast<double>(pc.size()));
  require(rc > 0.0, Errc::DegenerateSegment, "srrmse against zero-power clean spectrum");
  const double re = std::sqrt((pd - pc).squaredNorm() / static_cast<double>(pc.size()));
  return re / rc;
}

namespace {

// regularized incomplete beta via Lentz's continued fraction
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15, kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) <= kEps) break;
  }
  return h;
}

double inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  const double x = dof / (dof + t * t);
  const double p = 0.5 * inc_beta(dof / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - p : p;
}

}  // namespace

double student_t_quantile(double p, double dof) {
  require(p > 0.0 && p < 1.0, Errc::InvalidInput, "t quantile probability out of range");
  require(dof >= 1.0, Errc::InvalidInput, "t quantile needs dof >= 1");
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double target = upper ? p : 1.0 - p;
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, dof) < target && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, dof) < target)
      lo = mid;
    else
      hi = mid;
  }
  const double t = 0.5 * (lo + hi);
  return upper ? t : -t;
}

std::pair<double, double> confidence_interval(const std::vector<double>& values, double level) {
  require(values.size() >= 2, Errc::InvalidInput, "confidence interval needs n >= 2");
  require(level > 0.0 && level < 1.0, Errc::InvalidInput, "confidence level out of range");
  const double n = static_cast<double>(values.size());
  bool all_equal = true;
  for (double v : values) all_equal = all_equal && v == values.front();
  if (all_equal) return {values.front(), values.front()};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) return {mean, mean};
  const double t = student_t_quantile(1.0 - (1.0 - level) / 2.0, n - 1.0);
  const double half = t * sd / std::sqrt(n);
  return {mean - half, mean + half};
}

}  // namespace atat
