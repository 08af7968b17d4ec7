#pragma once

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

#include "atat/common.hpp"

namespace atat {

double pearson_cc(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// rms(denoised - clean) / rms(clean)
double trrmse(const Eigen::VectorXd& denoised, const Eigen::VectorXd& clean);

struct PsdConfig {
  double fs_hz = 256.0;
};

// One-sided Hamming-window periodogram of a full 512-sample segment;
// output length N/2+1 = 257, all values >= 0.
Eigen::VectorXd psd_periodogram(const Eigen::VectorXd& samples, const PsdConfig& cfg = {});

// rms(PSD(denoised) - PSD(clean)) / rms(PSD(clean))
double srrmse(const Eigen::VectorXd& denoised, const Eigen::VectorXd& clean,
              const PsdConfig& cfg = {});

// In-place radix-2 FFT (size must be a power of two).
void fft_radix2(std::vector<std::complex<double>>& data);

// Student-t quantile via the regularized incomplete beta inverse; converges
// well past the 1e-4 documentation bound.
double student_t_quantile(double p, double dof);

// Normal-theory t interval: mean +/- t_{1-(1-level)/2, n-1} * stderr.
std::pair<double, double> confidence_interval(const std::vector<double>& values,
                                              double level = 0.95);

}  // namespace atat
