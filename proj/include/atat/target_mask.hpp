#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "atat/signal.hpp"

namespace atat {

// Autoencoder-output-vs-original correlation as a per-window noise proxy,
// thresholded into a target-site mask, then 1x2 tokenization for the
// reconstruction transformer.

struct MaskConfig {
  int window_len = 64;
  int stride = 32;
  double threshold = 0.8;
  int crossfade = 8;
};

struct NoiseProfile {
  int window_len = 64;
  int stride = 32;
  double threshold = 0.8;
  std::vector<double> cc_per_window;  // clamped to [-1, 1]; 0 for flat windows
  std::vector<bool> window_flagged;   // zero-variance windows, treated as high noise
};

struct NoiseMask {
  std::vector<bool> mask;  // true = high-noise target site
  NoiseProfile source_profile;

  double masked_fraction() const;
};

struct TokenStream {
  // row-major [512 x 2]: column 0 original (normalized), column 1
  // autoencoder output; masked rows zeroed.
  Eigen::MatrixXd tokens;
  NoiseMask mask;
};

// Pearson CC per sliding window; zero-variance windows get CC := 0 and are
// flagged as untrusted.
NoiseProfile windowed_cc(const Eigen::VectorXd& original, const Eigen::VectorXd& ae_output,
                         int window_len, int stride, double threshold);

// Sample is a target site iff any covering window has CC < threshold.
NoiseMask build_mask(const NoiseProfile& profile);

TokenStream tokenize(const Eigen::VectorXd& original_norm, const Eigen::VectorXd& ae_output,
                     const NoiseMask& mask);

// Per-sample blend weight (0 -> autoencoder, 1 -> transformer); linear ramps
// of `crossfade` samples sit just inside each masked run so unmasked sites
// stay exactly the autoencoder output.
Eigen::VectorXd splice_weights(const std::vector<bool>& mask, int crossfade);

Segment splice(const Eigen::VectorXd& ae_output, const Eigen::VectorXd& transformer_output,
               const NoiseMask& mask, int crossfade, const std::string& id = "");

// Debug exports: "index,cc" / "index,flag" rows.
void export_profile_csv(const NoiseProfile& profile, const std::string& path);
void export_mask_csv(const NoiseMask& mask, const std::string& path);

}  // namespace atat
