#include "atat/target_mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace atat {

double NoiseMask::masked_fraction() const {
  if (mask.empty()) return 0.0;
  size_t n = 0;
  for (bool b : mask) n += b ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(mask.size());
}

NoiseProfile windowed_cc(const Eigen::VectorXd& original, const Eigen::VectorXd& ae_output,
                         int window_len, int stride, double threshold) {
  require(original.size() == kSegmentLen && ae_output.size() == kSegmentLen, Errc::ShapeError,
          "windowed_cc wants length-512 inputs");
  require(window_len > 0 && window_len <= kSegmentLen, Errc::InvalidConfig,
          "window_len must be in (0, 512]");
  require(stride > 0, Errc::InvalidConfig, "stride must be positive");

  NoiseProfile prof;
  prof.window_len = window_len;
  prof.stride = stride;
  prof.threshold = threshold;
  const int count = (kSegmentLen - window_len) / stride + 1;
  prof.cc_per_window.resize(static_cast<size_t>(count));
  prof.window_flagged.assign(static_cast<size_t>(count), false);

  for (int w = 0; w < count; ++w) {
    const auto a = original.segment(w * stride, window_len);
    const auto b = ae_output.segment(w * stride, window_len);
    const double ma = a.mean(), mb = b.mean();
    const double sa = (a.array() - ma).square().sum();
    const double sb = (b.array() - mb).square().sum();
    if (sa <= 0.0 || sb <= 0.0) {
      // flat window in either stream: maximally untrusted
      prof.cc_per_window[static_cast<size_t>(w)] = 0.0;
      prof.window_flagged[static_cast<size_t>(w)] = true;
      continue;
    }
    const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
    double cc = cov / std::sqrt(sa * sb);
    cc = std::clamp(cc, -1.0, 1.0);
    prof.cc_per_window[static_cast<size_t>(w)] = cc;
  }
  return prof;
}

NoiseMask build_mask(const NoiseProfile& profile) {
  NoiseMask out;
  out.source_profile = profile;
  out.mask.assign(kSegmentLen, false);
  for (size_t w = 0; w < profile.cc_per_window.size(); ++w) {
    if (profile.cc_per_window[w] >= profile.threshold) continue;
    const int start = static_cast<int>(w) * profile.stride;
    const int end = std::min(kSegmentLen, start + profile.window_len);
    for (int i = start; i < end; ++i) out.mask[static_cast<size_t>(i)] = true;
  }
  return out;
}

TokenStream tokenize(const Eigen::VectorXd& original_norm, const Eigen::VectorXd& ae_output,
                     const NoiseMask& mask) {
  require(original_norm.size() == kSegmentLen && ae_output.size() == kSegmentLen,
          Errc::ShapeError, "tokenize wants length-512 inputs");
  require(mask.mask.size() == kSegmentLen, Errc::ShapeError, "tokenize mask length");
  TokenStream ts;
  ts.mask = mask;
  ts.tokens = Eigen::MatrixXd::Zero(kSegmentLen, 2);
  for (int i = 0; i < kSegmentLen; ++i) {
    if (mask.mask[static_cast<size_t>(i)]) continue;
    ts.tokens(i, 0) = original_norm[i];
    ts.tokens(i, 1) = ae_output[i];
  }
  return ts;
}

Eigen::VectorXd splice_weights(const std::vector<bool>& mask, int crossfade) {
  require(crossfade >= 0, Errc::InvalidConfig, "crossfade must be non-negative");
  const int n = static_cast<int>(mask.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  int i = 0;
  while (i < n) {
    if (!mask[static_cast<size_t>(i)]) {
      ++i;
      continue;
    }
    int j = i;
    while (j < n && mask[static_cast<size_t>(j)]) ++j;
    // masked run [i, j)
    const int run = j - i;
    const bool ramp_in = i > 0;        // preceded by an unmasked site
    const bool ramp_out = j < n;       // followed by one
    int fade = std::min(crossfade, run / 2);
    for (int t = i; t < j; ++t) w[t] = 1.0;
    if (fade > 0 && ramp_in)
      for (int t = 0; t < fade; ++t) w[i + t] = static_cast<double>(t + 1) / (fade + 1);
    if (fade > 0 && ramp_out)
      for (int t = 0; t < fade; ++t) w[j - 1 - t] = static_cast<double>(t + 1) / (fade + 1);
    i = j;
  }
  return w;
}

Segment splice(const Eigen::VectorXd& ae_output, const Eigen::VectorXd& transformer_output,
               const NoiseMask& mask, int crossfade, const std::string& id) {
  require(ae_output.size() == kSegmentLen && transformer_output.size() == kSegmentLen,
          Errc::ShapeError, "splice wants length-512 inputs");
  const Eigen::VectorXd w = splice_weights(mask.mask, crossfade);
  Segment out;
  out.kind = SegmentKind::Denoised;
  out.id = id;
  out.samples = Eigen::VectorXd(kSegmentLen);
  for (int i = 0; i < kSegmentLen; ++i) {
    // exact selection at the endpoints, blend in between
    if (w[i] == 0.0)
      out.samples[i] = ae_output[i];
    else if (w[i] == 1.0)
      out.samples[i] = transformer_output[i];
    else
      out.samples[i] = ae_output[i] * (1.0 - w[i]) + transformer_output[i] * w[i];
  }
  require(out.samples.allFinite(), Errc::DivergenceError, "splice produced non-finite output");
  return out;
}

void export_profile_csv(const NoiseProfile& profile, const std::string& path) {
  std::ofstream os(path);
  require(os.good(), Errc::IoError, "cannot write " + path);
  os.precision(10);
  os << "index,cc\n";
  for (size_t i = 0; i < profile.cc_per_window.size(); ++i)
    os << i << "," << profile.cc_per_window[i] << "\n";
}

void export_mask_csv(const NoiseMask& mask, const std::string& path) {
  std::ofstream os(path);
  require(os.good(), Errc::IoError, "cannot write " + path);
  os << "index,flag\n";
  for (size_t i = 0; i < mask.mask.size(); ++i) os << i << "," << (mask.mask[i] ? 1 : 0) << "\n";
}

}  // namespace atat
