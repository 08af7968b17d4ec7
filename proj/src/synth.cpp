#include "atat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace atat {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Segment make_synthetic_eeg(Rng& rng, const std::string& id) {
  Segment s;
  s.samples = Eigen::VectorXd::Zero(kSegmentLen);
  s.kind = SegmentKind::CleanEEG;
  s.id = id;
  const int tones = 3 + static_cast<int>(rng.uniform_int(3));
  for (int t = 0; t < tones; ++t) {
    // log-uniform over the physiological bands (delta..beta)
    const double freq = std::exp(rng.uniform(std::log(1.5), std::log(28.0)));
    const double amp = rng.uniform(0.35, 1.1);
    const double phase = rng.uniform(0.0, kTwoPi);
    for (int i = 0; i < kSegmentLen; ++i)
      s.samples[i] += amp * std::sin(kTwoPi * freq * i / kSampleRateHz + phase);
  }
  // mild smoothed background activity
  Eigen::VectorXd noise(kSegmentLen);
  for (int i = 0; i < kSegmentLen; ++i) noise[i] = rng.gaussian();
  for (int i = 0; i < kSegmentLen; ++i) {
    double acc = 0.0;
    int cnt = 0;
    for (int d = -4; d <= 4; ++d) {
      int j = i + d;
      if (j >= 0 && j < kSegmentLen) {
        acc += noise[j];
        ++cnt;
      }
    }
    s.samples[i] += 0.12 * acc / cnt;
  }
  return s;
}

Segment make_synthetic_emg(Rng& rng, const std::string& id) {
  Segment s;
  s.samples = Eigen::VectorXd::Zero(kSegmentLen);
  s.kind = SegmentKind::EMGArtifact;
  s.id = id;

  // high-frequency content: first difference of white noise
  Eigen::VectorXd white(kSegmentLen + 1);
  for (int i = 0; i <= kSegmentLen; ++i) white[i] = rng.gaussian();
  Eigen::VectorXd hf(kSegmentLen);
  for (int i = 0; i < kSegmentLen; ++i) hf[i] = (white[i + 1] - white[i]) / std::sqrt(2.0);

  // in-band (beta-range) content: smoothed white noise; muscle activity
  // overlaps the EEG band, which is what defeats pure spectral filtering
  Eigen::VectorXd lf = Eigen::VectorXd::Zero(kSegmentLen);
  {
    Eigen::VectorXd w2(kSegmentLen);
    for (int i = 0; i < kSegmentLen; ++i) w2[i] = rng.gaussian();
    for (int i = 0; i < kSegmentLen; ++i) {
      double acc = 0.0;
      int cnt = 0;
      for (int d = -3; d <= 3; ++d) {
        int j = i + d;
        if (j >= 0 && j < kSegmentLen) {
          acc += w2[j];
          ++cnt;
        }
      }
      lf[i] = acc / cnt;
    }
    lf *= std::sqrt(7.0);  // restore roughly unit variance after averaging
  }

  // low-level tonic activity everywhere
  for (int i = 0; i < kSegmentLen; ++i) s.samples[i] = 0.18 * hf[i];

  // raised-cosine bursts: one short burst with dominant in-band content (the
  // kind spectral filtering cannot remove) plus wideband ones; envelopes stay
  // narrow so flagged spans remain bridgeable
  const int bursts = 2 + static_cast<int>(rng.uniform_int(2));
  for (int b = 0; b < bursts; ++b) {
    const bool inband_burst = b == 0;
    const int spread = 24;
    const int base = 16;
    const int centre = 40 + static_cast<int>(rng.uniform_int(kSegmentLen - 80));
    const int half = base + static_cast<int>(rng.uniform_int(spread));
    const double amp = inband_burst ? rng.uniform(1.5, 2.6) : rng.uniform(0.9, 2.4);
    const double inband = inband_burst ? rng.uniform(0.7, 0.9) : rng.uniform(0.1, 0.3);
    for (int i = std::max(0, centre - half); i < std::min(kSegmentLen, centre + half); ++i) {
      const double u = (i - centre) / static_cast<double>(half);
      const double env = 0.5 * (1.0 + std::cos(3.141592653589793 * u));
      s.samples[i] += amp * env * ((1.0 - inband) * hf[i] + inband * lf[i]);
    }
  }

  // segment-to-segment variance spread so quartile selection is meaningful
  s.samples *= std::exp(0.4 * rng.gaussian());
  return s;
}

std::vector<Segment> make_synthetic_pool(SegmentKind kind, int count, Rng& rng,
                                         const std::string& id_prefix) {
  require(kind == SegmentKind::CleanEEG || kind == SegmentKind::EMGArtifact, Errc::InvalidInput,
          "synthetic pool kind must be clean_eeg or emg_artifact");
  std::vector<Segment> pool;
  pool.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::string id = id_prefix + ":" + std::to_string(i);
    pool.push_back(kind == SegmentKind::CleanEEG ? make_synthetic_eeg(rng, id)
                                                 : make_synthetic_emg(rng, id));
  }
  return pool;
}

std::vector<size_t> high_variance_quartile(const std::vector<Segment>& pool) {
  require(!pool.empty(), Errc::InvalidDataset, "empty artifact pool");
  std::vector<std::pair<double, size_t>> ranked;
  ranked.reserve(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) {
    const auto& x = pool[i].samples;
    const double mean = x.mean();
    ranked.emplace_back((x.array() - mean).square().sum() / x.size(), i);
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  const size_t keep = std::max<size_t>(1, pool.size() / 4);
  std::vector<size_t> idx;
  idx.reserve(keep);
  for (size_t i = 0; i < keep; ++i) idx.push_back(ranked[i].second);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace atat
