#include "atat/signal.hpp"

#include <cmath>

namespace atat {

const char* segment_kind_name(SegmentKind k) {
  switch (k) {
    case SegmentKind::CleanEEG: return "clean_eeg";
    case SegmentKind::EMGArtifact: return "emg_artifact";
    case SegmentKind::Contaminated: return "contaminated";
    case SegmentKind::Denoised: return "denoised";
  }
  return "unknown";
}

SegmentKind segment_kind_from(const std::string& name) {
  if (name == "clean_eeg") return SegmentKind::CleanEEG;
  if (name == "emg_artifact") return SegmentKind::EMGArtifact;
  if (name == "contaminated") return SegmentKind::Contaminated;
  if (name == "denoised") return SegmentKind::Denoised;
  fail(Errc::FormatError, "unknown segment kind: " + name);
}

void validate_segment(const Segment& s) {
  require(s.samples.size() == kSegmentLen, Errc::InvalidInput,
          "segment " + s.id + " has " + std::to_string(s.samples.size()) + " samples, want " +
              std::to_string(kSegmentLen));
  require(s.samples.allFinite(), Errc::InvalidInput, "segment " + s.id + " has non-finite samples");
}

double rms(const Eigen::VectorXd& samples) {
  require(samples.size() > 0, Errc::InvalidInput, "rms of empty vector");
  require(samples.allFinite(), Errc::InvalidInput, "rms of non-finite vector");
  return std::sqrt(samples.squaredNorm() / static_cast<double>(samples.size()));
}

double measure_snr_db(const Eigen::VectorXd& signal, const Eigen::VectorXd& scaled_noise) {
  const double rn = rms(scaled_noise);
  require(rn > 0.0, Errc::DegenerateNoise, "zero-RMS noise in SNR measurement");
  return 10.0 * std::log10(rms(signal) / rn);
}

double mix_lambda(double rms_eeg, double rms_emg, double snr_db) {
  require(rms_emg > 0.0, Errc::DegenerateNoise, "zero-RMS EMG segment");
  require(rms_eeg > 0.0, Errc::DegenerateSegment, "zero-RMS EEG segment");
  return rms_eeg / (rms_emg * std::pow(10.0, snr_db / 10.0));
}

std::pair<Eigen::VectorXd, NormState> normalize(const Eigen::VectorXd& samples, NormMode mode) {
  require(samples.size() > 0, Errc::InvalidInput, "normalize of empty vector");
  require(samples.allFinite(), Errc::InvalidInput, "normalize of non-finite vector");
  NormState st;
  st.mode = mode;
  if (mode == NormMode::MinMax01) {
    const double lo = samples.minCoeff(), hi = samples.maxCoeff();
    require(hi > lo, Errc::DegenerateSegment, "min-max normalize of constant segment");
    st.offset = lo;
    st.scale = hi - lo;
  } else {
    const double mean = samples.mean();
    const double var = (samples.array() - mean).square().sum() / static_cast<double>(samples.size());
    require(var > 0.0, Errc::DegenerateSegment, "z-score normalize of constant segment");
    st.offset = mean;
    st.scale = std::sqrt(var);
  }
  Eigen::VectorXd out = (samples.array() - st.offset) / st.scale;
  return {std::move(out), st};
}

Eigen::VectorXd denormalize(const Eigen::VectorXd& samples, const NormState& state) {
  require(state.scale > 0.0, Errc::InvalidInput, "denormalize with non-positive scale");
  return (samples.array() * state.scale + state.offset).matrix();
}

MixResult mix(const Segment& eeg, const Segment& emg, double snr_db, NormMode mode) {
  validate_segment(eeg);
  validate_segment(emg);
  require(eeg.kind == SegmentKind::CleanEEG, Errc::InvalidInput,
          "mix expects a clean EEG segment, got " + std::string(segment_kind_name(eeg.kind)));
  require(emg.kind == SegmentKind::EMGArtifact, Errc::InvalidInput,
          "mix expects an EMG artifact segment, got " + std::string(segment_kind_name(emg.kind)));
  require(snr_db >= -7.0 && snr_db <= 2.0, Errc::InvalidInput,
          "snr_db outside the configured [-7, 2] range");

  MixResult out;
  out.spec.snr_db = snr_db;
  out.spec.lambda = mix_lambda(rms(eeg.samples), rms(emg.samples), snr_db);
  out.spec.eeg_id = eeg.id;
  out.spec.emg_id = emg.id;

  Eigen::VectorXd raw = eeg.samples + out.spec.lambda * emg.samples;
  auto [normed, st] = normalize(raw, mode);
  out.norm = st;
  out.contaminated.samples = std::move(normed);
  out.contaminated.rate_hz = eeg.rate_hz;
  out.contaminated.kind = SegmentKind::Contaminated;
  out.contaminated.id = eeg.id + "+" + emg.id;
  return out;
}

}  // namespace atat
