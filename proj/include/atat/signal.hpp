#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>

#include "atat/common.hpp"

namespace atat {

constexpr int kSegmentLen = 512;
constexpr double kSampleRateHz = 256.0;

enum class SegmentKind { CleanEEG, EMGArtifact, Contaminated, Denoised };

const char* segment_kind_name(SegmentKind k);
SegmentKind segment_kind_from(const std::string& name);

// Fixed-length single-channel sample vector (512 samples, 2 s at 256 Hz).
struct Segment {
  Eigen::VectorXd samples;
  double rate_hz = kSampleRateHz;
  SegmentKind kind = SegmentKind::CleanEEG;
  std::string id;
};

// Length and finiteness invariants; throws InvalidInput.
void validate_segment(const Segment& s);

struct MixSpec {
  double snr_db = 0.0;
  double lambda = 1.0;
  std::string eeg_id, emg_id;
  uint64_t seed = 0;
};

enum class NormMode { ZScore, MinMax01 };

struct NormState {
  NormMode mode = NormMode::MinMax01;
  double offset = 0.0;  // subtracted first
  double scale = 1.0;   // then divided by; always > 0
};

double rms(const Eigen::VectorXd& samples);

// SNR in dB under the RMS-ratio convention: 10*log10(rms(signal)/rms(noise)).
double measure_snr_db(const Eigen::VectorXd& signal, const Eigen::VectorXd& scaled_noise);

double mix_lambda(double rms_eeg, double rms_emg, double snr_db);

std::pair<Eigen::VectorXd, NormState> normalize(const Eigen::VectorXd& samples, NormMode mode);
Eigen::VectorXd denormalize(const Eigen::VectorXd& samples, const NormState& state);

struct MixResult {
  Segment contaminated;  // normalized per the requested mode
  MixSpec spec;
  NormState norm;
};

// y = eeg + lambda*emg with lambda chosen so the pre-normalization RMS SNR
// equals snr_db; the returned segment is normalized with the state captured.
MixResult mix(const Segment& eeg, const Segment& emg, double snr_db, NormMode mode);

}  // namespace atat
