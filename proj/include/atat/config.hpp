#pragma once

#include <string>
#include <vector>

#include "atat/common.hpp"

namespace atat {

// Resolved run configuration: defaults -> config file -> CLI flags. Every
// field round-trips through JSON losslessly.
struct RunConfig {
  // run plumbing
  std::string data_dir = "data";
  std::string out_dir;  // empty -> runs/<timestamp>-<seed>
  std::string models_dir;  // empty -> <out_dir>/checkpoints
  uint64_t seed = 42;
  std::vector<double> snr_levels = {-7.0, 2.0};
  int threads = 1;
  bool skip_gan = false;

  // dataset generation
  int train_pairs_per_snr = 120;
  int test_pairs_per_snr = 100;
  int emg_pool = 880;
  std::string eeg_csv;  // optional external pools (one segment per row)
  std::string emg_csv;

  // target-site masking
  int window_len = 64;
  int stride = 32;
  double threshold = 0.8;
  int crossfade = 8;

  // autoencoder training
  int ae_epochs = 10;
  int ae_batch = 20;
  double ae_lr = 1e-4;

  // adversarial training
  int gan_epochs = 10;
  int gan_batch = 20;
  double gan_lr = 1e-4;
  int gan_cycles = 5;
  double adv_weight = 1.0;
  double recon_weight = 1.0;
  // 1 = off, 2 = +time reversal, 4 = +polarity flips; augmentation recycles
  // the same segments, so the recording-time budget is unchanged
  int gan_augment = 1;
  // extra training-mask variants per pair (>=1); variants beyond the first
  // add random masked windows so the generator sees denser supervision
  int gan_mask_aug = 1;

  // SNR gate training
  int gate_epochs = 100;
  int gate_batch = 100;
  double gate_lr = 1e-3;

  void validate() const;
};

std::string config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& text);
RunConfig load_config_file(const std::string& path);
void write_config_file(const RunConfig& cfg, const std::string& path);

std::string snr_label(double snr_db);

}  // namespace atat
