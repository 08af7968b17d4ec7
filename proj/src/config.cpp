#include "atat/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

using nlohmann::json;

namespace atat {

void RunConfig::validate() const {
  require(!snr_levels.empty(), Errc::InvalidConfig, "snr_levels must not be empty");
  for (double s : snr_levels)
    require(s >= -7.0 && s <= 2.0, Errc::InvalidConfig,
            "snr level " + std::to_string(s) + " outside [-7, 2]");
  for (size_t i = 1; i < snr_levels.size(); ++i)
    require(snr_levels[i] > snr_levels[i - 1], Errc::InvalidConfig,
            "snr_levels must be strictly increasing");
  require(train_pairs_per_snr > 0 && test_pairs_per_snr > 0, Errc::InvalidConfig,
          "pair counts must be positive");
  require(window_len > 0 && window_len <= 512, Errc::InvalidConfig, "window_len in (0,512]");
  require(stride > 0, Errc::InvalidConfig, "stride must be positive");
  require(crossfade >= 0, Errc::InvalidConfig, "crossfade must be non-negative");
  require(ae_batch >= 2 && gan_batch >= 1 && gate_batch >= 1, Errc::InvalidConfig,
          "batch sizes out of range");
  require(ae_epochs >= 1 && gan_epochs >= 1 && gate_epochs >= 1, Errc::InvalidConfig,
          "epoch counts must be positive");
  require(gan_cycles >= 1, Errc::InvalidConfig, "gan_cycles must be >= 1");
  require(gan_augment == 1 || gan_augment == 2 || gan_augment == 4, Errc::InvalidConfig,
          "gan_augment must be 1, 2 or 4");
  require(gan_mask_aug >= 1 && gan_mask_aug <= 8, Errc::InvalidConfig,
          "gan_mask_aug must be in [1, 8]");
  require(ae_lr > 0 && gan_lr > 0 && gate_lr > 0, Errc::InvalidConfig,
          "learning rates must be positive");
  require(adv_weight >= 0 && recon_weight >= 0 && (adv_weight > 0 || recon_weight > 0),
          Errc::InvalidConfig, "generator loss weights must not both be zero");
  require(threads >= 1, Errc::InvalidConfig, "threads must be >= 1");
  require(emg_pool >= 4, Errc::InvalidConfig, "emg_pool too small for quartile selection");
}

namespace {

json to_json_obj(const RunConfig& c) {
  return json{{"data_dir", c.data_dir},
              {"out_dir", c.out_dir},
              {"models_dir", c.models_dir},
              {"seed", c.seed},
              {"snr_levels", c.snr_levels},
              {"threads", c.threads},
              {"skip_gan", c.skip_gan},
              {"train_pairs_per_snr", c.train_pairs_per_snr},
              {"test_pairs_per_snr", c.test_pairs_per_snr},
              {"emg_pool", c.emg_pool},
              {"eeg_csv", c.eeg_csv},
              {"emg_csv", c.emg_csv},
              {"window_len", c.window_len},
              {"stride", c.stride},
              {"threshold", c.threshold},
              {"crossfade", c.crossfade},
              {"ae_epochs", c.ae_epochs},
              {"ae_batch", c.ae_batch},
              {"ae_lr", c.ae_lr},
              {"gan_epochs", c.gan_epochs},
              {"gan_batch", c.gan_batch},
              {"gan_lr", c.gan_lr},
              {"gan_cycles", c.gan_cycles},
              {"adv_weight", c.adv_weight},
              {"recon_weight", c.recon_weight},
              {"gan_augment", c.gan_augment},
              {"gan_mask_aug", c.gan_mask_aug},
              {"gate_epochs", c.gate_epochs},
              {"gate_batch", c.gate_batch},
              {"gate_lr", c.gate_lr}};
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) { return to_json_obj(cfg).dump(2) + "\n"; }

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::FormatError, std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  const json defaults = to_json_obj(c);
  for (auto it = j.begin(); it != j.end(); ++it)
    require(defaults.contains(it.key()), Errc::InvalidConfig,
            "unknown config key: " + it.key());
  try {
    c.data_dir = j.value("data_dir", c.data_dir);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.models_dir = j.value("models_dir", c.models_dir);
    c.seed = j.value("seed", c.seed);
    if (j.contains("snr_levels")) c.snr_levels = j.at("snr_levels").get<std::vector<double>>();
    c.threads = j.value("threads", c.threads);
    c.skip_gan = j.value("skip_gan", c.skip_gan);
    c.train_pairs_per_snr = j.value("train_pairs_per_snr", c.train_pairs_per_snr);
    c.test_pairs_per_snr = j.value("test_pairs_per_snr", c.test_pairs_per_snr);
    c.emg_pool = j.value("emg_pool", c.emg_pool);
    c.eeg_csv = j.value("eeg_csv", c.eeg_csv);
    c.emg_csv = j.value("emg_csv", c.emg_csv);
    c.window_len = j.value("window_len", c.window_len);
    c.stride = j.value("stride", c.stride);
    c.threshold = j.value("threshold", c.threshold);
    c.crossfade = j.value("crossfade", c.crossfade);
    c.ae_epochs = j.value("ae_epochs", c.ae_epochs);
    c.ae_batch = j.value("ae_batch", c.ae_batch);
    c.ae_lr = j.value("ae_lr", c.ae_lr);
    c.gan_epochs = j.value("gan_epochs", c.gan_epochs);
    c.gan_batch = j.value("gan_batch", c.gan_batch);
    c.gan_lr = j.value("gan_lr", c.gan_lr);
    c.gan_cycles = j.value("gan_cycles", c.gan_cycles);
    c.adv_weight = j.value("adv_weight", c.adv_weight);
    c.recon_weight = j.value("recon_weight", c.recon_weight);
    c.gan_augment = j.value("gan_augment", c.gan_augment);
    c.gan_mask_aug = j.value("gan_mask_aug", c.gan_mask_aug);
    c.gate_epochs = j.value("gate_epochs", c.gate_epochs);
    c.gate_batch = j.value("gate_batch", c.gate_batch);
    c.gate_lr = j.value("gate_lr", c.gate_lr);
  } catch (const json::exception& e) {
    fail(Errc::InvalidConfig, std::string("config field error: ") + e.what());
  }
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), Errc::IoError, "cannot open config " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return config_from_json(ss.str());
}

void write_config_file(const RunConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  require(os.good(), Errc::IoError, "cannot write config " + path);
  os << config_to_json(cfg);
}

std::string snr_label(double snr_db) {
  // trim to a compact, filesystem-friendly label: -7, 2, -3.5
  std::ostringstream ss;
  ss << snr_db;
  std::string s = ss.str();
  return s;
}

}  // namespace atat
