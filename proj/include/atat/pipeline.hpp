#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "atat/config.hpp"
#include "atat/dataset.hpp"
#include "atat/models.hpp"
#include "atat/target_mask.hpp"
#include "atat/training.hpp"

namespace atat {

// One trained AT-AT stack per SNR level; the gate routes between them.
struct AtAtInstance {
  double snr_db = 0.0;
  Autoencoder<float> ae;
  Generator<float> gen;
  Discriminator<float> disc;

  AtAtInstance(double snr, uint64_t master_seed)
      : snr_db(snr),
        ae(derive_seed(master_seed, "ae@" + snr_label(snr))),
        gen(derive_seed(master_seed, "gen@" + snr_label(snr))),
        disc(derive_seed(master_seed, "disc@" + snr_label(snr))) {}
};

struct ModelSet {
  std::unique_ptr<GateModel<float>> gate;
  std::vector<std::unique_ptr<AtAtInstance>> instances;  // ascending SNR

  AtAtInstance& instance_for(double snr_db);
  int class_of(double snr_db) const;  // ConfigError when unknown
};

ModelSet make_model_set(const RunConfig& cfg);

void save_models(ModelSet& models, const std::string& dir, bool include_gan = true);
void load_models(ModelSet& models, const std::string& dir, bool need_gan = true);

// ---------------------------------------------------------------------------
// dataset generation
// ---------------------------------------------------------------------------

struct GenerateSummary {
  int train_per_snr = 0;
  int test_per_snr = 0;
  int snr_count = 0;
  double max_snr_error_db = 0.0;  // measured back from the stored f32 blobs
  std::string manifest_path;
};

// Builds the semi-synthetic train/test mixtures into cfg.data_dir. Pools come
// from the optional CSV paths or the built-in sinusoid+burst fixture.
GenerateSummary generate_dataset(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct PhaseTimings {
  double gate_s = 0.0;
  double ae_s = 0.0;
  double tokens_s = 0.0;
  double gan_s = 0.0;
  double total_s = 0.0;
  double preprocessing_fraction = 0.0;  // gate share of total
};

// gate, then per-SNR autoencoder, then per-SNR adversarial training; writes
// checkpoints and loss traces under run_dir.
PhaseTimings train_all(const RunConfig& cfg, const Dataset& ds, ModelSet& models,
                       const std::string& run_dir);

// training-data assembly (shared with tests)
std::vector<TrainPair> ae_pairs_for(const Dataset& ds, double snr_db, const std::string& split);
std::vector<GanItem> gan_items_for(const Dataset& ds, AtAtInstance& inst, double snr_db,
                                   const std::string& split, const RunConfig& cfg);
std::vector<GateExample> gate_examples_for(const Dataset& ds, const RunConfig& cfg,
                                           const std::string& split);

// ---------------------------------------------------------------------------
// denoising
// ---------------------------------------------------------------------------

struct DenoiseResult {
  Segment denoised;           // raw scale
  Eigen::VectorXd ae01;       // autoencoder output in the [0,1] frame
  Eigen::VectorXd spliced01;  // after target-site reconstruction
  NoiseMask mask;
  int gate_class = -1;
  double snr_used = 0.0;
};

DenoiseResult denoise_one(AtAtInstance& inst, const Segment& contaminated, const RunConfig& cfg,
                          bool use_transformer = true);

// gate -> per-SNR instance -> denoise
DenoiseResult denoise_routed(ModelSet& models, const Segment& contaminated,
                             const RunConfig& cfg, bool use_transformer = true);

}  // namespace atat
