#include "atat/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "atat/checkpoint.hpp"
#include "atat/synth.hpp"

namespace fs = std::filesystem;

namespace atat {

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void write_trace_csv(const std::string& path, const std::string& header,
                     const std::vector<std::vector<double>>& rows) {
  std::ofstream os(path);
  require(os.good(), Errc::IoError, "cannot write trace " + path);
  os.precision(10);
  os << header << "\n";
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  }
}

}  // namespace

AtAtInstance& ModelSet::instance_for(double snr_db) {
  for (auto& inst : instances)
    if (std::abs(inst->snr_db - snr_db) < 1e-9) return *inst;
  fail(Errc::ConfigError, "no trained AT-AT instance for SNR " + snr_label(snr_db));
}

int ModelSet::class_of(double snr_db) const {
  for (size_t i = 0; i < instances.size(); ++i)
    if (std::abs(instances[i]->snr_db - snr_db) < 1e-9) return static_cast<int>(i);
  fail(Errc::ConfigError, "SNR " + snr_label(snr_db) + " is not in the class set");
}

ModelSet make_model_set(const RunConfig& cfg) {
  cfg.validate();
  ModelSet ms;
  GateConfig gc;
  gc.num_classes = static_cast<Index>(cfg.snr_levels.size());
  ms.gate = std::make_unique<GateModel<float>>(derive_seed(cfg.seed, "gate"), gc);
  for (double snr : cfg.snr_levels)
    ms.instances.push_back(std::make_unique<AtAtInstance>(snr, cfg.seed));
  return ms;
}

void save_models(ModelSet& models, const std::string& dir, bool include_gan) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::IoError, "cannot create checkpoint dir " + dir);
  save_checkpoint(models.gate->params, (fs::path(dir) / "gate.atat").string());
  for (auto& inst : models.instances) {
    const std::string label = snr_label(inst->snr_db);
    save_checkpoint(inst->ae.params, (fs::path(dir) / ("ae_snr" + label + ".atat")).string());
    if (include_gan) {
      save_checkpoint(inst->gen.params, (fs::path(dir) / ("gen_snr" + label + ".atat")).string());
      save_checkpoint(inst->disc.params,
                      (fs::path(dir) / ("disc_snr" + label + ".atat")).string());
    }
  }
}

void load_models(ModelSet& models, const std::string& dir, bool need_gan) {
  load_checkpoint(models.gate->params, (fs::path(dir) / "gate.atat").string());
  for (auto& inst : models.instances) {
    const std::string label = snr_label(inst->snr_db);
    load_checkpoint(inst->ae.params, (fs::path(dir) / ("ae_snr" + label + ".atat")).string());
    if (need_gan) {
      load_checkpoint(inst->gen.params, (fs::path(dir) / ("gen_snr" + label + ".atat")).string());
      load_checkpoint(inst->disc.params,
                      (fs::path(dir) / ("disc_snr" + label + ".atat")).string());
    }
  }
}

// ---------------------------------------------------------------------------
// dataset generation
// ---------------------------------------------------------------------------

GenerateSummary generate_dataset(const RunConfig& cfg) {
  cfg.validate();
  const int eeg_needed = cfg.train_pairs_per_snr + cfg.test_pairs_per_snr;

  std::vector<Segment> eeg_pool, emg_pool;
  if (!cfg.eeg_csv.empty()) {
    eeg_pool = load_csv_segments(cfg.eeg_csv, SegmentKind::CleanEEG, "eeg_src");
    require(static_cast<int>(eeg_pool.size()) >= eeg_needed, Errc::InvalidDataset,
            "EEG CSV pool smaller than train+test demand");
  } else {
    Rng rng(derive_seed(cfg.seed, "pool.eeg"));
    eeg_pool = make_synthetic_pool(SegmentKind::CleanEEG, eeg_needed, rng, "eeg_src");
  }
  if (!cfg.emg_csv.empty()) {
    emg_pool = load_csv_segments(cfg.emg_csv, SegmentKind::EMGArtifact, "emg_src");
    require(static_cast<int>(emg_pool.size()) >= 4, Errc::InvalidDataset,
            "EMG CSV pool too small");
  } else {
    Rng rng(derive_seed(cfg.seed, "pool.emg"));
    emg_pool = make_synthetic_pool(SegmentKind::EMGArtifact, cfg.emg_pool, rng, "emg_src");
  }

  // high-variance EMG selection: top variance quartile of the artifact pool
  const std::vector<size_t> quartile = high_variance_quartile(emg_pool);

  Dataset ds;
  // re-id pools into the dataset namespace
  const int n_train = cfg.train_pairs_per_snr, n_test = cfg.test_pairs_per_snr;
  for (int i = 0; i < n_train; ++i) {
    Segment s = eeg_pool[static_cast<size_t>(i)];
    s.id = "eeg_train:" + std::to_string(i);
    ds.segments.push_back(std::move(s));
  }
  for (int i = 0; i < n_test; ++i) {
    Segment s = eeg_pool[static_cast<size_t>(n_train + i)];
    s.id = "eeg_test:" + std::to_string(i);
    ds.segments.push_back(std::move(s));
  }
  for (size_t i = 0; i < emg_pool.size(); ++i) {
    Segment s = emg_pool[i];
    s.id = "emg:" + std::to_string(i);
    ds.segments.push_back(std::move(s));
  }
  ds.rebuild_index();

  ds.manifest.entries.push_back(
      {"eeg_train.f32", SegmentKind::CleanEEG, n_train, "le", "f32", "eeg_train"});
  ds.manifest.entries.push_back(
      {"eeg_test.f32", SegmentKind::CleanEEG, n_test, "le", "f32", "eeg_test"});
  ds.manifest.entries.push_back({"emg.f32", SegmentKind::EMGArtifact,
                                 static_cast<int64_t>(emg_pool.size()), "le", "f32", "emg"});

  Rng pick(derive_seed(cfg.seed, "pairing"));
  for (double snr : cfg.snr_levels) {
    const std::string label = snr_label(snr);
    for (const std::string& split : {std::string("train"), std::string("test")}) {
      const int count = split == "train" ? n_train : n_test;
      const std::string eeg_prefix = split == "train" ? "eeg_train" : "eeg_test";
      const std::string mix_prefix = "mix_" + split + "_" + label;
      std::vector<Segment> mixes(static_cast<size_t>(count));
      std::vector<PairRecord> records(static_cast<size_t>(count));
      // pairing choices are sequential (RNG), the mixes themselves pure
      std::vector<size_t> emg_choice(static_cast<size_t>(count));
      for (int i = 0; i < count; ++i)
        emg_choice[static_cast<size_t>(i)] =
            quartile[static_cast<size_t>(pick.uniform_int(static_cast<int64_t>(quartile.size())))];
      parallel_for(count, cfg.threads, [&](int64_t i) {
        const Segment& eeg = ds.by_id(eeg_prefix + ":" + std::to_string(i));
        const Segment& emg = ds.by_id("emg:" + std::to_string(emg_choice[static_cast<size_t>(i)]));
        MixResult res = mix(eeg, emg, snr, NormMode::MinMax01);
        Segment raw;
        raw.samples = denormalize(res.contaminated.samples, res.norm);
        raw.kind = SegmentKind::Contaminated;
        raw.id = mix_prefix + ":" + std::to_string(i);
        records[static_cast<size_t>(i)] = {eeg.id, emg.id, snr, raw.id, split};
        mixes[static_cast<size_t>(i)] = std::move(raw);
      });
      for (auto& m : mixes) ds.segments.push_back(std::move(m));
      for (auto& r : records) ds.manifest.pairing.push_back(std::move(r));
      ds.manifest.entries.push_back(
          {mix_prefix + ".f32", SegmentKind::Contaminated, count, "le", "f32", mix_prefix});
    }
  }
  ds.rebuild_index();

  GenerateSummary summary;
  summary.train_per_snr = n_train;
  summary.test_per_snr = n_test;
  summary.snr_count = static_cast<int>(cfg.snr_levels.size());
  summary.manifest_path = save_dataset(ds, cfg.data_dir);

  // verify SNR from the stored f32 blobs
  Dataset stored = load_dataset(summary.manifest_path);
  double max_err = 0.0;
  for (const auto& p : stored.manifest.pairing) {
    const Segment& eeg = stored.by_id(p.eeg_id);
    const Segment& mixseg = stored.by_id(p.mix_id);
    const Eigen::VectorXd noise = mixseg.samples - eeg.samples;
    const double measured = measure_snr_db(eeg.samples, noise);
    max_err = std::max(max_err, std::abs(measured - p.snr_db));
  }
  summary.max_snr_error_db = max_err;
  return summary;
}

// ---------------------------------------------------------------------------
// training-data assembly
// ---------------------------------------------------------------------------

std::vector<TrainPair> ae_pairs_for(const Dataset& ds, double snr_db, const std::string& split) {
  std::vector<TrainPair> out;
  for (const auto& p : ds.manifest.pairing) {
    if (p.split != split || std::abs(p.snr_db - snr_db) > 1e-9) continue;
    const Segment& mixseg = ds.by_id(p.mix_id);
    const Segment& clean = ds.by_id(p.eeg_id);
    auto [y01, st] = normalize(mixseg.samples, NormMode::MinMax01);
    TrainPair tp;
    tp.contaminated01 = std::move(y01);
    tp.clean01 = ((clean.samples.array() - st.offset) / st.scale).matrix();
    out.push_back(std::move(tp));
  }
  require(!out.empty(), Errc::InvalidDataset,
          "no " + split + " pairs at SNR " + snr_label(snr_db));
  return out;
}

namespace {

// The correlation objective trains shape, not scale, so the reconstruction
// leaves the sigmoid with an arbitrary gain. Under the mixing model
// y = x + lambda*n with rms(x)/rms(lambda*n) = r = 10^(snr/10) and x
// uncorrelated with n, the clean signal's standard deviation inside the
// mixture frame is sigma_y * r / sqrt(1 + r^2). Rescale the spliced output
// to that amplitude, centred so the raw-scale output is zero-mean
// (scalp EEG is AC-coupled; the mixture mean is mostly artifact offset).
Eigen::VectorXd calibrate_amplitude(const Eigen::VectorXd& spliced01,
                                    const Eigen::VectorXd& y01, double snr_db,
                                    const NormState& st) {
  const double n = static_cast<double>(spliced01.size());
  const double mean_s = spliced01.mean();
  const double std_s = std::sqrt((spliced01.array() - mean_s).square().sum() / n);
  if (std_s < 1e-9) return spliced01;
  const double mean_y = y01.mean();
  const double std_y = std::sqrt((y01.array() - mean_y).square().sum() / n);
  const double r = std::pow(10.0, snr_db / 10.0);
  const double target_std = std_y * r / std::sqrt(1.0 + r * r);
  const double zero_in_frame = (0.0 - st.offset) / st.scale;
  return ((spliced01.array() - mean_s) * (target_std / std_s) + zero_in_frame).matrix();
}

}  // namespace

std::vector<GanItem> gan_items_for(const Dataset& ds, AtAtInstance& inst, double snr_db,
                                   const std::string& split, const RunConfig& cfg) {
  std::vector<const PairRecord*> records;
  for (const auto& p : ds.manifest.pairing)
    if (p.split == split && std::abs(p.snr_db - snr_db) < 1e-9) records.push_back(&p);
  require(!records.empty(), Errc::InvalidDataset,
          "no " + split + " pairs at SNR " + snr_label(snr_db));

  const int aug = cfg.gan_augment;
  const int mask_aug = cfg.gan_mask_aug;
  const int variants = aug * mask_aug;
  std::vector<GanItem> items(records.size() * static_cast<size_t>(variants));
  parallel_for(static_cast<int64_t>(items.size()), cfg.threads, [&](int64_t idx) {
    const PairRecord& p = *records[static_cast<size_t>(idx) / static_cast<size_t>(variants)];
    const int variant = static_cast<int>(idx % variants);
    const int sig_variant = variant % aug;
    const int mask_variant = variant / aug;
    Eigen::VectorXd mix_raw = ds.by_id(p.mix_id).samples;
    Eigen::VectorXd clean_raw = ds.by_id(p.eeg_id).samples;
    if (sig_variant & 1) {  // time reversal
      mix_raw.reverseInPlace();
      clean_raw.reverseInPlace();
    }
    if (sig_variant & 2) {  // polarity flip
      mix_raw = -mix_raw;
      clean_raw = -clean_raw;
    }
    auto [y01, st] = normalize(mix_raw, NormMode::MinMax01);
    GanItem it;
    it.ae01 = ae_denoise(inst.ae, y01);
    NoiseProfile prof = windowed_cc(y01, it.ae01, cfg.window_len, cfg.stride, cfg.threshold);
    NoiseMask mask = build_mask(prof);
    if (mask_variant > 0) {
      // densify supervision: add random masked windows on top of the proxy
      // mask (training-time only; evaluation always uses the proxy mask)
      Rng mrng(derive_seed(cfg.seed, "maskaug@" + p.mix_id + "#" + std::to_string(variant)));
      const int extra = 3 + static_cast<int>(mrng.uniform_int(4));
      for (int e = 0; e < extra; ++e) {
        const int start = static_cast<int>(mrng.uniform_int(kSegmentLen - cfg.window_len));
        for (int i = start; i < start + cfg.window_len; ++i)
          mask.mask[static_cast<size_t>(i)] = true;
      }
    }
    TokenStream ts = tokenize(y01, it.ae01, mask);
    it.tokens = std::move(ts.tokens);
    it.mask = mask.mask;
    it.clean01 = ((clean_raw.array() - st.offset) / st.scale).matrix();
    it.splice_weights = splice_weights(mask.mask, cfg.crossfade);
    items[static_cast<size_t>(idx)] = std::move(it);
  });
  return items;
}

std::vector<GateExample> gate_examples_for(const Dataset& ds, const RunConfig& cfg,
                                           const std::string& split) {
  std::vector<GateExample> out;
  for (const auto& p : ds.manifest.pairing) {
    if (p.split != split) continue;
    int label = -1;
    for (size_t i = 0; i < cfg.snr_levels.size(); ++i)
      if (std::abs(cfg.snr_levels[i] - p.snr_db) < 1e-9) label = static_cast<int>(i);
    require(label >= 0, Errc::InvalidDataset,
            "pairing SNR " + snr_label(p.snr_db) + " not in the configured class set");
    const Segment& mixseg = ds.by_id(p.mix_id);
    auto [z, st] = normalize(mixseg.samples, NormMode::ZScore);
    out.push_back({std::move(z), label});
  }
  require(!out.empty(), Errc::InvalidDataset, "no " + split + " gate examples");
  return out;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

PhaseTimings train_all(const RunConfig& cfg, const Dataset& ds, ModelSet& models,
                       const std::string& run_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(fs::path(run_dir) / "traces", ec);
  require(!ec, Errc::IoError, "cannot create run dir " + run_dir);

  PhaseTimings t;
  const double t0 = now_s();

  {  // SNR gate
    auto examples = gate_examples_for(ds, cfg, "train");
    GateTrainConfig gc;
    gc.epochs = cfg.gate_epochs;
    gc.batch = cfg.gate_batch;
    gc.lr = cfg.gate_lr;
    gc.seed = derive_seed(cfg.seed, "train.gate");
    auto rep = gate_train(*models.gate, examples, gc);
    std::vector<std::vector<double>> rows;
    for (size_t e = 0; e < rep.epoch_accuracy.size(); ++e)
      rows.push_back({static_cast<double>(e), rep.epoch_accuracy[e], rep.epoch_loss[e]});
    write_trace_csv((fs::path(run_dir) / "traces" / "gate_accuracy.csv").string(),
                    "epoch,accuracy,loss", rows);
    t.gate_s = now_s() - t0;
  }

  for (auto& inst : models.instances) {
    const std::string label = snr_label(inst->snr_db);
    const double ta = now_s();
    {
      auto pairs = ae_pairs_for(ds, inst->snr_db, "train");
      AeTrainConfig ac;
      ac.epochs = cfg.ae_epochs;
      ac.batch = cfg.ae_batch;
      ac.lr = cfg.ae_lr;
      ac.seed = derive_seed(cfg.seed, "train.ae@" + label);
      auto rep = ae_train(inst->ae, pairs, ac);
      std::vector<std::vector<double>> rows;
      for (size_t e = 0; e < rep.epoch_loss.size(); ++e)
        rows.push_back({static_cast<double>(e), rep.epoch_loss[e]});
      write_trace_csv((fs::path(run_dir) / "traces" / ("ae_snr" + label + ".csv")).string(),
                      "epoch,cc_loss", rows);
    }
    t.ae_s += now_s() - ta;

    if (!cfg.skip_gan) {
      const double tk = now_s();
      auto items = gan_items_for(ds, *inst, inst->snr_db, "train", cfg);
      t.tokens_s += now_s() - tk;

      const double tg = now_s();
      GanConfig gcfg;
      gcfg.cycles_per_iteration = cfg.gan_cycles;
      gcfg.epochs = cfg.gan_epochs;
      gcfg.batch = cfg.gan_batch;
      gcfg.lr = cfg.gan_lr;
      gcfg.adv_weight = cfg.adv_weight;
      gcfg.recon_weight = cfg.recon_weight;
      gcfg.seed = derive_seed(cfg.seed, "train.gan@" + label);
      auto rep = gan_train(inst->gen, inst->disc, items, gcfg);
      std::vector<std::vector<double>> rows;
      for (const auto& r : rep.trace)
        rows.push_back({static_cast<double>(r.iteration), r.gen_loss, r.disc_loss, r.recon_cc});
      write_trace_csv((fs::path(run_dir) / "traces" / ("gan_snr" + label + ".csv")).string(),
                      "iteration,gen_loss,disc_loss,recon_cc", rows);
      t.gan_s += now_s() - tg;
    }
  }

  save_models(models, (fs::path(run_dir) / "checkpoints").string(), !cfg.skip_gan);
  t.total_s = now_s() - t0;
  t.preprocessing_fraction = t.total_s > 0 ? t.gate_s / t.total_s : 0.0;
  return t;
}

// ---------------------------------------------------------------------------
// denoising
// ---------------------------------------------------------------------------

DenoiseResult denoise_one(AtAtInstance& inst, const Segment& contaminated, const RunConfig& cfg,
                          bool use_transformer) {
  validate_segment(contaminated);
  DenoiseResult out;
  out.snr_used = inst.snr_db;

  auto [y01, st] = normalize(contaminated.samples, NormMode::MinMax01);
  out.ae01 = ae_denoise(inst.ae, y01);
  NoiseProfile prof = windowed_cc(y01, out.ae01, cfg.window_len, cfg.stride, cfg.threshold);
  out.mask = build_mask(prof);

  if (use_transformer) {
    TokenStream ts = tokenize(y01, out.ae01, out.mask);
    Tensor<float> tokens({1, kSegmentLen, 2});
    Tensor<float> flags({kSegmentLen});
    for (int i = 0; i < kSegmentLen; ++i) {
      tokens[i * 2 + 0] = static_cast<float>(ts.tokens(i, 0));
      tokens[i * 2 + 1] = static_cast<float>(ts.tokens(i, 1));
      flags[i] = out.mask.mask[static_cast<size_t>(i)] ? 1.0f : 0.0f;
    }
    Tensor<float> gen_out = inst.gen.infer(tokens, flags);
    Eigen::VectorXd tr(kSegmentLen);
    for (int i = 0; i < kSegmentLen; ++i) tr[i] = static_cast<double>(gen_out[i]);
    Segment spliced = splice(out.ae01, tr, out.mask, cfg.crossfade, contaminated.id);
    out.spliced01 = spliced.samples;
  } else {
    out.spliced01 = out.ae01;
  }

  out.denoised.samples =
      denormalize(calibrate_amplitude(out.spliced01, y01, inst.snr_db, st), st);
  out.denoised.kind = SegmentKind::Denoised;
  out.denoised.rate_hz = contaminated.rate_hz;
  out.denoised.id = contaminated.id;
  return out;
}

DenoiseResult denoise_routed(ModelSet& models, const Segment& contaminated,
                             const RunConfig& cfg, bool use_transformer) {
  auto [z, st] = normalize(contaminated.samples, NormMode::ZScore);
  const auto probs = models.gate->infer_probs(z);
  const int cls = gate_pick_class(probs);
  require(cls < static_cast<int>(models.instances.size()), Errc::ConfigError,
          "gate class has no trained instance");
  DenoiseResult out = denoise_one(*models.instances[static_cast<size_t>(cls)], contaminated,
                                  cfg, use_transformer);
  out.gate_class = cls;
  return out;
}

}  // namespace atat
