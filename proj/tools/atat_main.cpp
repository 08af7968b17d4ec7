#include <CLI11.hpp>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "atat/checkpoint.hpp"
#include "atat/report.hpp"

namespace fs = std::filesystem;
using namespace atat;

namespace {

std::string default_run_dir(uint64_t seed) {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::localtime(&t));
  return "runs/" + std::string(buf) + "-" + std::to_string(seed);
}

struct CliState {
  RunConfig cfg;
  std::string config_path;
  std::vector<double> snr_override;
  bool ae_only = false;
  std::string input_path;
  bool export_masks = false;
};

// defaults -> config file -> explicit flags
void resolve_config(CLI::App& app, CliState& st) {
  if (!st.config_path.empty()) {
    RunConfig file_cfg = load_config_file(st.config_path);
    // flags given on the command line win over the file
    RunConfig flag_cfg = st.cfg;
    st.cfg = file_cfg;
    if (app.count("--seed")) st.cfg.seed = flag_cfg.seed;
    if (app.count("--data-dir")) st.cfg.data_dir = flag_cfg.data_dir;
    if (app.count("--out")) st.cfg.out_dir = flag_cfg.out_dir;
    if (app.count("--models")) st.cfg.models_dir = flag_cfg.models_dir;
    if (app.count("--threads")) st.cfg.threads = flag_cfg.threads;
    if (app.count("--skip-gan")) st.cfg.skip_gan = flag_cfg.skip_gan;
  }
  if (!st.snr_override.empty()) st.cfg.snr_levels = st.snr_override;
  std::sort(st.cfg.snr_levels.begin(), st.cfg.snr_levels.end());
  if (st.cfg.out_dir.empty()) st.cfg.out_dir = default_run_dir(st.cfg.seed);
  if (st.cfg.models_dir.empty())
    st.cfg.models_dir = (fs::path(st.cfg.out_dir) / "checkpoints").string();
  st.cfg.validate();
}

void echo_config(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  require(!ec, Errc::IoError, "cannot create run dir " + cfg.out_dir);
  write_config_file(cfg, (fs::path(cfg.out_dir) / "config_resolved.json").string());
}

void write_timing(const PhaseTimings& t, const std::string& run_dir) {
  std::ofstream os(fs::path(run_dir) / "timing.csv");
  require(os.good(), Errc::IoError, "cannot write timing.csv");
  os.precision(6);
  os << "phase,seconds\n";
  os << "gate," << t.gate_s << "\n";
  os << "autoencoder," << t.ae_s << "\n";
  os << "tokens," << t.tokens_s << "\n";
  os << "adversarial," << t.gan_s << "\n";
  os << "total," << t.total_s << "\n";
  os << "preprocessing_fraction," << t.preprocessing_fraction << "\n";
}

int cmd_generate(CliState& st) {
  echo_config(st.cfg);
  GenerateSummary s = generate_dataset(st.cfg);
  std::cout << "dataset: " << s.manifest_path << "\n"
            << "train pairs per SNR: " << s.train_per_snr << "\n"
            << "test pairs per SNR:  " << s.test_per_snr << "\n"
            << "snr levels:          " << s.snr_count << "\n"
            << "max SNR error (dB, from stored f32): " << s.max_snr_error_db << "\n";
  return 0;
}

int cmd_train(CliState& st, bool do_gate, bool do_ae, bool do_gan) {
  echo_config(st.cfg);
  Dataset ds = load_dataset((fs::path(st.cfg.data_dir) / "manifest.json").string());
  ModelSet models = make_model_set(st.cfg);

  if (do_gate && do_ae && do_gan) {  // full run, single timed pass
    RunConfig cfg = st.cfg;
    PhaseTimings t = train_all(cfg, ds, models, cfg.out_dir);
    write_timing(t, cfg.out_dir);
    std::cout << "checkpoints: " << cfg.models_dir << "\n"
              << "gate " << t.gate_s << " s, ae " << t.ae_s << " s, tokens " << t.tokens_s
              << " s, gan " << t.gan_s << " s, total " << t.total_s << " s\n"
              << "preprocessing fraction: " << t.preprocessing_fraction << "\n";
    return 0;
  }

  // partial phases build on existing checkpoints where required
  std::error_code ec;
  fs::create_directories(st.cfg.models_dir, ec);
  require(!ec, Errc::IoError, "cannot create " + st.cfg.models_dir);
  if (do_gate) {
    auto examples = gate_examples_for(ds, st.cfg, "train");
    GateTrainConfig gc;
    gc.epochs = st.cfg.gate_epochs;
    gc.batch = st.cfg.gate_batch;
    gc.lr = st.cfg.gate_lr;
    gc.seed = derive_seed(st.cfg.seed, "train.gate");
    auto rep = gate_train(*models.gate, examples, gc);
    save_checkpoint(models.gate->params, (fs::path(st.cfg.models_dir) / "gate.atat").string());
    std::cout << "gate final train accuracy: " << rep.epoch_accuracy.back() << "\n";
  }
  if (do_ae) {
    for (auto& inst : models.instances) {
      const std::string label = snr_label(inst->snr_db);
      AeTrainConfig ac;
      ac.epochs = st.cfg.ae_epochs;
      ac.batch = st.cfg.ae_batch;
      ac.lr = st.cfg.ae_lr;
      ac.seed = derive_seed(st.cfg.seed, "train.ae@" + label);
      auto rep = ae_train(inst->ae, ae_pairs_for(ds, inst->snr_db, "train"), ac);
      save_checkpoint(inst->ae.params,
                      (fs::path(st.cfg.models_dir) / ("ae_snr" + label + ".atat")).string());
      std::cout << "ae@" << label << " loss " << rep.epoch_loss.front() << " -> "
                << rep.epoch_loss.back() << "\n";
    }
  }
  if (do_gan) {
    for (auto& inst : models.instances) {
      const std::string label = snr_label(inst->snr_db);
      load_checkpoint(inst->ae.params,
                      (fs::path(st.cfg.models_dir) / ("ae_snr" + label + ".atat")).string());
      auto items = gan_items_for(ds, *inst, inst->snr_db, "train", st.cfg);
      GanConfig gc;
      gc.cycles_per_iteration = st.cfg.gan_cycles;
      gc.epochs = st.cfg.gan_epochs;
      gc.batch = st.cfg.gan_batch;
      gc.lr = st.cfg.gan_lr;
      gc.adv_weight = st.cfg.adv_weight;
      gc.recon_weight = st.cfg.recon_weight;
      gc.seed = derive_seed(st.cfg.seed, "train.gan@" + label);
      auto rep = gan_train(inst->gen, inst->disc, items, gc);
      save_checkpoint(inst->gen.params,
                      (fs::path(st.cfg.models_dir) / ("gen_snr" + label + ".atat")).string());
      save_checkpoint(inst->disc.params,
                      (fs::path(st.cfg.models_dir) / ("disc_snr" + label + ".atat")).string());
      fs::create_directories(fs::path(st.cfg.out_dir) / "traces");
      std::ofstream ts(fs::path(st.cfg.out_dir) / "traces" / ("gan_snr" + label + ".csv"));
      ts.precision(10);
      ts << "iteration,gen_loss,disc_loss,recon_cc\n";
      for (const auto& r : rep.trace)
        ts << r.iteration << "," << r.gen_loss << "," << r.disc_loss << "," << r.recon_cc
           << "\n";
      std::cout << "gan@" << label << " " << rep.gen_steps << " generator / "
                << rep.disc_steps << " discriminator steps, recon CC "
                << rep.trace.front().recon_cc << " -> " << rep.trace.back().recon_cc << "\n";
    }
  }
  return 0;
}

int cmd_denoise(CliState& st) {
  echo_config(st.cfg);
  require(!st.input_path.empty(), Errc::InvalidConfig, "denoise needs --input");
  ModelSet models = make_model_set(st.cfg);
  load_models(models, st.cfg.models_dir, /*need_gan=*/!st.ae_only);

  std::vector<Segment> inputs;
  if (st.input_path.size() > 4 && st.input_path.substr(st.input_path.size() - 4) == ".csv") {
    inputs = load_csv_segments(st.input_path, SegmentKind::Contaminated, "in");
  } else {
    Dataset ds = load_dataset(st.input_path);
    for (const Segment* s : ds.of_kind(SegmentKind::Contaminated)) inputs.push_back(*s);
  }
  require(!inputs.empty(), Errc::InvalidDataset, "no contaminated segments in input");

  std::vector<Segment> outputs(inputs.size());
  std::vector<NoiseMask> masks(inputs.size());
  parallel_for(static_cast<int64_t>(inputs.size()), st.cfg.threads, [&](int64_t i) {
    DenoiseResult r = denoise_routed(models, inputs[static_cast<size_t>(i)], st.cfg,
                                     /*use_transformer=*/!st.ae_only);
    outputs[static_cast<size_t>(i)] = std::move(r.denoised);
    masks[static_cast<size_t>(i)] = std::move(r.mask);
  });

  const std::string out_csv = (fs::path(st.cfg.out_dir) / "denoised.csv").string();
  save_csv_segments(outputs, out_csv);
  if (st.export_masks) {
    fs::create_directories(fs::path(st.cfg.out_dir) / "masks");
    for (size_t i = 0; i < masks.size(); ++i) {
      export_mask_csv(masks[i],
                      (fs::path(st.cfg.out_dir) / "masks" / ("mask_" + std::to_string(i) + ".csv"))
                          .string());
      export_profile_csv(masks[i].source_profile,
                         (fs::path(st.cfg.out_dir) / "masks" /
                          ("profile_" + std::to_string(i) + ".csv"))
                             .string());
    }
  }
  std::cout << "denoised " << outputs.size() << " segments -> " << out_csv << "\n";
  return 0;
}

int cmd_eval(CliState& st) {
  echo_config(st.cfg);
  Dataset ds = load_dataset((fs::path(st.cfg.data_dir) / "manifest.json").string());
  ModelSet models = make_model_set(st.cfg);
  load_models(models, st.cfg.models_dir, /*need_gan=*/!st.ae_only);
  MetricsReport rep = run_benchmark(models, ds, st.cfg, /*use_transformer=*/!st.ae_only);
  const std::string report_dir = (fs::path(st.cfg.out_dir) / "report").string();
  emit_report(rep, report_dir);
  std::cout << "report: " << report_dir << "\n";
  for (const auto& a : rep.aggregates)
    std::cout << "snr " << snr_label(a.snr_db) << " dB: n=" << a.n << " CC=" << a.cc.mean
              << " [" << a.cc.ci_low << ", " << a.cc.ci_high << "]"
              << " tRRMSE=" << a.trrmse.mean << " sRRMSE=" << a.srrmse.mean
              << " gate_acc=" << a.gate_accuracy << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AT-AT: autoencoder-targeted adversarial transformer EEG denoiser"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  CliState st;
  app.add_option("--config", st.config_path, "JSON config file");
  app.add_option("--seed", st.cfg.seed, "master run seed");
  app.add_option("--snr", st.snr_override, "SNR levels in dB")->delimiter(',');
  app.add_option("--data-dir", st.cfg.data_dir, "dataset directory");
  app.add_option("--out", st.cfg.out_dir, "run output directory");
  app.add_option("--models", st.cfg.models_dir, "checkpoint directory");
  app.add_option("--threads", st.cfg.threads, "per-segment worker threads");
  app.add_flag("--skip-gan", st.cfg.skip_gan, "train without the adversarial stage");

  auto* generate = app.add_subcommand("generate", "build semi-synthetic train/test mixtures");
  auto* train_all_cmd = app.add_subcommand("train-all", "train gate, autoencoders and GANs");
  auto* train_ae = app.add_subcommand("train-ae", "train the per-SNR autoencoders");
  auto* train_gan = app.add_subcommand("train-gan", "adversarial stage (needs AE checkpoints)");
  auto* train_gate = app.add_subcommand("train-gate", "train the SNR gate");
  auto* denoise = app.add_subcommand("denoise", "denoise contaminated segments");
  denoise->add_option("--input", st.input_path, "CSV (512 cols/row) or dataset manifest");
  denoise->add_flag("--ae-only", st.ae_only, "skip the transformer stage");
  denoise->add_flag("--export-masks", st.export_masks, "write per-segment mask/profile CSVs");
  auto* eval = app.add_subcommand("eval", "run the benchmark suite and emit the report");
  eval->add_flag("--ae-only", st.ae_only, "evaluate the autoencoder alone");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors are exit 1; --help is 0
  }

  try {
    resolve_config(app, st);
    if (generate->parsed()) return cmd_generate(st);
    if (train_all_cmd->parsed()) return cmd_train(st, true, true, true);  // skip_gan honored inside
    if (train_ae->parsed()) return cmd_train(st, false, true, false);
    if (train_gan->parsed()) return cmd_train(st, false, false, true);
    if (train_gate->parsed()) return cmd_train(st, true, false, false);
    if (denoise->parsed()) return cmd_denoise(st);
    if (eval->parsed()) return cmd_eval(st);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::DivergenceError: return 3;
      case Errc::InvalidConfig: return 1;
      default: return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
