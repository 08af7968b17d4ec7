#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "atat/adam.hpp"
#include "atat/models.hpp"
#include "atat/target_mask.hpp"

// Training loops for the three networks. All loops draw their randomness
// (shuffles, dropout) from streams derived from one seed and iterate full
// batches only, so identical seeds give bitwise identical checkpoints.

namespace atat {

template <class S>
Tensor<S> batch_from_rows(const std::vector<const Eigen::VectorXd*>& rows, Shape shape) {
  Tensor<S> out(std::move(shape));
  Index off = 0;
  for (const auto* r : rows) {
    for (Eigen::Index i = 0; i < r->size(); ++i) out[off + i] = static_cast<S>((*r)[i]);
    off += r->size();
  }
  require(off == out.size(), Errc::ShapeError, "batch assembly size mismatch");
  return out;
}

inline void check_finite_loss(double v, const std::string& where) {
  require(std::isfinite(v), Errc::DivergenceError, "non-finite loss in " + where);
}

// ---------------------------------------------------------------------------
// autoencoder
// ---------------------------------------------------------------------------

struct AeTrainConfig {
  int epochs = 10;
  int batch = 20;
  double lr = 1e-4;
  uint64_t seed = 1;
};

struct TrainPair {
  Eigen::VectorXd contaminated01;  // MinMax01-normalized mixture
  Eigen::VectorXd clean01;         // clean signal mapped into the same frame
};

struct AeTrainReport {
  std::vector<double> epoch_loss;  // mean (1 - CC) per epoch
};

template <class S>
AeTrainReport ae_train(Autoencoder<S>& model, const std::vector<TrainPair>& pairs,
                       const AeTrainConfig& cfg) {
  require(static_cast<int>(pairs.size()) >= cfg.batch, Errc::InvalidDataset,
          "autoencoder training needs at least one full batch");
  require(cfg.batch >= 2, Errc::InvalidBatch, "batch must be >= 2 for batch norm");

  Rng shuffle_rng(derive_seed(cfg.seed, "ae.shuffle"));
  AdamState<S> opt(static_cast<S>(cfg.lr));
  AeTrainReport report;

  std::vector<size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const Index b = cfg.batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start + static_cast<size_t>(b) <= order.size();
         start += static_cast<size_t>(b)) {
      std::vector<const Eigen::VectorXd*> xs, ts;
      for (Index i = 0; i < b; ++i) {
        const TrainPair& p = pairs[order[start + static_cast<size_t>(i)]];
        xs.push_back(&p.contaminated01);
        ts.push_back(&p.clean01);
      }
      Graph<S> g;
      Var<S> x = g.constant(batch_from_rows<S>(xs, {b, 1, kSegmentLen}));
      Var<S> y = model.forward(g, x, Mode::Train);
      Var<S> y2 = reshape(y, {b, static_cast<Index>(kSegmentLen)});
      Var<S> loss = cc_loss(y2, batch_from_rows<S>(ts, {b, kSegmentLen}), kSegmentLen);
      const double lv = static_cast<double>(g.val(loss)[0]);
      check_finite_loss(lv, "ae_train");
      model.params.zero_grad();
      g.backward(loss);
      adam_step(model.params, opt);
      epoch_loss += lv;
      ++batches;
    }
    report.epoch_loss.push_back(epoch_loss / batches);
  }
  return report;
}

// Normalized single-segment pass; input must already live in [0,1].
template <class S>
Eigen::VectorXd ae_denoise(Autoencoder<S>& model, const Eigen::VectorXd& x01) {
  require(x01.size() == kSegmentLen, Errc::ShapeError, "ae input length");
  require(x01.minCoeff() > -1e-6 && x01.maxCoeff() < 1.0 + 1e-6, Errc::NormalizationError,
          "autoencoder input must be MinMax01-normalized");
  Tensor<S> x({1, 1, kSegmentLen});
  for (int i = 0; i < kSegmentLen; ++i) x[i] = static_cast<S>(x01[i]);
  Tensor<S> y = model.infer(x);
  Eigen::VectorXd out(kSegmentLen);
  for (int i = 0; i < kSegmentLen; ++i) out[i] = static_cast<double>(y[i]);
  return out;
}

// ---------------------------------------------------------------------------
// adversarial transformer
// ---------------------------------------------------------------------------

struct GanConfig {
  int cycles_per_iteration = 5;
  int epochs = 10;
  int batch = 20;
  double lr = 1e-4;
  double adv_weight = 1.0;
  double recon_weight = 1.0;
  uint64_t seed = 1;

  void validate() const {
    require(cycles_per_iteration >= 1, Errc::InvalidConfig, "cycles_per_iteration must be >= 1");
    require(adv_weight >= 0.0 && recon_weight >= 0.0 && (adv_weight > 0.0 || recon_weight > 0.0),
            Errc::InvalidConfig, "loss weights must be non-negative and not both zero");
  }
};

// Precomputed per-segment inputs with the autoencoder frozen upstream.
struct GanItem {
  Eigen::MatrixXd tokens;          // [512 x 2], masked rows zeroed
  std::vector<bool> mask;          // target sites
  Eigen::VectorXd ae01;            // autoencoder output in the [0,1] frame
  Eigen::VectorXd clean01;         // clean signal in the same frame
  Eigen::VectorXd splice_weights;  // per-sample transformer blend weight
};

struct GanTraceRow {
  int iteration = 0;
  double gen_loss = 0.0;
  double disc_loss = 0.0;
  double recon_cc = 0.0;
};

struct GanTrainReport {
  std::vector<GanTraceRow> trace;  // one row per batch iteration
  long gen_steps = 0;
  long disc_steps = 0;
};

template <class S>
GanTrainReport gan_train(Generator<S>& gen, Discriminator<S>& disc,
                         const std::vector<GanItem>& items, const GanConfig& cfg) {
  cfg.validate();
  require(static_cast<int>(items.size()) >= cfg.batch, Errc::InvalidDataset,
          "gan training needs at least one full batch");

  Rng shuffle_rng(derive_seed(cfg.seed, "gan.shuffle"));
  Rng drop_rng(derive_seed(cfg.seed, "gan.dropout"));
  AdamState<S> gen_opt(static_cast<S>(cfg.lr));
  AdamState<S> disc_opt(static_cast<S>(cfg.lr));
  GanTrainReport report;

  std::vector<size_t> order(items.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const Index b = cfg.batch;
  int iteration = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start + static_cast<size_t>(b) <= order.size();
         start += static_cast<size_t>(b)) {
      // assemble fixed batch tensors
      Tensor<S> tokens({b, kSegmentLen, 2});
      Tensor<S> mask_flags({b * kSegmentLen});
      Tensor<S> ae01({b, kSegmentLen});
      Tensor<S> clean01({b, kSegmentLen});
      Tensor<S> weights({b, kSegmentLen});
      for (Index i = 0; i < b; ++i) {
        const GanItem& it = items[order[start + static_cast<size_t>(i)]];
        for (int t = 0; t < kSegmentLen; ++t) {
          tokens[(i * kSegmentLen + t) * 2 + 0] = static_cast<S>(it.tokens(t, 0));
          tokens[(i * kSegmentLen + t) * 2 + 1] = static_cast<S>(it.tokens(t, 1));
          mask_flags[i * kSegmentLen + t] = it.mask[static_cast<size_t>(t)] ? S(1) : S(0);
          ae01[i * kSegmentLen + t] = static_cast<S>(it.ae01[t]);
          clean01[i * kSegmentLen + t] = static_cast<S>(it.clean01[t]);
          weights[i * kSegmentLen + t] = static_cast<S>(it.splice_weights[t]);
        }
      }

      GanTraceRow row;
      row.iteration = iteration;
      for (int cycle = 0; cycle < cfg.cycles_per_iteration; ++cycle) {
        Tensor<S> spliced_detached;
        {  // generator update
          Graph<S> g;
          Var<S> yhat = gen.forward(g, g.constant(tokens), mask_flags);
          Var<S> spliced = blend(g.constant(ae01), yhat, weights);
          Var<S> recon = cc_loss(spliced, clean01, kSegmentLen);
          Var<S> loss = scale(recon, static_cast<S>(cfg.recon_weight));
          if (cfg.adv_weight > 0.0) {
            Var<S> d_fake = disc.forward(g, standardize(spliced, kSegmentLen), Mode::Train,
                                         drop_rng, /*frozen=*/true);
            loss = add(loss, scale(bce(d_fake, S(1)), static_cast<S>(cfg.adv_weight)));
          }
          const double lv = static_cast<double>(g.val(loss)[0]);
          check_finite_loss(lv, "gan generator step");
          gen.params.zero_grad();
          g.backward(loss);
          adam_step(gen.params, gen_opt);
          ++report.gen_steps;
          row.gen_loss = lv;
          row.recon_cc = 1.0 - static_cast<double>(g.val(recon)[0]);
          spliced_detached = g.val(spliced);
        }
        {  // discriminator update on real vs the detached fake
          Graph<S> g;
          Var<S> d_real = disc.forward(g, standardize(g.constant(clean01), kSegmentLen),
                                       Mode::Train, drop_rng);
          Var<S> d_fake = disc.forward(g, standardize(g.constant(spliced_detached), kSegmentLen),
                                       Mode::Train, drop_rng);
          Var<S> loss = add(bce(d_real, S(1)), bce(d_fake, S(0)));
          const double lv = static_cast<double>(g.val(loss)[0]);
          check_finite_loss(lv, "gan discriminator step");
          disc.params.zero_grad();
          g.backward(loss);
          adam_step(disc.params, disc_opt);
          ++report.disc_steps;
          row.disc_loss = lv;
        }
      }
      report.trace.push_back(row);
      ++iteration;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// SNR gate
// ---------------------------------------------------------------------------

struct GateTrainConfig {
  int epochs = 100;
  int batch = 100;
  double lr = 1e-3;
  uint64_t seed = 1;
};

struct GateExample {
  Eigen::VectorXd zscored;  // contaminated segment, z-score normalized
  int label = 0;            // index into the SNR class set
};

struct GateTrainReport {
  std::vector<double> epoch_accuracy;
  std::vector<double> epoch_loss;
};

template <class S>
GateTrainReport gate_train(GateModel<S>& model, const std::vector<GateExample>& examples,
                           const GateTrainConfig& cfg) {
  require(static_cast<int>(examples.size()) >= cfg.batch, Errc::InvalidDataset,
          "gate training needs at least one full batch");
  for (const auto& e : examples)
    require(e.label >= 0 && e.label < model.cfg.num_classes, Errc::InvalidDataset,
            "gate label outside the class set");

  Rng shuffle_rng(derive_seed(cfg.seed, "gate.shuffle"));
  Rng drop_rng(derive_seed(cfg.seed, "gate.dropout"));
  AdamState<S> opt(static_cast<S>(cfg.lr));
  GateTrainReport report;

  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const Index b = cfg.batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    long correct = 0, seen = 0;
    for (size_t start = 0; start + static_cast<size_t>(b) <= order.size();
         start += static_cast<size_t>(b)) {
      Tensor<S> x({b, kSegmentLen});
      std::vector<int> labels(static_cast<size_t>(b));
      for (Index i = 0; i < b; ++i) {
        const GateExample& e = examples[order[start + static_cast<size_t>(i)]];
        for (int t = 0; t < kSegmentLen; ++t)
          x[i * kSegmentLen + t] = static_cast<S>(e.zscored[t]);
        labels[static_cast<size_t>(i)] = e.label;
      }
      Graph<S> g;
      Var<S> logits = model.forward(g, g.constant(x), Mode::Train, drop_rng);
      auto lm = g.val(logits).mat(b, model.cfg.num_classes);
      for (Index i = 0; i < b; ++i) {
        Index best = 0;
        for (Index c2 = 1; c2 < model.cfg.num_classes; ++c2)
          if (lm(i, c2) > lm(i, best)) best = c2;
        correct += best == labels[static_cast<size_t>(i)] ? 1 : 0;
        ++seen;
      }
      Var<S> loss = cross_entropy(logits, labels);
      const double lv = static_cast<double>(g.val(loss)[0]);
      check_finite_loss(lv, "gate_train");
      model.params.zero_grad();
      g.backward(loss);
      adam_step(model.params, opt);
      loss_sum += lv;
    }
    report.epoch_loss.push_back(loss_sum);
    report.epoch_accuracy.push_back(seen ? static_cast<double>(correct) / seen : 0.0);
  }
  return report;
}

// argmax with ties broken toward the lower SNR class (index 0 is lowest)
inline int gate_pick_class(const std::vector<double>& probs) {
  require(!probs.empty(), Errc::InvalidInput, "empty probability vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i)
    if (probs[static_cast<size_t>(i)] > probs[static_cast<size_t>(best)]) best = i;
  return best;
}

}  // namespace atat
