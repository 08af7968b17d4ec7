#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "atat/checkpoint.hpp"
#include "atat/metrics.hpp"
#include "atat/synth.hpp"
#include "atat/training.hpp"

using namespace atat;

namespace {

Eigen::VectorXd to_eigen(const Tensor<float>& t) {
  Eigen::VectorXd out(t.size());
  for (Index i = 0; i < t.size(); ++i) out[i] = static_cast<double>(t[i]);
  return out;
}

}  // namespace

TEST_CASE("autoencoder: parameter count matches the layer arithmetic") {
  Autoencoder<float> ae(7);
  // conv k3 stacks: 1->32->64->128->64->32->1, batch norm after all but the head
  const long conv = (32 * 1 * 3 + 32) + (64 * 32 * 3 + 64) + (128 * 64 * 3 + 128) +
                    (64 * 128 * 3 + 64) + (32 * 64 * 3 + 32) + (1 * 32 * 3 + 1);
  const long bn_affine = 2 * (32 + 64 + 128 + 64 + 32);
  const long bn_running = 2 * (32 + 64 + 128 + 64 + 32);
  CHECK(ae.params.count_trainable() == conv + bn_affine);
  CHECK(ae.params.count_trainable() == 62593);
  CHECK(ae.params.count_all() == conv + bn_affine + bn_running);
}

TEST_CASE("generator: parameter count matches the layer arithmetic") {
  Generator<float> gen(7);
  const long embed = 2 * 16 + 16;
  const long pos = 512 * 16, maskemb = 16;
  const long per_layer = 4 * (16 * 16 + 16)            // q,k,v,o projections
                         + (16 * 128 + 128) + (128 * 16 + 16)  // feedforward
                         + 2 * (16 + 16);               // two layer norms
  const long smooth = 16 * 16 * 3 + 16;
  const long head = 16 + 1;
  CHECK(gen.params.count_trainable() == embed + pos + maskemb + 2 * per_layer + smooth + head);
  CHECK(gen.params.count_trainable() == 19841);
}

TEST_CASE("discriminator: parameter count matches the layer arithmetic") {
  Discriminator<float> disc(7);
  const long c1 = 64 * 1 * 3 + 64;
  const long c2 = 128 * 64 * 3 + 128;
  const long out = 128 * 512 + 1;
  CHECK(disc.params.count_trainable() == c1 + c2 + out);
  CHECK(disc.params.count_trainable() == 90497);
}

TEST_CASE("gate: parameter count matches the layer arithmetic") {
  GateModel<float> gate(7);
  const long cnn = (16 * 9 + 16) + 2 * 16;
  const long lstm1 = 4 * (16 * 32 + 32 * 32 + 32);
  const long lstm2 = 4 * (32 * 32 + 32 * 32 + 32);
  const long lcm_conv = 8 * 9 + 8;
  const long lcm_dense = (8 * 32 * 32) * 64 + 64;
  const long meta1 = (16 * 16 * 8 + 32 * 32 + 64) * 64 + 64;
  const long meta2 = 64 * 2 + 2;
  const long expect = cnn + 2 * (lstm1 + lstm2) + lcm_conv + lcm_dense + meta1 + meta2;
  CHECK(gate.params.count_trainable() == expect);
  CHECK(gate.params.count_all() == expect + 2 * 16);
}

TEST_CASE("autoencoder: untrained output is in (0,1) with length 512") {
  Autoencoder<float> ae(11);
  Rng rng(3);
  Eigen::VectorXd x01(kSegmentLen);
  for (int i = 0; i < kSegmentLen; ++i) x01[i] = rng.uniform(0.0, 1.0);
  Eigen::VectorXd y = ae_denoise(ae, x01);
  CHECK(y.size() == kSegmentLen);
  CHECK(y.minCoeff() > 0.0);
  CHECK(y.maxCoeff() < 1.0);

  Eigen::VectorXd bad = x01;
  bad[5] = 1.5;
  CHECK_THROWS_AS((void)ae_denoise(ae, bad), Error);
}

TEST_CASE("autoencoder: identity-task overfit reaches CC > 0.9") {
  Rng rng(5);
  std::vector<TrainPair> pairs;
  for (int i = 0; i < 24; ++i) {
    Segment s = make_synthetic_eeg(rng, "eeg");
    auto [n01, st] = normalize(s.samples, NormMode::MinMax01);
    pairs.push_back({n01, n01});
  }
  Autoencoder<float> ae(13);
  AeTrainConfig cfg;
  cfg.epochs = 100;  // 2 batches/epoch -> 200 optimizer steps
  cfg.batch = 12;
  cfg.lr = 2e-3;
  cfg.seed = 13;
  auto report = ae_train(ae, pairs, cfg);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());

  double mean_cc = 0.0;
  for (const auto& p : pairs)
    mean_cc += pearson_cc(ae_denoise(ae, p.contaminated01), p.clean01);
  mean_cc /= pairs.size();
  CHECK(mean_cc > 0.9);
}

TEST_CASE("autoencoder: seed determinism gives bitwise identical parameters") {
  Rng rng(7);
  std::vector<TrainPair> pairs;
  for (int i = 0; i < 8; ++i) {
    Segment s = make_synthetic_eeg(rng, "eeg");
    Segment n = make_synthetic_emg(rng, "emg");
    auto res = mix(s, n, 0.0, NormMode::MinMax01);
    Eigen::VectorXd clean01 =
        ((s.samples.array() - res.norm.offset) / res.norm.scale).matrix();
    pairs.push_back({res.contaminated.samples, clean01});
  }
  AeTrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 4;
  cfg.lr = 1e-3;
  cfg.seed = 99;
  Autoencoder<float> a(21), b(21);
  (void)ae_train(a, pairs, cfg);
  (void)ae_train(b, pairs, cfg);
  for (size_t i = 0; i < a.params.size(); ++i)
    for (Index e = 0; e < a.params.at(i).value.size(); ++e)
      CHECK(a.params.at(i).value[e] == b.params.at(i).value[e]);
}

TEST_CASE("ae_train: fewer pairs than batch is rejected") {
  std::vector<TrainPair> pairs(3);
  for (auto& p : pairs) {
    p.contaminated01 = Eigen::VectorXd::Constant(kSegmentLen, 0.5);
    p.clean01 = p.contaminated01;
  }
  Autoencoder<float> ae(1);
  AeTrainConfig cfg;
  cfg.batch = 20;
  try {
    (void)ae_train(ae, pairs, cfg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidDataset);
  }
}

TEST_CASE("generator: untrained output finite, deterministic, position sensitive") {
  Generator<float> gen(31);
  Rng rng(9);
  Tensor<float> tokens({1, kSegmentLen, 2});
  for (Index i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<float>(rng.uniform(0, 1));
  Tensor<float> flags = Tensor<float>::zeros({kSegmentLen});

  Tensor<float> y1 = gen.infer(tokens, flags);
  CHECK(y1.shape() == Shape{1, kSegmentLen});
  CHECK(y1.all_finite());
  Tensor<float> y2 = gen.infer(tokens, flags);
  for (Index i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);

  // swapping two tokens changes the output (positional embedding at work)
  Tensor<float> swapped = tokens;
  std::swap(swapped[10 * 2 + 0], swapped[400 * 2 + 0]);
  std::swap(swapped[10 * 2 + 1], swapped[400 * 2 + 1]);
  Tensor<float> y3 = gen.infer(swapped, flags);
  double diff = 0.0;
  for (Index i = 0; i < y1.size(); ++i) diff += std::abs(static_cast<double>(y1[i] - y3[i]));
  CHECK(diff > 1e-4);

  // all-zero tokens and a full mask: output depends only on the embeddings
  Tensor<float> zeros = Tensor<float>::zeros({1, kSegmentLen, 2});
  Tensor<float> full = Tensor<float>::full({kSegmentLen}, 1.0f);
  Tensor<float> z1 = gen.infer(zeros, full);
  Tensor<float> z2 = gen.infer(zeros, full);
  CHECK(z1.all_finite());
  for (Index i = 0; i < z1.size(); ++i) CHECK(z1[i] == z2[i]);
}

TEST_CASE("discriminator: output in (0,1), infer deterministic, toy separation") {
  Discriminator<float> disc(37);
  Rng rng(11);
  Rng drop(12);

  Tensor<float> x({2, kSegmentLen});
  for (Index i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.gaussian());
  {
    Graph<float> g;
    auto p = disc.forward(g, g.constant(x), Mode::Infer, drop);
    CHECK(g.val(p).shape() == Shape{2, 1});
    for (Index i = 0; i < 2; ++i) {
      CHECK(g.val(p)[i] > 0.0f);
      CHECK(g.val(p)[i] < 1.0f);
    }
    Graph<float> g2;
    auto p2 = disc.forward(g2, g2.constant(x), Mode::Infer, drop);
    for (Index i = 0; i < 2; ++i) CHECK(g.val(p)[i] == g2.val(p2)[i]);
  }

  // separable toys: flat (z-scores to ~zero) vs white noise
  AdamState<float> opt(1e-3f);
  Rng data_rng(13);
  Rng drop2(14);
  for (int step = 0; step < 60; ++step) {
    Tensor<float> real({4, kSegmentLen});  // "authentic": near-zero flat
    Tensor<float> fake({4, kSegmentLen});  // "generated": white noise
    for (Index i = 0; i < real.size(); ++i) {
      real[i] = 0.0f;
      fake[i] = static_cast<float>(data_rng.gaussian());
    }
    Graph<float> g;
    auto pr = disc.forward(g, g.constant(real), Mode::Train, drop2);
    auto pf = disc.forward(g, g.constant(fake), Mode::Train, drop2);
    auto loss = add(bce(pr, 1.0f), bce(pf, 0.0f));
    disc.params.zero_grad();
    g.backward(loss);
    adam_step(disc.params, opt);
  }
  int correct = 0, total = 0;
  for (int t = 0; t < 25; ++t) {
    Tensor<float> real = Tensor<float>::zeros({1, kSegmentLen});
    Tensor<float> fake({1, kSegmentLen});
    for (Index i = 0; i < fake.size(); ++i) fake[i] = static_cast<float>(data_rng.gaussian());
    Graph<float> g;
    auto pr = disc.forward(g, g.constant(real), Mode::Infer, drop2);
    auto pf = disc.forward(g, g.constant(fake), Mode::Infer, drop2);
    correct += g.val(pr)[0] > 0.5f ? 1 : 0;
    correct += g.val(pf)[0] < 0.5f ? 1 : 0;
    total += 2;
  }
  CHECK(static_cast<double>(correct) / total > 0.9);
}

TEST_CASE("gate: probability simplex and tie breaking") {
  GateModel<float> gate(41);
  Rng rng(15);
  Eigen::VectorXd z(kSegmentLen);
  for (int i = 0; i < kSegmentLen; ++i) z[i] = rng.gaussian();
  auto probs = gate.infer_probs(z);
  double sum = 0.0;
  for (double p : probs) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  // exact tie goes to the lower-SNR class (index 0)
  CHECK(gate_pick_class({0.5, 0.5}) == 0);
  CHECK(gate_pick_class({0.2, 0.8}) == 1);
}

TEST_CASE("gate: pure routing leaves the signal untouched") {
  // the gate only classifies; denoising consumes the original bytes
  Rng rng(17);
  Eigen::VectorXd raw(kSegmentLen);
  for (int i = 0; i < kSegmentLen; ++i) raw[i] = rng.uniform(-3.0, 3.0);
  Eigen::VectorXd copy = raw;
  GateModel<float> gate(43);
  auto [z, st] = normalize(raw, NormMode::ZScore);
  (void)gate.infer_probs(z);
  for (int i = 0; i < kSegmentLen; ++i) CHECK(raw[i] == copy[i]);
}

TEST_CASE("model checkpoints round trip through the registry") {
  Autoencoder<float> ae(51);
  const std::string path = "/tmp/atat_ae_test.atat";
  save_checkpoint(ae.params, path);
  Autoencoder<float> ae2(52);  // different init
  load_checkpoint(ae2.params, path);
  for (size_t i = 0; i < ae.params.size(); ++i)
    for (Index e = 0; e < ae.params.at(i).value.size(); ++e)
      CHECK(ae.params.at(i).value[e] == ae2.params.at(i).value[e]);
}
