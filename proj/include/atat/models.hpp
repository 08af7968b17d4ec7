#pragma once

#include <string>
#include <vector>

#include "atat/ops.hpp"

// The three trainable networks. Dimensions follow the published layer specs;
// unstated widths sit in the config structs.

namespace atat {

template <class S>
Tensor<S> init_fanin(Shape shape, Index fan_in, Rng& rng, double gain = 1.0) {
  const double bound = gain / std::sqrt(static_cast<double>(fan_in));
  return Tensor<S>::uniform(std::move(shape), rng, -bound, bound);
}

// ---------------------------------------------------------------------------
// denoising autoencoder
// ---------------------------------------------------------------------------

// conv(32,k3)+BN+ReLU+pool2 / conv(64,k3)+BN+ReLU+pool2 / conv(128,k3)+BN+ReLU
// then the mirrored decoder with x2 nearest upsampling and a sigmoid head.
template <class S>
class Autoencoder {
 public:
  ParameterStore<S> params;

  explicit Autoencoder(uint64_t seed) {
    Rng rng(derive_seed(seed, "ae.init"));
    add_conv("ae.enc1", 1, 32, rng);
    add_bn("ae.bn1", 32);
    add_conv("ae.enc2", 32, 64, rng);
    add_bn("ae.bn2", 64);
    add_conv("ae.mid", 64, 128, rng);
    add_bn("ae.bn3", 128);
    add_conv("ae.dec1", 128, 64, rng);
    add_bn("ae.bn4", 64);
    add_conv("ae.dec2", 64, 32, rng);
    add_bn("ae.bn5", 32);
    // head gain keeps the initial sigmoid swing近 the target range
    add_conv("ae.head", 32, 1, rng, 2.0);
  }

  // x [N,1,512] in [0,1] -> [N,1,512] in (0,1)
  Var<S> forward(Graph<S>& g, Var<S> x, Mode mode) {
    Var<S> h = conv_bn_relu(g, x, "ae.enc1", "ae.bn1", mode);
    h = maxpool1d(h, 2);
    h = conv_bn_relu(g, h, "ae.enc2", "ae.bn2", mode);
    h = maxpool1d(h, 2);
    h = conv_bn_relu(g, h, "ae.mid", "ae.bn3", mode);
    h = conv_bn_relu(g, h, "ae.dec1", "ae.bn4", mode);
    h = upsample1d(h, 2);
    h = conv_bn_relu(g, h, "ae.dec2", "ae.bn5", mode);
    h = upsample1d(h, 2);
    h = conv1d(h, g.use(params.get("ae.head.kernel")), g.use(params.get("ae.head.bias")));
    return sigmoid(h);
  }

  // frozen inference on a [N,1,512] batch
  Tensor<S> infer(const Tensor<S>& x) {
    Graph<S> g;
    Var<S> out = forward(g, g.constant(x), Mode::Infer);
    return g.val(out);
  }

 private:
  void add_conv(const std::string& name, Index cin, Index cout, Rng& rng, double gain = 1.0) {
    params.add(name + ".kernel", init_fanin<S>({cout, cin, 3}, cin * 3, rng, gain));
    params.add(name + ".bias", Tensor<S>::zeros({cout}));
  }
  void add_bn(const std::string& name, Index c) {
    params.add(name + ".gamma", Tensor<S>::full({c}, S(1)));
    params.add(name + ".beta", Tensor<S>::zeros({c}));
    params.add(name + ".running_mean", Tensor<S>::zeros({c}), false);
    params.add(name + ".running_var", Tensor<S>::full({c}, S(1)), false);
  }
  Var<S> conv_bn_relu(Graph<S>& g, Var<S> x, const std::string& conv, const std::string& bn,
                      Mode mode) {
    Var<S> h = conv1d(x, g.use(params.get(conv + ".kernel")), g.use(params.get(conv + ".bias")));
    h = batchnorm(h, g.use(params.get(bn + ".gamma")), g.use(params.get(bn + ".beta")),
                  params.get(bn + ".running_mean"), params.get(bn + ".running_var"), mode);
    return relu(h);
  }
};

// ---------------------------------------------------------------------------
// transformer generator
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  Index embed_dim = 16;
  Index heads = 4;
  Index ff_dim = 128;
  Index layers = 2;
};

// 1x2 tokens -> 16-d embedding (+ positional and mask embeddings) -> two
// post-norm encoder layers -> k3 smoothing conv -> per-position dense head.
template <class S>
class Generator {
 public:
  ParameterStore<S> params;
  GeneratorConfig cfg;

  explicit Generator(uint64_t seed, GeneratorConfig c = {}) : cfg(c) {
    Rng rng(derive_seed(seed, "gen.init"));
    const Index d = cfg.embed_dim;
    params.add("gen.embed.w", init_fanin<S>({2, d}, 2, rng));
    params.add("gen.embed.b", Tensor<S>::zeros({d}));
    // learned positional table, seeded with the sin/cos pattern so attention
    // starts frequency-selective
    Tensor<S> pos({static_cast<Index>(kSegmentLen), d});
    for (Index l = 0; l < kSegmentLen; ++l)
      for (Index k = 0; k < d / 2; ++k) {
        const double rate = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(d));
        pos[l * d + 2 * k] = static_cast<S>(std::sin(l * rate));
        pos[l * d + 2 * k + 1] = static_cast<S>(std::cos(l * rate));
      }
    params.add("gen.pos", std::move(pos));
    params.add("gen.maskemb", Tensor<S>::uniform({d}, rng, -0.05, 0.05));
    for (Index l = 0; l < cfg.layers; ++l) {
      const std::string p = "gen.enc" + std::to_string(l + 1);
      for (const char* nm : {"wq", "wk", "wv", "wo"})
        params.add(p + "." + nm, init_fanin<S>({d, d}, d, rng));
      for (const char* nm : {"bq", "bk", "bv", "bo"})
        params.add(p + "." + nm, Tensor<S>::zeros({d}));
      params.add(p + ".ff1.w", init_fanin<S>({d, cfg.ff_dim}, d, rng));
      params.add(p + ".ff1.b", Tensor<S>::zeros({cfg.ff_dim}));
      params.add(p + ".ff2.w", init_fanin<S>({cfg.ff_dim, d}, cfg.ff_dim, rng));
      params.add(p + ".ff2.b", Tensor<S>::zeros({d}));
      params.add(p + ".ln1.gamma", Tensor<S>::full({d}, S(1)));
      params.add(p + ".ln1.beta", Tensor<S>::zeros({d}));
      params.add(p + ".ln2.gamma", Tensor<S>::full({d}, S(1)));
      params.add(p + ".ln2.beta", Tensor<S>::zeros({d}));
    }
    params.add("gen.smooth.kernel", init_fanin<S>({d, d, 3}, d * 3, rng));
    params.add("gen.smooth.bias", Tensor<S>::zeros({d}));
    params.add("gen.head.w", init_fanin<S>({d, 1}, d, rng));
    params.add("gen.head.b", Tensor<S>::zeros({1}));
  }

  // tokens [N,512,2], mask flags [N*512] (1 = target site) -> [N,512]
  Var<S> forward(Graph<S>& g, Var<S> tokens, Tensor<S> mask_flags) {
    const Shape& ts = g.val(tokens).shape();
    require(ts.size() == 3 && ts[1] == kSegmentLen && ts[2] == 2, Errc::ShapeError,
            "generator wants [N,512,2] tokens");
    const Index n = ts[0], d = cfg.embed_dim;
    Var<S> x = dense(tokens, g.use(params.get("gen.embed.w")), g.use(params.get("gen.embed.b")));
    x = reshape(x, {n, static_cast<Index>(kSegmentLen) * d});
    x = add_tiled(x, g.use(params.get("gen.pos")));
    x = reshape(x, {n, static_cast<Index>(kSegmentLen), d});
    x = add_mask_embedding(x, std::move(mask_flags), g.use(params.get("gen.maskemb")));
    for (Index l = 0; l < cfg.layers; ++l) {
      const std::string p = "gen.enc" + std::to_string(l + 1);
      EncoderLayerWeights<S> w{
          {g.use(params.get(p + ".wq")), g.use(params.get(p + ".bq")),
           g.use(params.get(p + ".wk")), g.use(params.get(p + ".bk")),
           g.use(params.get(p + ".wv")), g.use(params.get(p + ".bv")),
           g.use(params.get(p + ".wo")), g.use(params.get(p + ".bo"))},
          g.use(params.get(p + ".ff1.w")),
          g.use(params.get(p + ".ff1.b")),
          g.use(params.get(p + ".ff2.w")),
          g.use(params.get(p + ".ff2.b")),
          g.use(params.get(p + ".ln1.gamma")),
          g.use(params.get(p + ".ln1.beta")),
          g.use(params.get(p + ".ln2.gamma")),
          g.use(params.get(p + ".ln2.beta"))};
      x = transformer_encoder_layer(x, w, cfg.heads);
    }
    x = seq_to_chan(x);
    x = conv1d(x, g.use(params.get("gen.smooth.kernel")), g.use(params.get("gen.smooth.bias")));
    x = chan_to_seq(x);
    x = dense(x, g.use(params.get("gen.head.w")), g.use(params.get("gen.head.b")));
    return reshape(x, {n, static_cast<Index>(kSegmentLen)});
  }

  Tensor<S> infer(const Tensor<S>& tokens, const Tensor<S>& mask_flags) {
    Graph<S> g;
    Var<S> out = forward(g, g.constant(tokens), mask_flags);
    return g.val(out);
  }
};

// ---------------------------------------------------------------------------
// 1D-CNN discriminator
// ---------------------------------------------------------------------------

template <class S>
class Discriminator {
 public:
  ParameterStore<S> params;
  S leak = S(0.2);
  S drop = S(0.3);

  explicit Discriminator(uint64_t seed) {
    Rng rng(derive_seed(seed, "disc.init"));
    params.add("disc.conv1.kernel", init_fanin<S>({64, 1, 3}, 3, rng));
    params.add("disc.conv1.bias", Tensor<S>::zeros({64}));
    params.add("disc.conv2.kernel", init_fanin<S>({128, 64, 3}, 64 * 3, rng));
    params.add("disc.conv2.bias", Tensor<S>::zeros({128}));
    params.add("disc.out.w", init_fanin<S>({128 * static_cast<Index>(kSegmentLen), 1},
                                           128 * kSegmentLen, rng));
    params.add("disc.out.b", Tensor<S>::zeros({1}));
  }

  // x [N,512] (z-scored) -> probabilities [N,1]; frozen=true keeps the
  // weights out of the gradient flow (used inside generator updates).
  Var<S> forward(Graph<S>& g, Var<S> x, Mode mode, Rng& rng, bool frozen = false) {
    auto wvar = [&](const std::string& name) {
      Parameter<S>& p = params.get(name);
      return frozen ? g.constant(p.value) : g.use(p);
    };
    const Shape& s = g.val(x).shape();
    require(s.size() == 2 && s[1] == kSegmentLen, Errc::ShapeError,
            "discriminator wants [N,512]");
    const Index n = s[0];
    Var<S> h = reshape(x, {n, 1, static_cast<Index>(kSegmentLen)});
    h = conv1d(h, wvar("disc.conv1.kernel"), wvar("disc.conv1.bias"));
    h = leaky_relu(h, leak);
    h = dropout(h, drop, mode, rng);
    h = conv1d(h, wvar("disc.conv2.kernel"), wvar("disc.conv2.bias"));
    h = leaky_relu(h, leak);
    h = dropout(h, drop, mode, rng);
    h = reshape(h, {n, 128 * static_cast<Index>(kSegmentLen)});
    h = dense(h, wvar("disc.out.w"), wvar("disc.out.b"));
    return sigmoid(h);
  }
};

// ---------------------------------------------------------------------------
// LSTM-CNN SNR gate
// ---------------------------------------------------------------------------

struct GateConfig {
  Index block_rows = 32;  // 512 -> 32x16 view shared by all pathways
  Index block_cols = 16;
  Index conv_filters = 16;
  Index lcm_conv_filters = 8;
  Index lstm_hidden = 32;
  Index dense_units = 64;
  Index num_classes = 2;
  double dropout = 0.3;
};

// Three pathways (Conv2D blocks, stacked LSTMs, LSTM->Conv2D->dense) feeding
// a concat meta-classifier with a softmax head.
template <class S>
class GateModel {
 public:
  ParameterStore<S> params;
  GateConfig cfg;

  explicit GateModel(uint64_t seed, GateConfig c = {}) : cfg(c) {
    require(cfg.block_rows * cfg.block_cols == kSegmentLen, Errc::InvalidConfig,
            "gate block view must cover 512 samples");
    Rng rng(derive_seed(seed, "gate.init"));
    const Index h = cfg.lstm_hidden, f = cfg.block_cols;
    params.add("gate.cnn.kernel", init_fanin<S>({cfg.conv_filters, 1, 3, 3}, 9, rng));
    params.add("gate.cnn.bias", Tensor<S>::zeros({cfg.conv_filters}));
    params.add("gate.cnn.bn.gamma", Tensor<S>::full({cfg.conv_filters}, S(1)));
    params.add("gate.cnn.bn.beta", Tensor<S>::zeros({cfg.conv_filters}));
    params.add("gate.cnn.bn.running_mean", Tensor<S>::zeros({cfg.conv_filters}), false);
    params.add("gate.cnn.bn.running_var", Tensor<S>::full({cfg.conv_filters}, S(1)), false);

    add_lstm("gate.lstm1", f, h, rng);
    add_lstm("gate.lstm2", h, h, rng);
    add_lstm("gate.lcm.lstm1", f, h, rng);
    add_lstm("gate.lcm.lstm2", h, h, rng);
    params.add("gate.lcm.conv.kernel", init_fanin<S>({cfg.lcm_conv_filters, 1, 3, 3}, 9, rng));
    params.add("gate.lcm.conv.bias", Tensor<S>::zeros({cfg.lcm_conv_filters}));
    const Index lcm_flat = cfg.lcm_conv_filters * cfg.block_rows * h;
    params.add("gate.lcm.dense.w", init_fanin<S>({lcm_flat, cfg.dense_units}, lcm_flat, rng));
    params.add("gate.lcm.dense.b", Tensor<S>::zeros({cfg.dense_units}));

    const Index cnn_flat = cfg.conv_filters * (cfg.block_rows / 2) * (cfg.block_cols / 2);
    const Index lstm_flat = cfg.block_rows * h;
    const Index concat = cnn_flat + lstm_flat + cfg.dense_units;
    params.add("gate.meta1.w", init_fanin<S>({concat, cfg.dense_units}, concat, rng));
    params.add("gate.meta1.b", Tensor<S>::zeros({cfg.dense_units}));
    params.add("gate.meta2.w", init_fanin<S>({cfg.dense_units, cfg.num_classes},
                                             cfg.dense_units, rng));
    params.add("gate.meta2.b", Tensor<S>::zeros({cfg.num_classes}));
  }

  // x [N,512] (z-scored) -> logits [N, num_classes]
  Var<S> forward(Graph<S>& g, Var<S> x, Mode mode, Rng& rng) {
    const Shape& s = g.val(x).shape();
    require(s.size() == 2 && s[1] == kSegmentLen, Errc::ShapeError, "gate wants [N,512]");
    const Index n = s[0], r = cfg.block_rows, c = cfg.block_cols, h = cfg.lstm_hidden;

    // conv pathway over 2-D blocks
    Var<S> img = reshape(x, {n, 1, r, c});
    Var<S> conv = conv2d(img, g.use(params.get("gate.cnn.kernel")),
                         g.use(params.get("gate.cnn.bias")));
    conv = relu(conv);
    conv = batchnorm(conv, g.use(params.get("gate.cnn.bn.gamma")),
                     g.use(params.get("gate.cnn.bn.beta")),
                     params.get("gate.cnn.bn.running_mean"),
                     params.get("gate.cnn.bn.running_var"), mode);
    conv = maxpool2d(conv, 2);
    conv = dropout(conv, static_cast<S>(cfg.dropout), mode, rng);
    conv = reshape(conv, {n, cfg.conv_filters * (r / 2) * (c / 2)});

    // stacked LSTM pathway, sequences flattened
    Var<S> seq = reshape(x, {n, r, c});
    Var<S> l1 = run_lstm(g, seq, "gate.lstm1");
    Var<S> l2 = run_lstm(g, l1, "gate.lstm2");
    Var<S> lstm_flat = reshape(l2, {n, r * h});

    // LSTM -> Conv2D -> dense pathway
    Var<S> m1 = run_lstm(g, seq, "gate.lcm.lstm1");
    Var<S> m2 = run_lstm(g, m1, "gate.lcm.lstm2");
    Var<S> mimg = reshape(m2, {n, 1, r, h});
    Var<S> mconv = relu(conv2d(mimg, g.use(params.get("gate.lcm.conv.kernel")),
                               g.use(params.get("gate.lcm.conv.bias"))));
    mconv = reshape(mconv, {n, cfg.lcm_conv_filters * r * h});
    Var<S> mdense = relu(dense(mconv, g.use(params.get("gate.lcm.dense.w")),
                               g.use(params.get("gate.lcm.dense.b"))));

    Var<S> cat = concat_cols<S>({conv, lstm_flat, mdense});
    Var<S> meta = relu(dense(cat, g.use(params.get("gate.meta1.w")),
                             g.use(params.get("gate.meta1.b"))));
    return dense(meta, g.use(params.get("gate.meta2.w")), g.use(params.get("gate.meta2.b")));
  }

  // probabilities for one z-scored segment
  std::vector<double> infer_probs(const Eigen::VectorXd& z) {
    require(z.size() == kSegmentLen, Errc::ShapeError, "gate segment length");
    Graph<S> g;
    Tensor<S> x({1, static_cast<Index>(kSegmentLen)});
    for (int i = 0; i < kSegmentLen; ++i) x[i] = static_cast<S>(z[i]);
    Rng rng(0);  // no dropout in Infer mode
    Var<S> logits = forward(g, g.constant(x), Mode::Infer, rng);
    Var<S> probs = softmax_rows(logits);
    std::vector<double> out(static_cast<size_t>(cfg.num_classes));
    for (Index i = 0; i < cfg.num_classes; ++i)
      out[static_cast<size_t>(i)] = static_cast<double>(g.val(probs)[i]);
    return out;
  }

 private:
  void add_lstm(const std::string& p, Index f, Index h, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    params.add(p + ".w", Tensor<S>::uniform({f, 4 * h}, rng, -bound, bound));
    params.add(p + ".u", Tensor<S>::uniform({h, 4 * h}, rng, -bound, bound));
    params.add(p + ".b", Tensor<S>::zeros({4 * h}));
  }
  Var<S> run_lstm(Graph<S>& g, Var<S> seq, const std::string& p) {
    return lstm(seq, g.use(params.get(p + ".w")), g.use(params.get(p + ".u")),
                g.use(params.get(p + ".b")), true);
  }
};

}  // namespace atat
