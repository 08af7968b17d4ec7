#include "atat/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace atat {

std::vector<ParamCount> count_parameters(ModelSet& models) {
  std::vector<ParamCount> out;
  long total_tr = 0, total_all = 0;
  auto push = [&](const std::string& name, const auto& store) {
    ParamCount pc{name, static_cast<long>(store.count_trainable()),
                  static_cast<long>(store.count_all())};
    total_tr += pc.trainable;
    total_all += pc.total;
    out.push_back(pc);
  };
  push("gate", models.gate->params);
  for (auto& inst : models.instances) {
    const std::string label = snr_label(inst->snr_db);
    push("ae@" + label, inst->ae.params);
    push("gen@" + label, inst->gen.params);
    push("disc@" + label, inst->disc.params);
    out.push_back({"atat_core@" + label,
                   static_cast<long>(inst->ae.params.count_trainable() +
                                     inst->gen.params.count_trainable() +
                                     inst->disc.params.count_trainable()),
                   static_cast<long>(inst->ae.params.count_all() +
                                     inst->gen.params.count_all() +
                                     inst->disc.params.count_all())});
  }
  out.push_back({"total", total_tr, total_all});
  return out;
}

MetricsReport run_benchmark(ModelSet& models, const Dataset& ds, const RunConfig& cfg,
                            bool use_transformer) {
  cfg.validate();
  MetricsReport rep;
  rep.seed = cfg.seed;
  rep.config_json = config_to_json(cfg);

  for (double snr : cfg.snr_levels) {
    std::vector<const PairRecord*> records;
    for (const auto& p : ds.manifest.pairing)
      if (p.split == "test" && std::abs(p.snr_db - snr) < 1e-9) records.push_back(&p);
    require(!records.empty(), Errc::InvalidDataset, "no test pairs at SNR " + snr_label(snr));

    const int true_class = models.class_of(snr);
    std::vector<SegmentMetrics> rows(records.size());
    parallel_for(static_cast<int64_t>(records.size()), cfg.threads, [&](int64_t i) {
      const PairRecord& p = *records[static_cast<size_t>(i)];
      const Segment& mixseg = ds.by_id(p.mix_id);
      const Segment& clean = ds.by_id(p.eeg_id);
      DenoiseResult dr = denoise_routed(models, mixseg, cfg, use_transformer);
      SegmentMetrics m;
      m.snr_db = snr;
      m.segment_id = p.mix_id;
      m.cc = pearson_cc(dr.denoised.samples, clean.samples);
      m.trrmse = trrmse(dr.denoised.samples, clean.samples);
      m.srrmse = srrmse(dr.denoised.samples, clean.samples);
      m.masked_fraction = dr.mask.masked_fraction();
      m.gate_class = dr.gate_class;
      m.true_class = true_class;
      rows[static_cast<size_t>(i)] = std::move(m);
    });

    AggregateRow agg;
    agg.snr_db = snr;
    agg.n = static_cast<int>(rows.size());
    std::vector<double> ccs, trs, srs;
    double masked = 0.0;
    int gate_ok = 0;
    for (const auto& r : rows) {
      ccs.push_back(r.cc);
      trs.push_back(r.trrmse);
      srs.push_back(r.srrmse);
      masked += r.masked_fraction;
      gate_ok += r.gate_class == r.true_class ? 1 : 0;
      rep.per_segment.push_back(r);
    }
    auto fill = [](MetricBundle& b, const std::vector<double>& v) {
      double mean = 0;
      for (double x : v) mean += x;
      b.mean = mean / static_cast<double>(v.size());
      if (v.size() >= 2) {
        auto [lo, hi] = confidence_interval(v, 0.95);
        b.ci_low = lo;
        b.ci_high = hi;
      } else {
        b.ci_low = b.ci_high = b.mean;
      }
    };
    fill(agg.cc, ccs);
    fill(agg.trrmse, trs);
    fill(agg.srrmse, srs);
    agg.mean_masked_fraction = masked / static_cast<double>(rows.size());
    agg.gate_accuracy = static_cast<double>(gate_ok) / static_cast<double>(rows.size());
    rep.aggregates.push_back(agg);
  }

  rep.param_counts = count_parameters(models);
  return rep;
}

namespace {

void write_svg_bars(const MetricsReport& rep, const std::string& path) {
  // grouped bars: one group per metric, one bar per SNR level
  const int w = 640, h = 360, mleft = 60, mbot = 50, mtop = 30;
  std::ofstream os(path);
  require(os.good(), Errc::IoError, "cannot write " + path);
  os.precision(6);
  double vmax = 1.0;
  for (const auto& a : rep.aggregates)
    vmax = std::max({vmax, a.cc.mean, a.trrmse.mean, a.srrmse.mean});
  const char* names[3] = {"CC", "tRRMSE", "sRRMSE"};
  const char* colors[4] = {"#4878cf", "#ee854a", "#6acc65", "#d65f5f"};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  os << "<line x1=\"" << mleft << "\" y1=\"" << h - mbot << "\" x2=\"" << w - 20 << "\" y2=\""
     << h - mbot << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << mleft << "\" y1=\"" << mtop << "\" x2=\"" << mleft << "\" y2=\""
     << h - mbot << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = vmax * tick / 4.0;
    const double y = h - mbot - (h - mbot - mtop) * tick / 4.0;
    os << "<text x=\"" << mleft - 8 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << v << "</text>\n";
    os << "<line x1=\"" << mleft << "\" y1=\"" << y << "\" x2=\"" << w - 20 << "\" y2=\"" << y
       << "\" stroke=\"#dddddd\"/>\n";
  }
  const int groups = 3;
  const size_t bars = rep.aggregates.size();
  const double gw = static_cast<double>(w - mleft - 40) / groups;
  for (int gidx = 0; gidx < groups; ++gidx) {
    const double gx = mleft + 10 + gidx * gw;
    for (size_t b = 0; b < bars; ++b) {
      const auto& a = rep.aggregates[b];
      const double v = gidx == 0 ? a.cc.mean : gidx == 1 ? a.trrmse.mean : a.srrmse.mean;
      const double bw = (gw - 30) / static_cast<double>(bars);
      const double x = gx + b * bw;
      const double bh = (h - mbot - mtop) * (v / vmax);
      os << "<rect x=\"" << x << "\" y=\"" << h - mbot - bh << "\" width=\"" << bw * 0.85
         << "\" height=\"" << bh << "\" fill=\"" << colors[b % 4] << "\"/>\n";
    }
    os << "<text x=\"" << gx + (gw - 30) / 2 << "\" y=\"" << h - mbot + 18
       << "\" text-anchor=\"middle\" font-size=\"12\">" << names[gidx] << "</text>\n";
  }
  // legend
  for (size_t b = 0; b < bars; ++b) {
    const double y = mtop + 16.0 * b;
    os << "<rect x=\"" << w - 130 << "\" y=\"" << y << "\" width=\"12\" height=\"12\" fill=\""
       << colors[b % 4] << "\"/>\n";
    os << "<text x=\"" << w - 112 << "\" y=\"" << y + 10 << "\" font-size=\"11\">"
       << snr_label(rep.aggregates[b].snr_db) << " dB</text>\n";
  }
  os << "</svg>\n";
}

void write_svg_cc_line(const MetricsReport& rep, const std::string& path) {
  const int w = 480, h = 320, mleft = 60, mbot = 50, mtop = 30;
  std::ofstream os(path);
  require(os.good(), Errc::IoError, "cannot write " + path);
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << mleft << "\" y1=\"" << h - mbot << "\" x2=\"" << w - 20 << "\" y2=\""
     << h - mbot << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << mleft << "\" y1=\"" << mtop << "\" x2=\"" << mleft << "\" y2=\""
     << h - mbot << "\" stroke=\"black\"/>\n";
  const double lo_snr = rep.aggregates.front().snr_db, hi_snr = rep.aggregates.back().snr_db;
  const double span = std::max(1e-9, hi_snr - lo_snr);
  std::string pts;
  for (const auto& a : rep.aggregates) {
    const double x = mleft + (w - mleft - 40) * (a.snr_db - lo_snr) / span;
    const double y = h - mbot - (h - mbot - mtop) * std::clamp(a.cc.mean, 0.0, 1.0);
    pts += std::to_string(x) + "," + std::to_string(y) + " ";
    os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"4\" fill=\"#4878cf\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << h - mbot + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << snr_label(a.snr_db) << " dB</text>\n";
  }
  os << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"#4878cf\" stroke-width=\"2\"/>\n";
  os << "<text x=\"" << mleft - 40 << "\" y=\"" << mtop - 10
     << "\" font-size=\"12\">mean CC</text>\n";
  os << "</svg>\n";
}

}  // namespace

void emit_report(const MetricsReport& rep, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::IoError, "cannot create report dir " + dir);

  {  // per-segment metrics, pinned header
    std::ofstream os(fs::path(dir) / "metrics.csv");
    require(os.good(), Errc::IoError, "cannot write metrics.csv");
    os.precision(10);
    os << "snr_db,segment_id,cc,trrmse,srrmse\n";
    for (const auto& m : rep.per_segment)
      os << m.snr_db << "," << m.segment_id << "," << m.cc << "," << m.trrmse << ","
         << m.srrmse << "\n";
  }
  {  // auxiliary per-segment detail
    std::ofstream os(fs::path(dir) / "details.csv");
    require(os.good(), Errc::IoError, "cannot write details.csv");
    os.precision(10);
    os << "snr_db,segment_id,masked_fraction,gate_class,true_class\n";
    for (const auto& m : rep.per_segment)
      os << m.snr_db << "," << m.segment_id << "," << m.masked_fraction << "," << m.gate_class
         << "," << m.true_class << "\n";
  }
  {  // aggregate summary (no wall-clock: that lives in timing.csv)
    json j;
    j["seed"] = rep.seed;
    j["config"] = json::parse(rep.config_json);
    j["aggregates"] = json::array();
    for (const auto& a : rep.aggregates) {
      j["aggregates"].push_back(
          {{"snr_db", a.snr_db},
           {"n", a.n},
           {"cc", {{"mean", a.cc.mean}, {"ci_low", a.cc.ci_low}, {"ci_high", a.cc.ci_high}}},
           {"trrmse",
            {{"mean", a.trrmse.mean}, {"ci_low", a.trrmse.ci_low}, {"ci_high", a.trrmse.ci_high}}},
           {"srrmse",
            {{"mean", a.srrmse.mean}, {"ci_low", a.srrmse.ci_low}, {"ci_high", a.srrmse.ci_high}}},
           {"mean_masked_fraction", a.mean_masked_fraction},
           {"gate_accuracy", a.gate_accuracy}});
    }
    j["param_counts"] = json::array();
    for (const auto& p : rep.param_counts)
      j["param_counts"].push_back(
          {{"model", p.model}, {"trainable", p.trainable}, {"total", p.total}});
    std::ofstream os(fs::path(dir) / "summary.json");
    require(os.good(), Errc::IoError, "cannot write summary.json");
    os << j.dump(2) << "\n";
  }
  {  // wall-clock, hardware-dependent, excluded from determinism comparisons
    std::ofstream os(fs::path(dir) / "timing.csv");
    require(os.good(), Errc::IoError, "cannot write timing.csv");
    os.precision(6);
    os << "phase,seconds\n";
    for (const auto& [k, v] : rep.wall_clock) os << k << "," << v << "\n";
  }
  {  // benchmark-table skeleton; external model rows left for user constants
    std::ofstream os(fs::path(dir) / "comparison.csv");
    require(os.good(), Errc::IoError, "cannot write comparison.csv");
    os.precision(6);
    os << "model,params";
    for (const auto& a : rep.aggregates)
      os << ",cc_" << snr_label(a.snr_db) << "db,trrmse_" << snr_label(a.snr_db) << "db,srrmse_"
         << snr_label(a.snr_db) << "db";
    os << "\n";
    long core = 0;
    for (const auto& p : rep.param_counts)
      if (p.model.rfind("atat_core@", 0) == 0) core = std::max(core, p.trainable);
    os << "AT-AT," << core;
    for (const auto& a : rep.aggregates)
      os << "," << a.cc.mean << "," << a.trrmse.mean << "," << a.srrmse.mean;
    os << "\n";
    for (const char* name : {"[A]", "[B]", "[C]"}) {
      os << name << ",";
      for (size_t i = 0; i < rep.aggregates.size() * 3; ++i) os << ",";
      os << "\n";
    }
  }
  write_svg_bars(rep, (fs::path(dir) / "metrics_by_snr.svg").string());
  write_svg_cc_line(rep, (fs::path(dir) / "cc_by_snr.svg").string());
}

}  // namespace atat
