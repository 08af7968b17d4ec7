#include "atat/dataset.hpp"

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace atat {

namespace {

void write_f32_le(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  unsigned char b[4] = {static_cast<unsigned char>(u & 0xff),
                        static_cast<unsigned char>((u >> 8) & 0xff),
                        static_cast<unsigned char>((u >> 16) & 0xff),
                        static_cast<unsigned char>((u >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t u = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace

const Segment& Dataset::by_id(const std::string& id) const {
  auto it = index_.find(id);
  require(it != index_.end(), Errc::FormatError, "dataset has no segment " + id);
  return segments[it->second];
}

bool Dataset::has(const std::string& id) const { return index_.count(id) > 0; }

std::vector<const Segment*> Dataset::of_kind(SegmentKind kind) const {
  std::vector<const Segment*> out;
  for (const auto& s : segments)
    if (s.kind == kind) out.push_back(&s);
  return out;
}

void Dataset::rebuild_index() {
  index_.clear();
  for (size_t i = 0; i < segments.size(); ++i) {
    require(!index_.count(segments[i].id), Errc::FormatError,
            "duplicate segment id " + segments[i].id);
    index_[segments[i].id] = i;
  }
}

std::string save_dataset(const Dataset& ds, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::IoError, "cannot create dataset dir " + dir);

  // group segments by entry prefix, in manifest order
  for (const auto& e : ds.manifest.entries) {
    std::ofstream os(fs::path(dir) / e.path, std::ios::binary);
    require(os.good(), Errc::IoError, "cannot write blob " + e.path);
    int64_t written = 0;
    for (int64_t i = 0; i < e.count; ++i) {
      const Segment& s = ds.by_id(e.id_prefix + ":" + std::to_string(i));
      require(s.samples.size() == kSegmentLen, Errc::InvalidInput, "segment length");
      for (int j = 0; j < kSegmentLen; ++j) write_f32_le(os, static_cast<float>(s.samples[j]));
      ++written;
    }
    require(written == e.count && os.good(), Errc::IoError, "blob write failed " + e.path);
  }

  json j;
  j["format_version"] = ds.manifest.format_version;
  j["entries"] = json::array();
  for (const auto& e : ds.manifest.entries) {
    j["entries"].push_back({{"path", e.path},
                            {"kind", segment_kind_name(e.kind)},
                            {"count", e.count},
                            {"byte_order", e.byte_order},
                            {"element_type", e.element_type},
                            {"id_prefix", e.id_prefix}});
  }
  j["pairing"] = json::array();
  for (const auto& p : ds.manifest.pairing) {
    j["pairing"].push_back({{"eeg_id", p.eeg_id},
                            {"emg_id", p.emg_id},
                            {"snr_db", p.snr_db},
                            {"mix_id", p.mix_id},
                            {"split", p.split}});
  }
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  std::ofstream os(manifest_path);
  require(os.good(), Errc::IoError, "cannot write manifest " + manifest_path);
  os << j.dump(2) << "\n";
  require(os.good(), Errc::IoError, "manifest write failed");
  return manifest_path;
}

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  require(is.good(), Errc::IoError, "cannot open manifest " + manifest_path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    fail(Errc::FormatError, std::string("malformed manifest: ") + e.what());
  }

  Dataset ds;
  try {
    require(j.contains("format_version"), Errc::FormatError, "manifest missing format_version");
    ds.manifest.format_version = j.at("format_version").get<int>();
    require(ds.manifest.format_version == 1, Errc::FormatError,
            "unsupported manifest format_version");
    for (const auto& je : j.value("entries", json::array())) {
      ManifestEntry e;
      e.path = je.at("path").get<std::string>();
      e.kind = segment_kind_from(je.at("kind").get<std::string>());
      e.count = je.at("count").get<int64_t>();
      e.byte_order = je.value("byte_order", "le");
      e.element_type = je.value("element_type", "f32");
      e.id_prefix = je.at("id_prefix").get<std::string>();
      require(e.byte_order == "le" && e.element_type == "f32", Errc::FormatError,
              "unsupported blob encoding in " + e.path);
      ds.manifest.entries.push_back(std::move(e));
    }
    for (const auto& jp : j.value("pairing", json::array())) {
      PairRecord p;
      p.eeg_id = jp.at("eeg_id").get<std::string>();
      p.emg_id = jp.at("emg_id").get<std::string>();
      p.snr_db = jp.at("snr_db").get<double>();
      p.mix_id = jp.value("mix_id", "");
      p.split = jp.value("split", "train");
      ds.manifest.pairing.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    fail(Errc::FormatError, std::string("malformed manifest: ") + e.what());
  }

  const fs::path base = fs::path(manifest_path).parent_path();
  for (const auto& e : ds.manifest.entries) {
    const fs::path blob = base / e.path;
    require(fs::exists(blob), Errc::IoError, "missing blob file " + blob.string());
    const auto bytes = static_cast<int64_t>(fs::file_size(blob));
    require(bytes == e.count * kSegmentLen * 4, Errc::FormatError,
            "blob size mismatch for " + e.path + ": " + std::to_string(bytes) + " bytes for " +
                std::to_string(e.count) + " segments");
    std::ifstream bs(blob, std::ios::binary);
    require(bs.good(), Errc::IoError, "cannot open blob " + blob.string());
    for (int64_t i = 0; i < e.count; ++i) {
      Segment s;
      s.samples = Eigen::VectorXd(kSegmentLen);
      for (int jx = 0; jx < kSegmentLen; ++jx)
        s.samples[jx] = static_cast<double>(read_f32_le(bs));
      require(bs.good(), Errc::IoError, "blob read failed " + blob.string());
      s.kind = e.kind;
      s.id = e.id_prefix + ":" + std::to_string(i);
      ds.segments.push_back(std::move(s));
    }
  }
  ds.rebuild_index();

  for (const auto& p : ds.manifest.pairing) {
    require(ds.has(p.eeg_id), Errc::FormatError, "pairing references absent id " + p.eeg_id);
    require(ds.has(p.emg_id), Errc::FormatError, "pairing references absent id " + p.emg_id);
    if (!p.mix_id.empty())
      require(ds.has(p.mix_id), Errc::FormatError, "pairing references absent id " + p.mix_id);
  }
  return ds;
}

std::vector<Segment> load_csv_segments(const std::string& path, SegmentKind kind,
                                       const std::string& id_prefix) {
  std::ifstream is(path);
  require(is.good(), Errc::IoError, "cannot open CSV " + path);
  std::vector<Segment> out;
  std::string line;
  int64_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Segment s;
    s.samples = Eigen::VectorXd(kSegmentLen);
    int col = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      const char* tok_end = p;
      while (tok_end < end && *tok_end != ',') ++tok_end;
      const char* trimmed = tok_end;
      while (trimmed > p && (trimmed[-1] == ' ' || trimmed[-1] == '\t' || trimmed[-1] == '\r'))
        --trimmed;
      double v = 0.0;
      auto [ptr, ecode] = std::from_chars(p, trimmed, v);
      require(ecode == std::errc() && ptr == trimmed, Errc::FormatError,
              "CSV parse error at row " + std::to_string(row) + " col " + std::to_string(col));
      require(col < kSegmentLen, Errc::ShapeError,
              "CSV row " + std::to_string(row) + " has more than 512 columns");
      s.samples[col++] = v;
      p = tok_end < end ? tok_end + 1 : end;
    }
    require(col == kSegmentLen, Errc::ShapeError,
            "CSV row " + std::to_string(row) + " has " + std::to_string(col) +
                " values, want 512");
    s.kind = kind;
    s.id = id_prefix + ":" + std::to_string(row);
    out.push_back(std::move(s));
    ++row;
  }
  return out;
}

void save_csv_segments(const std::vector<Segment>& segments, const std::string& path) {
  std::ofstream os(path);
  require(os.good(), Errc::IoError, "cannot write CSV " + path);
  os.precision(10);
  for (const auto& s : segments) {
    require(s.samples.size() == kSegmentLen, Errc::InvalidInput, "segment length");
    for (int i = 0; i < kSegmentLen; ++i) os << (i ? "," : "") << s.samples[i];
    os << "\n";
  }
  require(os.good(), Errc::IoError, "CSV write failed " + path);
}

}  // namespace atat
