#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "atat/signal.hpp"

namespace atat {

// Dataset on disk: a JSON manifest describing raw little-endian f32 segment
// blobs plus the mix pairing records. Segment ids are "<prefix>:<index>".

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  SegmentKind kind = SegmentKind::CleanEEG;
  int64_t count = 0;
  std::string byte_order = "le";
  std::string element_type = "f32";
  std::string id_prefix;
};

struct PairRecord {
  std::string eeg_id, emg_id;
  double snr_db = 0.0;
  std::string mix_id;  // contaminated segment produced by this pairing
  std::string split;   // "train" or "test"
};

struct DatasetManifest {
  int format_version = 1;
  std::vector<ManifestEntry> entries;
  std::vector<PairRecord> pairing;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Segment> segments;

  const Segment& by_id(const std::string& id) const;
  bool has(const std::string& id) const;
  std::vector<const Segment*> of_kind(SegmentKind kind) const;
  void rebuild_index();

 private:
  std::unordered_map<std::string, size_t> index_;
};

// Writes blobs (one file per manifest entry) plus manifest.json; returns the
// manifest path. Samples are cast to f32.
std::string save_dataset(const Dataset& ds, const std::string& dir);

Dataset load_dataset(const std::string& manifest_path);

// CSV: one segment per row, 512 columns, '.' decimal separator, no header.
std::vector<Segment> load_csv_segments(const std::string& path, SegmentKind kind,
                                       const std::string& id_prefix);
void save_csv_segments(const std::vector<Segment>& segments, const std::string& path);

}  // namespace atat
