#include "atat/common.hpp"

#include <cmath>
#include <thread>

namespace atat {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidDataset: return "InvalidDataset";
    case Errc::InvalidBatch: return "InvalidBatch";
    case Errc::ShapeError: return "ShapeError";
    case Errc::FormatError: return "FormatError";
    case Errc::IoError: return "IoError";
    case Errc::DegenerateSegment: return "DegenerateSegment";
    case Errc::DegenerateNoise: return "DegenerateNoise";
    case Errc::NormalizationError: return "NormalizationError";
    case Errc::DivergenceError: return "DivergenceError";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Error";
}

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t master, const std::string& label) {
  // FNV-1a over the label, mixed with the master seed.
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  uint64_t s = master ^ h;
  return splitmix64(s);
}

double Rng::gaussian() {
  // Box-Muller, spare discarded so the stream layout stays call-aligned.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

int64_t Rng::uniform_int(int64_t n) {
  require(n > 0, Errc::InvalidInput, "uniform_int needs n > 0");
  return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
}

void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<int64_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int64_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace atat
