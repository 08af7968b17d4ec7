#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace atat {

enum class Errc {
  InvalidInput,
  InvalidConfig,
  InvalidDataset,
  InvalidBatch,
  ShapeError,
  FormatError,
  IoError,
  DegenerateSegment,
  DegenerateNoise,
  NormalizationError,
  DivergenceError,
  ConfigError,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

uint64_t splitmix64(uint64_t& state);

// Per-phase seeds are derived from the single run seed by hashing a label,
// so "ae.-7", "gan.2", "gate", ... get independent reproducible streams.
uint64_t derive_seed(uint64_t master, const std::string& label);

// Deterministic RNG with a fixed algorithm (splitmix64 core, Box-Muller
// gaussian). Not tied to libstdc++ distribution internals, so streams are
// identical on any platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ull) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian();

  // [0, n)
  int64_t uniform_int(int64_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

// Deterministic work splitting: item i always lands in slot i, so results are
// ordered regardless of thread count. Used only for RNG-free per-segment work.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn);

}  // namespace atat
