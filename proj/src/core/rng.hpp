#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace aepnet {

/// SplitMix64-based generator. Unlike the standard-library distributions the
/// draw sequences are fixed by this code alone, so fixtures pinned from them
/// stay valid across toolchains, and the 3-field state makes checkpoint
/// resume exact.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  /// Derive an independent stream; does not advance this generator.
  Rng fork(std::uint64_t tag) const {
    Rng child(state_ ^ (0xbf58476d1ce4e5b9ULL * (tag + 0x9e3779b97f4a7c15ULL)));
    child.next_u64();  // decorrelate nearby tags
    return child;
  }

  /// Exact textual state for checkpoints.
  std::string save() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%llu %d %a", static_cast<unsigned long long>(state_),
                  has_spare_ ? 1 : 0, spare_);
    return buf;
  }

  static Rng load(const std::string& s) {
    unsigned long long st = 0;
    int spare_flag = 0;
    double spare = 0.0;
    if (std::sscanf(s.c_str(), "%llu %d %la", &st, &spare_flag, &spare) != 3)
      throw std::invalid_argument("Rng::load: malformed state '" + s + "'");
    Rng r(0);
    r.state_ = st;
    r.has_spare_ = spare_flag != 0;
    r.spare_ = spare;
    return r;
  }

  bool operator==(const Rng& o) const {
    return state_ == o.state_ && has_spare_ == o.has_spare_ &&
           (!has_spare_ || spare_ == o.spare_);
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace aepnet
