#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

namespace sphnn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Params = std::map<std::string, double>;

// ---------------------------------------------------------------------------
// Error types. Each maps to one failure class of the public API; the CLI
// translates them into its exit-code contract.
// ---------------------------------------------------------------------------

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// State left the representable range during time stepping.  `last_valid`
/// is the index of the last finite state.
struct DivergenceError : std::runtime_error {
  int last_valid;
  DivergenceError(const std::string& msg, int last_valid_index)
      : std::runtime_error(msg), last_valid(last_valid_index) {}
};

/// A fixed-point / iterative solve failed to reach its tolerance.
struct IterationError : std::runtime_error {
  double residual;
  IterationError(const std::string& msg, double res)
      : std::runtime_error(msg), residual(res) {}
};

struct NumericError : std::runtime_error {
  double residual;
  NumericError(const std::string& msg, double res = 0.0)
      : std::runtime_error(msg), residual(res) {}
};

struct TrainAbort : std::runtime_error {
  int epoch;
  TrainAbort(const std::string& msg, int at_epoch)
      : std::runtime_error(msg), epoch(at_epoch) {}
};

struct AuditError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG utilities. Ensemble work derives one sub-seed per path so
// results do not depend on thread scheduling.
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; good enough to decorrelate per-path sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix_seed(seed, 0)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in (0,1), never exactly 0.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; platform-independent sequence.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vec normal_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  int uniform_int(int n) {  // in [0, n)
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Thread pool free parallel loop. Thread count is capped by SPHNN_THREADS.
// Work items must write to disjoint slots; merge order is then deterministic.
// ---------------------------------------------------------------------------

int thread_cap();
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

/// FNV-1a 64-bit over a byte buffer; used for dataset fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hash_hex(std::uint64_t h);

/// Round-trip safe formatting ("%.17g") shared by every CSV writer.
std::string format_double(double v);

/// Write `content` to `path` atomically (temp file + rename).
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace sphnn
