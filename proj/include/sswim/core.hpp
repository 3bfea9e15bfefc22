// Shared types, error classes and small utilities used across the library.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace sswim {

using Index = Eigen::Index;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

/// Firing threshold of every spiking neuron.
inline constexpr double kThreshold = 1.0;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched channel counts, grid lengths or matrix sizes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values (non-positive supports, empty grids, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A computation whose inputs carry no usable information, e.g. a
/// probability distribution with no mass or a constant voltage trace.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Failure attributed to a single neuron of a layer.
class NeuronError : public Error {
 public:
  NeuronError(Index neuron, const std::string& what)
      : Error("neuron " + std::to_string(neuron) + ": " + what),
        neuron_(neuron) {}
  Index neuron() const noexcept { return neuron_; }

 private:
  Index neuron_;
};

/// Half-open range of grid steps [begin, end).
struct StepRange {
  Index begin = 0;
  Index end = 0;

  Index size() const noexcept { return end - begin; }
  bool contains(Index t) const noexcept { return t >= begin && t < end; }
};

/// Multichannel real function sampled on a uniform grid, stored as
/// channels x steps (row-major, so each channel is contiguous).
struct DiscreteSignal {
  RowMatrix values;
  double dt = 1.0;

  DiscreteSignal() = default;
  DiscreteSignal(Index channels, Index length, double step = 1.0)
      : values(RowMatrix::Zero(channels, length)), dt(step) {}
  DiscreteSignal(RowMatrix v, double step) : values(std::move(v)), dt(step) {}

  Index channels() const noexcept { return values.rows(); }
  Index length() const noexcept { return values.cols(); }

  std::span<const double> channel(Index c) const {
    return {values.data() + c * values.cols(),
            static_cast<std::size_t>(values.cols())};
  }
  std::span<double> channel(Index c) {
    return {values.data() + c * values.cols(),
            static_cast<std::size_t>(values.cols())};
  }

  bool operator==(const DiscreteSignal& other) const {
    return dt == other.dt && values.rows() == other.values.rows() &&
           values.cols() == other.values.cols() && values == other.values;
  }
};

/// Per-neuron sorted spike step indices on a grid of `length` steps.
struct SpikeTrainSet {
  std::vector<std::vector<Index>> trains;
  Index length = 0;

  SpikeTrainSet() = default;
  SpikeTrainSet(Index neurons, Index grid_length)
      : trains(static_cast<std::size_t>(neurons)), length(grid_length) {}

  Index neurons() const noexcept { return static_cast<Index>(trains.size()); }

  const std::vector<Index>& train(Index i) const {
    return trains[static_cast<std::size_t>(i)];
  }

  std::size_t total_spikes() const {
    std::size_t n = 0;
    for (const auto& t : trains) n += t.size();
    return n;
  }

  /// Checks strict ordering and grid bounds of every train.
  void validate() const {
    for (std::size_t i = 0; i < trains.size(); ++i) {
      const auto& t = trains[i];
      for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < 0 || t[k] >= length)
          throw ShapeError("spike train " + std::to_string(i) +
                           ": spike index outside grid");
        if (k > 0 && t[k] <= t[k - 1])
          throw ShapeError("spike train " + std::to_string(i) +
                           ": spike indices not strictly increasing");
      }
    }
  }

  bool operator==(const SpikeTrainSet&) const = default;
};

// splitmix64 finalizer; used to derive independent rng streams.
inline std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic child seed for a (base, tag...) tuple.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix_seed(base);
  for (auto t : tags) s = mix_seed(s ^ mix_seed(t + 0x632be59bd9b4e019ULL));
  return s;
}

/// Runs f(i) for i in [0, n) on up to `threads` workers. Work is split into
/// contiguous chunks so results written by index do not depend on the thread
/// count. The exception of the lowest failing chunk is rethrown.
template <typename F>
void parallel_for(Index n, int threads, F&& f) {
  if (n <= 0) return;
  const Index workers = std::min<Index>(std::max(threads, 1), n);
  if (workers == 1) {
    for (Index i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
      const Index lo = n * w / workers;
      const Index hi = n * (w + 1) / workers;
      pool.emplace_back([&, w, lo, hi] {
        try {
          for (Index i = lo; i < hi; ++i) f(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline int default_thread_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace sswim
