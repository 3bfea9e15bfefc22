// Compactly supported 1-D kernel families used as post-synaptic potential
// kernels and refractory kernels, plus their placement on the time grid.
#pragma once

#include "sswim/core.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

namespace sswim {

enum class KernelFamily { Hat, RectMorlet, RectExpDecay };

/// Which part of the time axis survives rectification: t >= 0, t > 0, or all.
enum class Rectification { Inclusive, Exclusive, None };

struct KernelSpec {
  KernelFamily family = KernelFamily::Hat;
  Rectification rectification = Rectification::Inclusive;

  bool operator==(const KernelSpec&) const = default;
};

/// PSPKs are rectified inclusively, refractory kernels exclusively.
inline KernelSpec pspk_spec(KernelFamily f) {
  return {f, Rectification::Inclusive};
}
inline KernelSpec rfk_spec(KernelFamily f) {
  return {f, Rectification::Exclusive};
}

/// Analytic kernel value in unscaled coordinates. Zero for |x| > 1 for every
/// family. Rectification acts on time, not on x, and is ignored here.
inline double evaluate_kernel(KernelSpec spec, double x) {
  const double ax = std::abs(x);
  switch (spec.family) {
    case KernelFamily::Hat:
      return std::max(1.0 - ax, 0.0);
    case KernelFamily::RectMorlet:
      if (ax > 1.0) return 0.0;
      return std::exp(-3.0 * x * x) * std::cos(2.0 * std::numbers::pi * x);
    case KernelFamily::RectExpDecay:
      if (ax > 1.0) return 0.0;
      return std::exp(-x);
  }
  return 0.0;
}

/// Location of the kernel maximum in unscaled coordinates. Hat and Morlet
/// peak at the origin; the decaying exponential peaks at the left end of its
/// rectified domain, which is also the origin.
inline double kernel_peak_offset(KernelSpec spec) {
  switch (spec.family) {
    case KernelFamily::Hat:
    case KernelFamily::RectMorlet:
    case KernelFamily::RectExpDecay:
      return 0.0;
  }
  return 0.0;
}

inline std::string_view kernel_family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::Hat:
      return "hat";
    case KernelFamily::RectMorlet:
      return "morlet";
    case KernelFamily::RectExpDecay:
      return "exp";
  }
  return "?";
}

inline KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "hat") return KernelFamily::Hat;
  if (name == "morlet") return KernelFamily::RectMorlet;
  if (name == "exp") return KernelFamily::RectExpDecay;
  throw ArgumentError("unknown kernel family '" + std::string(name) +
                      "' (expected hat, morlet or exp)");
}

inline std::string_view rectification_name(Rectification r) {
  switch (r) {
    case Rectification::Inclusive:
      return "inclusive";
    case Rectification::Exclusive:
      return "exclusive";
    case Rectification::None:
      return "none";
  }
  return "?";
}

inline Rectification parse_rectification(std::string_view name) {
  if (name == "inclusive") return Rectification::Inclusive;
  if (name == "exclusive") return Rectification::Exclusive;
  if (name == "none") return Rectification::None;
  throw ArgumentError("unknown rectification '" + std::string(name) + "'");
}

/// Kernel shifted by `delay` and stretched by `support`:
/// t -> spec((t - delay) / support), rectified in t.
struct PlacedKernel {
  KernelSpec spec;
  double delay = 0.0;
  double support = 1.0;

  PlacedKernel() = default;
  PlacedKernel(KernelSpec s, double tau, double sigma)
      : spec(s), delay(tau), support(sigma) {
    if (!(sigma > 0.0)) throw ArgumentError("kernel support must be > 0");
  }

  double operator()(double t) const {
    switch (spec.rectification) {
      case Rectification::Inclusive:
        if (t < 0.0) return 0.0;
        break;
      case Rectification::Exclusive:
        if (t <= 0.0) return 0.0;
        break;
      case Rectification::None:
        break;
    }
    return evaluate_kernel(spec, (t - delay) / support);
  }
};

/// Nonzero samples of a placed kernel at t = s*dt, s >= 0, stored from step
/// `first` onward. Causal convolutions only need these taps.
struct KernelTaps {
  Index first = 0;
  std::vector<double> values;

  bool empty() const noexcept { return values.empty(); }
  Index size() const noexcept { return static_cast<Index>(values.size()); }
  /// One past the last nonzero step.
  Index end() const noexcept { return first + size(); }
  double at(Index s) const {
    return (s < first || s >= end()) ? 0.0
                                     : values[static_cast<std::size_t>(s - first)];
  }
  double squared_norm() const {
    double n = 0.0;
    for (double v : values) n += v * v;
    return n;
  }
};

inline KernelTaps kernel_taps(const PlacedKernel& pk, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("dt must be > 0");
  // Support in x is [-1, 1]; widen by one step and let evaluation decide.
  const double lo_t = pk.delay - pk.support;
  const double hi_t = pk.delay + pk.support;
  const Index lo = std::max<Index>(0, static_cast<Index>(std::floor(lo_t / dt)) - 1);
  const Index hi = std::max<Index>(0, static_cast<Index>(std::ceil(hi_t / dt)) + 1);
  KernelTaps taps;
  Index first_nz = -1, last_nz = -1;
  std::vector<double> buf;
  buf.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (Index s = lo; s <= hi; ++s) {
    const double v = pk(static_cast<double>(s) * dt);
    buf.push_back(v);
    if (v != 0.0) {
      if (first_nz < 0) first_nz = s;
      last_nz = s;
    }
  }
  if (first_nz < 0) return taps;
  taps.first = first_nz;
  taps.values.assign(buf.begin() + (first_nz - lo), buf.begin() + (last_nz - lo) + 1);
  return taps;
}

/// Samples the placed kernel at t = 0, dt, 2dt, ... as a 1-channel signal.
inline DiscreteSignal discretize_placed_kernel(const PlacedKernel& pk, double dt,
                                               Index grid_len) {
  if (!(dt > 0.0)) throw ArgumentError("dt must be > 0");
  if (grid_len <= 0) throw ArgumentError("empty grid");
  DiscreteSignal out(1, grid_len, dt);
  for (Index s = 0; s < grid_len; ++s)
    out.values(0, s) = pk(static_cast<double>(s) * dt);
  return out;
}

}  // namespace sswim
