// Pseudometrics on function and spike-train spaces, the pair sampling
// distribution built from them, and entropy-based metric selection.
#pragma once

#include "sswim/core.hpp"
#include "sswim/kernels.hpp"
#include "sswim/srm_network.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

namespace sswim {

enum class EmbeddingKind {
  L2Identity,
  CosineNormalized,
  FourierMagnitude,
  FourierPhase,
  FourierBand
};

/// Embedding E of a pseudometric d(x, y) = ||E(x) - E(y)||. Band limits are
/// frequency bins: bin k is kept iff band_lo <= min(k, N - k) <= band_hi.
struct EmbeddingSpec {
  EmbeddingKind kind = EmbeddingKind::L2Identity;
  Index band_lo = 0;
  Index band_hi = 0;

  bool operator==(const EmbeddingSpec&) const = default;

  std::string name() const {
    switch (kind) {
      case EmbeddingKind::L2Identity:
        return "l2";
      case EmbeddingKind::CosineNormalized:
        return "cos";
      case EmbeddingKind::FourierMagnitude:
        return "mag";
      case EmbeddingKind::FourierPhase:
        return "phase";
      case EmbeddingKind::FourierBand:
        return "band:" + std::to_string(band_lo) + ":" + std::to_string(band_hi);
    }
    return "?";
  }

  static EmbeddingSpec parse(std::string_view s) {
    if (s == "l2") return {EmbeddingKind::L2Identity};
    if (s == "cos") return {EmbeddingKind::CosineNormalized};
    if (s == "mag") return {EmbeddingKind::FourierMagnitude};
    if (s == "phase") return {EmbeddingKind::FourierPhase};
    if (s.starts_with("band:")) {
      const auto rest = s.substr(5);
      const auto colon = rest.find(':');
      if (colon != std::string_view::npos) {
        try {
          std::size_t p1 = 0, p2 = 0;
          const std::string lo_s(rest.substr(0, colon)), hi_s(rest.substr(colon + 1));
          const long lo = std::stol(lo_s, &p1);
          const long hi = std::stol(hi_s, &p2);
          if (p1 == lo_s.size() && p2 == hi_s.size() && lo >= 0 && hi >= lo)
            return {EmbeddingKind::FourierBand, lo, hi};
        } catch (const std::exception&) {
        }
      }
    }
    throw ArgumentError("unknown embedding '" + std::string(s) +
                        "' (expected l2, cos, mag, phase or band:lo:hi)");
  }
};

/// The five embeddings offered to the entropy criterion by default.
inline std::vector<EmbeddingSpec> default_embedding_candidates(Index window_length) {
  const Index nyquist = window_length / 2;
  return {{EmbeddingKind::L2Identity},
          {EmbeddingKind::CosineNormalized},
          {EmbeddingKind::FourierMagnitude},
          {EmbeddingKind::FourierPhase},
          {EmbeddingKind::FourierBand, (nyquist + 1) / 2, nyquist}};
}

/// Subtracts the temporal mean of every channel.
inline DiscreteSignal center_channels(const DiscreteSignal& x) {
  DiscreteSignal out = x;
  for (Index c = 0; c < out.channels(); ++c) {
    const double mean = out.values.row(c).mean();
    out.values.row(c).array() -= mean;
  }
  return out;
}

namespace detail {

// Unitary DFT of one channel, so Parseval holds with the identity embedding.
inline std::vector<std::complex<double>> unitary_dft(std::span<const double> x) {
  static thread_local Eigen::FFT<double> fft;
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
  for (auto& v : out) v *= scale;
  return out;
}

inline bool bin_in_band(Index k, Index n, Index lo, Index hi) {
  const Index f = std::min(k, n - k);
  return f >= lo && f <= hi;
}

}  // namespace detail

/// Applies the embedding channel-wise; the input is not centered here.
inline Eigen::MatrixXcd embed(const EmbeddingSpec& spec, const DiscreteSignal& f) {
  const Index C = f.channels(), N = f.length();
  Eigen::MatrixXcd out(C, N);
  switch (spec.kind) {
    case EmbeddingKind::L2Identity:
      out = f.values.cast<std::complex<double>>();
      return out;
    case EmbeddingKind::CosineNormalized: {
      const double norm = std::sqrt(f.values.squaredNorm() * f.dt);
      if (norm == 0.0) return Eigen::MatrixXcd::Zero(C, N);
      out = (f.values / norm).cast<std::complex<double>>();
      return out;
    }
    case EmbeddingKind::FourierMagnitude:
    case EmbeddingKind::FourierPhase:
    case EmbeddingKind::FourierBand:
      break;
  }
  for (Index c = 0; c < C; ++c) {
    const auto F = detail::unitary_dft(f.channel(c));
    const double ch_norm = f.values.row(c).norm();
    // Bins this far below the channel energy are numerically zero.
    const double zero_tol = 1e-12 * ch_norm;
    for (Index k = 0; k < N; ++k) {
      const auto v = F[static_cast<std::size_t>(k)];
      switch (spec.kind) {
        case EmbeddingKind::FourierMagnitude:
          out(c, k) = std::abs(v);
          break;
        case EmbeddingKind::FourierPhase: {
          const double mag = std::abs(v);
          out(c, k) = (mag <= zero_tol || mag == 0.0) ? std::complex<double>(0.0)
                                                      : v / mag;
          break;
        }
        case EmbeddingKind::FourierBand:
          out(c, k) = detail::bin_in_band(k, N, spec.band_lo, spec.band_hi)
                          ? v
                          : std::complex<double>(0.0);
          break;
        default:
          break;
      }
    }
  }
  return out;
}

/// Centers, embeds and flattens a signal into a real feature vector whose
/// Euclidean distances are the pseudometric distances.
inline Eigen::VectorXd embedded_features(const EmbeddingSpec& spec,
                                         const DiscreteSignal& f) {
  const Eigen::MatrixXcd e = embed(spec, center_channels(f));
  const double w = std::sqrt(f.dt);
  const bool real = spec.kind == EmbeddingKind::L2Identity ||
                    spec.kind == EmbeddingKind::CosineNormalized ||
                    spec.kind == EmbeddingKind::FourierMagnitude;
  Eigen::VectorXd out(real ? e.size() : 2 * e.size());
  Index k = 0;
  for (Index c = 0; c < e.rows(); ++c)
    for (Index t = 0; t < e.cols(); ++t) {
      out(k++) = w * e(c, t).real();
      if (!real) out(k++) = w * e(c, t).imag();
    }
  return out;
}

inline double feature_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm();
}

/// d(a, b) = ||E(a - mean a) - E(b - mean b)||.
inline double pseudometric(const EmbeddingSpec& spec, const DiscreteSignal& a,
                           const DiscreteSignal& b) {
  if (a.channels() != b.channels() || a.length() != b.length())
    throw ShapeError("pseudometric operands differ in shape");
  return feature_distance(embedded_features(spec, a), embedded_features(spec, b));
}

/// Van Rossum lift: convolves every spike train with `kernel`.
inline DiscreteSignal van_rossum_lift(const SpikeTrainSet& s, const PlacedKernel& kernel,
                                      double dt) {
  const KernelTaps taps = kernel_taps(kernel, dt);
  DiscreteSignal out(s.neurons(), s.length, dt);
  for (Index j = 0; j < s.neurons(); ++j)
    place_spikes_add(s.train(j), taps, 1.0, out.channel(j));
  return out;
}

inline double pseudometric(const EmbeddingSpec& spec, const SpikeTrainSet& a,
                           const SpikeTrainSet& b, const PlacedKernel& lift,
                           double dt) {
  if (a.neurons() != b.neurons() || a.length != b.length)
    throw ShapeError("pseudometric operands differ in shape");
  return pseudometric(spec, van_rossum_lift(a, lift, dt), van_rossum_lift(b, lift, dt));
}

// ---------------------------------------------------------------------------
// Lower-triangular pair indexing: pair (n, m) with n > m has flat index
// n(n-1)/2 + m.

inline Index pair_count(Index samples) { return samples * (samples - 1) / 2; }

inline Index flat_pair_index(Index n, Index m) {
  if (n < m) std::swap(n, m);
  return n * (n - 1) / 2 + m;
}

inline std::pair<Index, Index> unflatten_pair(Index k) {
  Index n = static_cast<Index>(
      std::floor((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(k))) / 2.0));
  while (n * (n - 1) / 2 > k) --n;
  while ((n + 1) * n / 2 <= k) ++n;
  return {n, k - n * (n - 1) / 2};
}

/// All pairwise distances of a feature set, flattened lower triangle.
inline std::vector<double> pairwise_distances(const std::vector<Eigen::VectorXd>& feats,
                                              int threads = 1) {
  const Index M = static_cast<Index>(feats.size());
  std::vector<double> d(static_cast<std::size_t>(pair_count(M)));
  parallel_for(M, threads, [&](Index n) {
    const auto& a = feats[static_cast<std::size_t>(n)];
    for (Index m = 0; m < n; ++m)
      d[static_cast<std::size_t>(flat_pair_index(n, m))] =
          feature_distance(a, feats[static_cast<std::size_t>(m)]);
  });
  return d;
}

/// Samples whose every channel has centered L2 norm below `min_norm` are
/// flagged invalid (false).
inline std::vector<bool> norm_filter(std::span<const DiscreteSignal> samples,
                                     double min_norm) {
  std::vector<bool> ok(samples.size());
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const DiscreteSignal c = center_channels(samples[n]);
    bool any = false;
    for (Index ch = 0; ch < c.channels() && !any; ++ch)
      any = std::sqrt(c.values.row(ch).squaredNorm() * c.dt) >= min_norm;
    ok[n] = any;
  }
  return ok;
}

/// Normalized sampling distribution over sample pairs.
struct PairProbabilities {
  std::vector<double> probabilities;  // flat lower triangle, sums to 1
  double normalization = 0.0;         // sum of the unnormalized ratios
  Index sample_count = 0;

  Index size() const noexcept { return static_cast<Index>(probabilities.size()); }
};

/// ratios num_k / (den_k + eps), normalized. Entries with zero numerator are
/// zero even when the denominator vanishes.
inline std::vector<double> normalized_ratios(std::span<const double> num,
                                             std::span<const double> den, double eps,
                                             double* total_out = nullptr) {
  if (num.size() != den.size()) throw ShapeError("ratio operands differ in length");
  if (eps < 0.0) throw ArgumentError("epsilon must be >= 0");
  std::vector<double> r(num.size());
  double total = 0.0;
  for (std::size_t k = 0; k < num.size(); ++k) {
    if (num[k] == 0.0) {
      r[k] = 0.0;
      continue;
    }
    const double d = den[k] + eps;
    if (!(d > 0.0))
      throw DegenerateError("unbounded pair ratio: zero input distance with eps = 0");
    r[k] = num[k] / d;
    total += r[k];
  }
  if (!(total > 0.0) || !std::isfinite(total))
    throw DegenerateError("degenerate distribution: all pair probabilities are zero");
  for (auto& v : r) v /= total;
  if (total_out) *total_out = total;
  return r;
}

/// Pair distribution from precomputed flat distance vectors. Pairs touching
/// an invalid sample get probability zero.
inline PairProbabilities pair_probabilities(std::span<const double> d_in,
                                            std::span<const double> d_out,
                                            const std::vector<bool>& valid, double eps) {
  const Index M = static_cast<Index>(valid.size());
  if (M < 2) throw ArgumentError("need at least two samples");
  if (static_cast<Index>(d_in.size()) != pair_count(M) ||
      static_cast<Index>(d_out.size()) != pair_count(M))
    throw ShapeError("distance vectors do not match the sample count");
  std::vector<double> num(d_out.begin(), d_out.end());
  for (Index n = 1; n < M; ++n)
    for (Index m = 0; m < n; ++m)
      if (!valid[static_cast<std::size_t>(n)] || !valid[static_cast<std::size_t>(m)])
        num[static_cast<std::size_t>(flat_pair_index(n, m))] = 0.0;
  PairProbabilities p;
  p.sample_count = M;
  p.probabilities = normalized_ratios(num, d_in, eps, &p.normalization);
  return p;
}

inline PairProbabilities pair_probabilities(std::span<const DiscreteSignal> inputs,
                                            std::span<const DiscreteSignal> targets,
                                            const EmbeddingSpec& d_in,
                                            const EmbeddingSpec& d_out, double eps,
                                            double min_norm, int threads = 1) {
  if (inputs.size() != targets.size()) throw ShapeError("input/target count mismatch");
  std::vector<Eigen::VectorXd> fin, fout;
  for (const auto& x : inputs) fin.push_back(embedded_features(d_in, x));
  for (const auto& y : targets) fout.push_back(embedded_features(d_out, y));
  const auto din = pairwise_distances(fin, threads);
  const auto dout = pairwise_distances(fout, threads);
  return pair_probabilities(din, dout, norm_filter(inputs, min_norm), eps);
}

/// Draws sample pairs proportionally to a PairProbabilities table.
class PairSampler {
 public:
  explicit PairSampler(const PairProbabilities& p) : cdf_(p.probabilities.size()) {
    double acc = 0.0;
    for (std::size_t k = 0; k < cdf_.size(); ++k) {
      acc += p.probabilities[k];
      cdf_[k] = acc;
    }
    if (cdf_.empty() || !(acc > 0.0))
      throw DegenerateError("degenerate distribution: nothing to sample");
  }

  /// Returns (n, m) with n > m.
  std::pair<Index, Index> operator()(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double target = u(rng) * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    if (it == cdf_.end()) --it;
    // Skip trailing zero-probability entries that share the final cdf value.
    Index k = static_cast<Index>(it - cdf_.begin());
    while (k > 0 && cdf_[static_cast<std::size_t>(k)] == cdf_[static_cast<std::size_t>(k - 1)])
      --k;
    return unflatten_pair(k);
  }

 private:
  std::vector<double> cdf_;
};

inline std::pair<Index, Index> sample_pair(const PairProbabilities& p, Rng& rng) {
  return PairSampler(p)(rng);
}

/// Natural-log Shannon entropy with 0 log 0 = 0.
inline double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return std::max(h, 0.0);
}

inline double shannon_entropy(const PairProbabilities& p) {
  return shannon_entropy(p.probabilities);
}

struct MetricSelection {
  EmbeddingSpec input;
  EmbeddingSpec output;
  double entropy = 0.0;
  /// entropies(a, b) for input candidate a and output candidate b; NaN marks
  /// a degenerate combination.
  Eigen::MatrixXd entropies;
};

/// Picks the (input, output) embedding pair whose pair distribution has the
/// lowest entropy. Distance matrices are computed once per candidate. Ties go
/// to the earlier candidate (input list first, then output list). With an
/// entropy floor, combinations below the floor are not eligible.
inline MetricSelection select_metrics(std::span<const DiscreteSignal> inputs,
                                      std::span<const DiscreteSignal> targets,
                                      const std::vector<EmbeddingSpec>& candidates_in,
                                      const std::vector<EmbeddingSpec>& candidates_out,
                                      double eps, double min_norm,
                                      std::optional<double> entropy_floor = std::nullopt,
                                      int threads = 1) {
  if (candidates_in.empty() || candidates_out.empty())
    throw ArgumentError("metric candidate lists must be nonempty");
  if (inputs.size() != targets.size()) throw ShapeError("input/target count mismatch");
  const auto valid = norm_filter(inputs, min_norm);
  auto distances = [&](std::span<const DiscreteSignal> xs, const EmbeddingSpec& e) {
    std::vector<Eigen::VectorXd> f;
    f.reserve(xs.size());
    for (const auto& x : xs) f.push_back(embedded_features(e, x));
    return pairwise_distances(f, threads);
  };
  std::vector<std::vector<double>> din, dout;
  for (const auto& e : candidates_in) din.push_back(distances(inputs, e));
  for (const auto& e : candidates_out) dout.push_back(distances(targets, e));

  MetricSelection best;
  best.entropies = Eigen::MatrixXd::Constant(static_cast<Index>(candidates_in.size()),
                                             static_cast<Index>(candidates_out.size()),
                                             std::numeric_limits<double>::quiet_NaN());
  bool found = false;
  for (std::size_t a = 0; a < candidates_in.size(); ++a)
    for (std::size_t b = 0; b < candidates_out.size(); ++b) {
      double h;
      try {
        h = shannon_entropy(pair_probabilities(din[a], dout[b], valid, eps));
      } catch (const DegenerateError&) {
        continue;
      }
      best.entropies(static_cast<Index>(a), static_cast<Index>(b)) = h;
      if (entropy_floor && h < *entropy_floor) continue;
      if (!found || h < best.entropy) {
        best.input = candidates_in[a];
        best.output = candidates_out[b];
        best.entropy = h;
        found = true;
      }
    }
  if (!found)
    throw DegenerateError("metric selection: every candidate combination is degenerate");
  return best;
}

}  // namespace sswim
