// Construction of hidden layers: temporal parameters, sampled weight
// directions from pair eigenproblems, voltage statistics and normalization.
#pragma once

#include "sswim/core.hpp"
#include "sswim/kernels.hpp"
#include "sswim/sampling.hpp"
#include "sswim/srm_network.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <variant>

namespace sswim {

struct TemporalAssignment {
  Eigen::VectorXd delay;
  Eigen::VectorXd support;
  Eigen::VectorXd refractory_support;
};

/// Delays spread linearly over [0, (l/L) tau_max), supports cycling through
/// `sigma_count` values in [sigma_min, sigma_max], refractory support
/// sigma_min. `layer` is 1-based.
inline TemporalAssignment temporal_assignment(Index layer, Index layers, Index width,
                                              Index observation, Index horizon,
                                              double sigma_min, double sigma_max,
                                              Index sigma_count) {
  if (layer < 1 || layer > layers) throw ArgumentError("layer index out of range");
  if (width < 1) throw ArgumentError("layer width must be >= 1");
  if (observation < 1 || horizon < 1) throw ArgumentError("O and H must be >= 1");
  if (!(sigma_min > 0.0) || sigma_max < sigma_min)
    throw ArgumentError("need 0 < sigma_min <= sigma_max");
  if (sigma_count < 2) throw ArgumentError("sigma count must be >= 2");
  const double tau_max = observation >= horizon ? 0.5 * static_cast<double>(observation)
                                                : static_cast<double>(horizon);
  const double span = static_cast<double>(layer) * tau_max / static_cast<double>(layers);
  TemporalAssignment a;
  a.delay.resize(width);
  a.support.resize(width);
  a.refractory_support = Eigen::VectorXd::Constant(width, sigma_min);
  for (Index i = 0; i < width; ++i) {
    a.delay(i) = static_cast<double>(i) / static_cast<double>(width) * span;
    const double frac = static_cast<double>(i % sigma_count) /
                        static_cast<double>(sigma_count - 1);
    a.support(i) = frac * (sigma_max - sigma_min) + sigma_min;
  }
  return a;
}

/// PSP contributions of every input channel under one placed kernel, on the
/// full input grid (channels x steps).
inline DiscreteSignal psp_matrix(const KernelTaps& taps, const DiscreteSignal& input) {
  DiscreteSignal out(input.channels(), input.length(), input.dt);
  for (Index j = 0; j < input.channels(); ++j)
    causal_convolve_add(input.channel(j), taps, input.dt, 1.0, out.channel(j));
  return out;
}

inline DiscreteSignal psp_matrix(const KernelTaps& taps, const SpikeTrainSet& input,
                                 double dt) {
  DiscreteSignal out(input.neurons(), input.length, dt);
  for (Index j = 0; j < input.neurons(); ++j)
    place_spikes_add(input.train(j), taps, 1.0, out.channel(j));
  return out;
}

/// A^dist = dt * sum_t (psi1 - psi2)(psi1 - psi2)^T.
inline Eigen::MatrixXd dist_matrix(const DiscreteSignal& psi1, const DiscreteSignal& psi2) {
  if (psi1.channels() != psi2.channels() || psi1.length() != psi2.length())
    throw ShapeError("pair PSPs differ in shape");
  const Eigen::MatrixXd d = psi1.values - psi2.values;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d.rows(), d.rows());
  a.selfadjointView<Eigen::Lower>().rankUpdate(d, psi1.dt);
  return a.selfadjointView<Eigen::Lower>();
}

/// A^dot = dt/2 * sum_t (psi1 psi2^T + psi2 psi1^T).
inline Eigen::MatrixXd dot_matrix(const DiscreteSignal& psi1, const DiscreteSignal& psi2) {
  if (psi1.channels() != psi2.channels() || psi1.length() != psi2.length())
    throw ShapeError("pair PSPs differ in shape");
  const Eigen::MatrixXd c = psi1.values * psi2.values.transpose();
  return 0.5 * psi1.dt * (c + c.transpose());
}

/// Flips the sign so that the largest-magnitude component is positive (the
/// first one on exact ties).
inline void fix_sign(Eigen::VectorXd& w) {
  if (w.size() == 0) return;
  Index k = 0;
  w.cwiseAbs().maxCoeff(&k);
  if (w(k) < 0.0) w = -w;
}

namespace detail {

inline Eigen::VectorXd extremal_eigenvector(const Eigen::MatrixXd& a, bool largest) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success)
    throw DegenerateError("symmetric eigensolver did not converge");
  Eigen::VectorXd w = es.eigenvectors().col(largest ? a.rows() - 1 : 0);
  w.normalize();
  fix_sign(w);
  return w;
}

}  // namespace detail

/// Unit direction maximizing the pair distance dt * sum_t <w, psi1 - psi2>^2.
inline Eigen::VectorXd weight_dist(const DiscreteSignal& psi1, const DiscreteSignal& psi2) {
  const Eigen::MatrixXd a = dist_matrix(psi1, psi2);
  if (a.trace() <= 0.0)
    throw DegenerateError("trivial pair: identical PSP contributions");
  return detail::extremal_eigenvector(a, true);
}

/// Unit direction minimizing dt * sum_t <w, psi1><w, psi2>. A zero matrix
/// leaves every direction optimal; e_1 is returned then.
inline Eigen::VectorXd weight_dot(const DiscreteSignal& psi1, const DiscreteSignal& psi2) {
  const Eigen::MatrixXd a = dot_matrix(psi1, psi2);
  if (a.size() == 0) throw ShapeError("empty PSP contributions");
  if (a.isZero(0.0)) return Eigen::VectorXd::Unit(a.rows(), 0);
  return detail::extremal_eigenvector(a, false);
}

/// Standard normal draw normalized to unit length.
inline Eigen::VectorXd weight_random(Index dim, Rng& rng) {
  if (dim < 1) throw ArgumentError("weight dimension must be >= 1");
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd w(dim);
  double n2 = 0.0;
  do {
    for (Index j = 0; j < dim; ++j) w(j) = nd(rng);
    n2 = w.squaredNorm();
  } while (n2 == 0.0);
  return w / std::sqrt(n2);
}

enum class WeightCriterion { Dist, Dot, Random };
enum class NormalizerKind { MeanStd, Fluctuation };

inline std::string_view weight_criterion_name(WeightCriterion c) {
  switch (c) {
    case WeightCriterion::Dist:
      return "dist";
    case WeightCriterion::Dot:
      return "dot";
    case WeightCriterion::Random:
      return "random";
  }
  return "?";
}

inline WeightCriterion parse_weight_criterion(std::string_view s) {
  if (s == "dist") return WeightCriterion::Dist;
  if (s == "dot") return WeightCriterion::Dot;
  if (s == "random") return WeightCriterion::Random;
  throw ArgumentError("unknown weight criterion '" + std::string(s) +
                      "' (expected dist, dot or random)");
}

inline std::string_view normalizer_name(NormalizerKind k) {
  return k == NormalizerKind::MeanStd ? "ms" : "fl";
}

inline NormalizerKind parse_normalizer(std::string_view s) {
  if (s == "ms") return NormalizerKind::MeanStd;
  if (s == "fl") return NormalizerKind::Fluctuation;
  throw ArgumentError("unknown normalizer '" + std::string(s) + "' (expected ms or fl)");
}

/// Expected temporal mean E, expected temporal standard deviation S and
/// global maximum M of a neuron's input contribution over a sample set.
struct VoltageStats {
  double mean = 0.0;
  double stddev = 0.0;
  double max = -std::numeric_limits<double>::infinity();
  Index samples = 0;
};

/// Single-pass accumulation: Welford within each trace (population
/// variance), running means across traces.
class VoltageStatsAccumulator {
 public:
  void add_trace(std::span<const double> v) {
    if (v.empty()) throw ArgumentError("empty voltage trace");
    double mean = 0.0, m2 = 0.0;
    Index k = 0;
    for (double x : v) {
      ++k;
      const double d = x - mean;
      mean += d / static_cast<double>(k);
      m2 += d * (x - mean);
      if (x > stats_.max) stats_.max = x;
    }
    const double sd = std::sqrt(std::max(m2 / static_cast<double>(k), 0.0));
    ++stats_.samples;
    const double n = static_cast<double>(stats_.samples);
    stats_.mean += (mean - stats_.mean) / n;
    stats_.stddev += (sd - stats_.stddev) / n;
  }

  const VoltageStats& stats() const {
    if (stats_.samples == 0) throw ArgumentError("no voltage traces accumulated");
    return stats_;
  }

 private:
  VoltageStats stats_;
};

inline VoltageStats voltage_stats(const std::vector<std::vector<double>>& traces) {
  VoltageStatsAccumulator acc;
  for (const auto& t : traces) acc.add_trace(t);
  return acc.stats();
}

/// Stats of <w, psi(t)> over all samples of a layer input, on the full grid.
template <typename Input>
VoltageStats voltage_stats(const Eigen::VectorXd& w, const KernelTaps& taps,
                           std::span<const Input> inputs) {
  VoltageStatsAccumulator acc;
  for (const auto& x : inputs) acc.add_trace(weighted_psp(taps, x, w));
  return acc.stats();
}

/// Scale alpha, bias beta and spike-cost numerator gamma of one neuron.
struct NormalizerResult {
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 0.0;
  double silence_correction = 0.0;
};

inline constexpr double kMinTraceStd = 1e-12;

namespace detail {

// Raises the bias until the largest scaled voltage reaches 1 + eps.
inline double silence_correction(double scaled_max, double eps) {
  return scaled_max < 1.0 ? (1.0 + eps) - scaled_max : 0.0;
}

}  // namespace detail

inline NormalizerResult normalize_ms(const VoltageStats& s, double mu_t, double s_t,
                                     double eps_sc) {
  if (!(mu_t < 1.0)) throw ArgumentError("MS target mean must be < 1");
  if (!(s_t > 0.0)) throw ArgumentError("MS target std must be > 0");
  if (!(s.stddev >= kMinTraceStd))
    throw DegenerateError("constant voltage trace: temporal std below floor");
  NormalizerResult r;
  r.alpha = s_t / s.stddev;
  const double base = mu_t - s_t * s.mean / s.stddev;
  r.silence_correction = detail::silence_correction(r.alpha * s.max + base, eps_sc);
  r.beta = base + r.silence_correction;
  r.gamma = -3.0 * s_t;
  return r;
}

inline NormalizerResult normalize_fl(const VoltageStats& s, double z, double eps_sc) {
  if (!(z > 0.0)) throw ArgumentError("FL fluctuation parameter must be > 0");
  NormalizerResult r;
  r.alpha = 1.0;
  const double base = 1.0 - z * s.stddev - s.mean;
  r.silence_correction = detail::silence_correction(s.max + base, eps_sc);
  r.beta = base + r.silence_correction;
  r.gamma = -3.0 * s.stddev;
  return r;
}

struct HiddenLayerConfig {
  Index width = 250;
  KernelSpec pspk = pspk_spec(KernelFamily::Hat);
  KernelSpec rfk = rfk_spec(KernelFamily::RectExpDecay);
  double sigma_min = 5.0;
  double sigma_max = 50.0;
  Index sigma_count = 10;
  WeightCriterion weight = WeightCriterion::Dot;
  NormalizerKind normalizer = NormalizerKind::MeanStd;
  double mu_t = 0.5;
  double s_t = 0.5;
  double z = 1.0;
  double eps_sc = 1e-9;
  int max_retries = 8;
};

/// Input of a hidden layer over the initialization batch: padded real-valued
/// signals for the first layer, spike trains afterwards.
using LayerInputs =
    std::variant<std::span<const DiscreteSignal>, std::span<const SpikeTrainSet>>;

inline Index layer_input_count(const LayerInputs& in) {
  return std::visit([](auto s) { return static_cast<Index>(s.size()); }, in);
}

/// Views of a layer input used by the input pseudometric: raw signals are
/// compared on the observation window [0, O); spike trains are lifted with
/// `lift` over the whole grid.
inline std::vector<DiscreteSignal> metric_views(const LayerInputs& in, Index observation,
                                                const PlacedKernel& lift, double dt) {
  std::vector<DiscreteSignal> out;
  if (const auto* sig = std::get_if<std::span<const DiscreteSignal>>(&in)) {
    for (const auto& x : *sig) {
      if (x.length() < observation) throw ShapeError("input shorter than observation");
      out.emplace_back(RowMatrix(x.values.leftCols(observation)), x.dt);
    }
  } else {
    for (const auto& s : std::get<std::span<const SpikeTrainSet>>(in))
      out.push_back(van_rossum_lift(s, lift, dt));
  }
  return out;
}

struct HiddenLayerBuild {
  LayerParams layer;
  std::vector<VoltageStats> stats;  // raw, before scaling
  std::vector<NormalizerResult> normalization;
  std::vector<int> attempts;  // pair draws used per neuron
};

/// Builds hidden layer `layer` (1-based, of `layers`) from the pair
/// distribution `P` over the initialization batch.
inline HiddenLayerBuild build_hidden_layer(Index layer, Index layers,
                                           const HiddenLayerConfig& cfg,
                                           const LayerInputs& inputs,
                                           const PairProbabilities& P, const TimeGrid& grid,
                                           std::uint64_t seed, int threads = 1) {
  const Index M = layer_input_count(inputs);
  if (M < 2) throw ArgumentError("initialization batch needs >= 2 samples");
  if (P.sample_count != M) throw ShapeError("pair distribution does not match the batch");
  Index in_width = 0;
  std::visit(
      [&](auto s) {
        using T = typename decltype(s)::value_type;
        for (const auto& x : s) {
          if constexpr (std::is_same_v<T, DiscreteSignal>) {
            if (x.length() != grid.length()) throw ShapeError("input not on model grid");
            in_width = x.channels();
          } else {
            if (x.length != grid.length()) throw ShapeError("spikes not on model grid");
            in_width = x.neurons();
          }
        }
      },
      inputs);

  const TemporalAssignment ta =
      temporal_assignment(layer, layers, cfg.width, grid.observation, grid.horizon,
                          cfg.sigma_min, cfg.sigma_max, cfg.sigma_count);
  HiddenLayerBuild out;
  LayerParams& lp = out.layer;
  lp.pspk = cfg.pspk;
  lp.rfk = cfg.rfk;
  lp.weights.resize(cfg.width, in_width);
  lp.bias.resize(cfg.width);
  lp.spike_cost.resize(cfg.width);
  lp.delay = ta.delay;
  lp.support = ta.support;
  lp.refractory_support = ta.refractory_support;
  out.stats.resize(static_cast<std::size_t>(cfg.width));
  out.normalization.resize(static_cast<std::size_t>(cfg.width));
  out.attempts.assign(static_cast<std::size_t>(cfg.width), 0);

  const double q0 = evaluate_kernel(cfg.rfk, 0.0);
  if (!(q0 != 0.0)) throw ArgumentError("refractory kernel vanishes at 0");
  const PairSampler sampler(P);

  parallel_for(cfg.width, threads, [&](Index i) {
    const KernelTaps taps =
        kernel_taps(PlacedKernel(cfg.pspk, ta.delay(i), ta.support(i)), grid.dt);
    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(layer),
                                 static_cast<std::uint64_t>(i),
                                 static_cast<std::uint64_t>(attempt)}));
      try {
        const auto [n, m] = sampler(rng);
        Eigen::VectorXd w;
        std::visit(
            [&](auto s) {
              auto psi = [&](Index k) {
                const auto& x = s[static_cast<std::size_t>(k)];
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, DiscreteSignal>)
                  return psp_matrix(taps, x);
                else
                  return psp_matrix(taps, x, grid.dt);
              };
              switch (cfg.weight) {
                case WeightCriterion::Dist:
                  w = weight_dist(psi(n), psi(m));
                  break;
                case WeightCriterion::Dot:
                  w = weight_dot(psi(n), psi(m));
                  break;
                case WeightCriterion::Random:
                  w = weight_random(in_width, rng);
                  break;
              }
              out.stats[static_cast<std::size_t>(i)] = voltage_stats(w, taps, s);
            },
            inputs);
        const VoltageStats& st = out.stats[static_cast<std::size_t>(i)];
        const NormalizerResult nr =
            cfg.normalizer == NormalizerKind::MeanStd
                ? normalize_ms(st, cfg.mu_t, cfg.s_t, cfg.eps_sc)
                : normalize_fl(st, cfg.z, cfg.eps_sc);
        lp.weights.row(i) = nr.alpha * w.transpose();
        lp.bias(i) = nr.beta;
        lp.spike_cost(i) = nr.gamma / q0;
        out.normalization[static_cast<std::size_t>(i)] = nr;
        out.attempts[static_cast<std::size_t>(i)] = attempt + 1;
        return;
      } catch (const DegenerateError& e) {
        last_error = e.what();
      }
    }
    throw NeuronError(i, "no usable pair after " + std::to_string(cfg.max_retries + 1) +
                             " draws: " + last_error);
  });
  lp.validate();
  return out;
}

/// Largest pre-refractory voltage sum_j W_ij psi_ij + b_i of every neuron
/// over a sample set.
template <typename Input>
Eigen::VectorXd max_input_voltage(const LayerParams& lp, std::span<const Input> inputs,
                                  double dt) {
  Eigen::VectorXd mx =
      Eigen::VectorXd::Constant(lp.width(), -std::numeric_limits<double>::infinity());
  for (Index i = 0; i < lp.width(); ++i) {
    const KernelTaps taps = kernel_taps(lp.psp_kernel(i), dt);
    for (const auto& x : inputs)
      for (double v : weighted_psp(taps, x, lp.weights.row(i).transpose()))
        mx(i) = std::max(mx(i), v + lp.bias(i));
  }
  return mx;
}

}  // namespace sswim
