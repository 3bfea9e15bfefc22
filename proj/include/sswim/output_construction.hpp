// Output-layer fitting: delays from spike/target cross-correlation, supports
// from a QR residual search, weights from batched ridge normal equations.
#pragma once

#include "sswim/core.hpp"
#include "sswim/kernels.hpp"
#include "sswim/srm_network.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace sswim {

enum class DelayAggregation { Median, Min };

inline std::string_view delay_aggregation_name(DelayAggregation a) {
  return a == DelayAggregation::Median ? "median" : "min";
}

inline DelayAggregation parse_delay_aggregation(std::string_view s) {
  if (s == "median") return DelayAggregation::Median;
  if (s == "min") return DelayAggregation::Min;
  throw ArgumentError("unknown delay aggregation '" + std::string(s) +
                      "' (expected median or min)");
}

struct DelayEstimate {
  Eigen::VectorXd delay;  // per output neuron
  double aggregate = 0.0;
  DelayAggregation aggregation = DelayAggregation::Median;
};

inline double aggregate_delays(const Eigen::VectorXd& d, DelayAggregation how) {
  if (d.size() == 0) throw ArgumentError("no delays to aggregate");
  std::vector<double> v(d.data(), d.data() + d.size());
  std::sort(v.begin(), v.end());
  if (how == DelayAggregation::Min) return v.front();
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Cross-correlation profile sum_n sum_j |sum_{t_f in T_j^n} y~_i^n(t_f + tau)|
/// for tau in [0, O), where y~ is the target centered on [T, T+H) and zero
/// elsewhere. Returns an O x D_out matrix.
inline Eigen::MatrixXd delay_profiles(std::span<const SpikeTrainSet> spikes,
                                      std::span<const DiscreteSignal> targets,
                                      const TimeGrid& grid) {
  if (spikes.size() != targets.size()) throw ShapeError("spike/target count mismatch");
  const Index O = grid.observation, H = grid.horizon, T = grid.observation;
  const Index D = targets.empty() ? 0 : targets.front().channels();
  Eigen::MatrixXd prof = Eigen::MatrixXd::Zero(O, D);
  std::vector<double> yc(static_cast<std::size_t>(H)), c(static_cast<std::size_t>(O));
  for (std::size_t n = 0; n < spikes.size(); ++n) {
    const auto& y = targets[n];
    if (y.length() != H || y.channels() != D) throw ShapeError("target shape mismatch");
    for (Index i = 0; i < D; ++i) {
      const double mu = y.values.row(i).mean();
      for (Index t = 0; t < H; ++t) yc[static_cast<std::size_t>(t)] = y.values(i, t) - mu;
      for (const auto& train : spikes[n].trains) {
        if (train.empty()) continue;
        std::fill(c.begin(), c.end(), 0.0);
        for (Index tf : train) {
          // t_f + tau must land in [T, T + H).
          const Index lo = std::max<Index>(0, T - tf);
          const Index hi = std::min<Index>(O, T + H - tf);
          for (Index tau = lo; tau < hi; ++tau)
            c[static_cast<std::size_t>(tau)] += yc[static_cast<std::size_t>(tf + tau - T)];
        }
        for (Index tau = 0; tau < O; ++tau) prof(tau, i) += std::abs(c[static_cast<std::size_t>(tau)]);
      }
    }
  }
  return prof;
}

/// Per-output delays at the correlation maximum (first maximum on ties),
/// shifted by the PSPK peak offset and clamped to [0, O).
inline DelayEstimate estimate_delays(std::span<const SpikeTrainSet> spikes,
                                     std::span<const DiscreteSignal> targets,
                                     KernelSpec pspk, const TimeGrid& grid,
                                     DelayAggregation aggregation = DelayAggregation::Median) {
  if (spikes.empty()) throw ArgumentError("no samples for delay estimation");
  std::size_t total = 0;
  for (const auto& s : spikes) total += s.total_spikes();
  if (total == 0) throw DegenerateError("silent network: no hidden spikes");
  const Eigen::MatrixXd prof = delay_profiles(spikes, targets, grid);
  const double peak = kernel_peak_offset(pspk);
  DelayEstimate est;
  est.aggregation = aggregation;
  est.delay.resize(prof.cols());
  for (Index i = 0; i < prof.cols(); ++i) {
    Index best = 0;
    for (Index tau = 1; tau < prof.rows(); ++tau)
      if (prof(tau, i) > prof(best, i)) best = tau;
    est.delay(i) = std::clamp(static_cast<double>(best) - peak, 0.0,
                              static_cast<double>(grid.observation - 1));
  }
  est.aggregate = aggregate_delays(est.delay, aggregation);
  return est;
}

/// P_alpha(a, b, N) = {((1 - (m-1)/N) a^(1/alpha) + ((m-1)/N) b^(1/alpha))^alpha}.
/// The last value stays below b, exactly as the formula gives.
inline std::vector<double> power_law_grid(double a, double b, double alpha, Index count) {
  if (!(a >= 0.0) || !(b > a)) throw ArgumentError("power-law grid needs 0 <= a < b");
  if (!(alpha >= 1.0)) throw ArgumentError("power-law exponent must be >= 1");
  if (count < 1) throw ArgumentError("power-law grid needs >= 1 value");
  const double ra = std::pow(a, 1.0 / alpha), rb = std::pow(b, 1.0 / alpha);
  std::vector<double> v(static_cast<std::size_t>(count));
  for (Index m = 0; m < count; ++m) {
    const double f = static_cast<double>(m) / static_cast<double>(count);
    v[static_cast<std::size_t>(m)] = std::pow((1.0 - f) * ra + f * rb, alpha);
  }
  return v;
}

struct SupportCandidates {
  std::vector<double> values;
  double alpha = 1.5;
  double min = 1.0;
  double max = 48.0;
  Index count = 30;
};

inline SupportCandidates support_candidates(double sigma_min, double sigma_max,
                                            double alpha, Index count) {
  if (!(sigma_min > 0.0)) throw ArgumentError("support candidates must be positive");
  SupportCandidates c;
  c.values = power_law_grid(sigma_min, sigma_max, alpha, count);
  c.alpha = alpha;
  c.min = sigma_min;
  c.max = sigma_max;
  c.count = count;
  return c;
}

/// Fills `block` (window rows x (1 + N) columns) with a ones column followed by
/// the PSP of every input train on `window`.
template <typename Block>
void design_block(const SpikeTrainSet& spikes, const KernelTaps& taps, StepRange window,
                  Block&& block) {
  block.setZero();
  block.col(0).setOnes();
  for (Index j = 0; j < spikes.neurons(); ++j) {
    auto col = block.col(j + 1);
    for (Index tf : spikes.train(j)) {
      const Index lo = std::max(window.begin, tf + taps.first);
      const Index hi = std::min(window.end, tf + taps.end());
      for (Index t = lo; t < hi; ++t)
        col(t - window.begin) += taps.values[static_cast<std::size_t>(t - tf - taps.first)];
    }
  }
}

/// Stacked design matrix over samples: (samples * H) x (1 + N_L).
inline Eigen::MatrixXd design_matrix(std::span<const SpikeTrainSet> spikes,
                                     const PlacedKernel& kernel, const TimeGrid& grid) {
  const Index H = grid.horizon;
  const Index N = spikes.empty() ? 0 : spikes.front().neurons();
  const KernelTaps taps = kernel_taps(kernel, grid.dt);
  Eigen::MatrixXd a(static_cast<Index>(spikes.size()) * H, N + 1);
  for (std::size_t n = 0; n < spikes.size(); ++n) {
    if (spikes[n].neurons() != N) throw ShapeError("ragged hidden layer widths");
    design_block(spikes[n], taps, grid.target_window(),
                 a.middleRows(static_cast<Index>(n) * H, H));
  }
  return a;
}

/// Stacked targets: (samples * H) x D_out, row n*H + t holds y^n(T + t).
inline Eigen::MatrixXd stacked_targets(std::span<const DiscreteSignal> targets) {
  if (targets.empty()) return {};
  const Index H = targets.front().length(), D = targets.front().channels();
  Eigen::MatrixXd y(static_cast<Index>(targets.size()) * H, D);
  for (std::size_t n = 0; n < targets.size(); ++n) {
    if (targets[n].length() != H || targets[n].channels() != D)
      throw ShapeError("target shape mismatch");
    y.middleRows(static_cast<Index>(n) * H, H) = targets[n].values.transpose();
  }
  return y;
}

/// ||y||^2 - ||Q^T y||^2 for every column of y, where Q spans the columns of
/// `a`. Consumes `a`. Zero columns are dropped and an unpivoted thin QR is
/// used; returns nothing when the remaining columns look rank deficient.
inline std::optional<Eigen::VectorXd> qr_residuals(Eigen::MatrixXd a,
                                                   const Eigen::MatrixXd& y) {
  if (a.rows() != y.rows()) throw ShapeError("design/target row mismatch");
  Index keep = 0;
  for (Index j = 0; j < a.cols(); ++j) {
    if (a.col(j).isZero(0.0)) continue;
    if (keep != j) a.col(keep) = a.col(j);
    ++keep;
  }
  const Eigen::VectorXd total = y.colwise().squaredNorm().transpose();
  if (keep == 0) return total;
  if (keep > a.rows()) return std::nullopt;
  auto cols = a.leftCols(keep);
  Eigen::HouseholderQR<Eigen::Ref<Eigen::MatrixXd>> qr(cols);
  const auto diag = qr.matrixQR().diagonal().cwiseAbs();
  if (!(diag.minCoeff() > 1e-10 * diag.maxCoeff())) return std::nullopt;
  const Eigen::MatrixXd qty = qr.householderQ().adjoint() * y;
  return (total - qty.topRows(keep).colwise().squaredNorm().transpose()).cwiseMax(0.0);
}

/// Rank-revealing variant used when the unpivoted factorization is unsafe.
inline Eigen::VectorXd pivoted_qr_residuals(const Eigen::MatrixXd& a,
                                            const Eigen::MatrixXd& y) {
  if (a.rows() != y.rows()) throw ShapeError("design/target row mismatch");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  const Index r = qr.rank();
  const Eigen::VectorXd total = y.colwise().squaredNorm().transpose();
  if (r == 0) return total;
  const Eigen::MatrixXd qty = qr.householderQ().adjoint() * y;
  return (total - qty.topRows(r).colwise().squaredNorm().transpose()).cwiseMax(0.0);
}

/// Least-squares residual norms ||y - A p*||^2 of every target channel.
inline Eigen::VectorXd least_squares_residuals(const Eigen::MatrixXd& a,
                                               const Eigen::MatrixXd& y) {
  if (auto r = qr_residuals(a, y)) return *r;
  return pivoted_qr_residuals(a, y);
}

/// Residual of every output channel for the shared design A(tau_bar, sigma_c).
inline Eigen::VectorXd residual_for_candidate(std::span<const SpikeTrainSet> spikes,
                                              std::span<const DiscreteSignal> targets,
                                              double delay, double support,
                                              KernelSpec pspk, const TimeGrid& grid) {
  if (spikes.size() != targets.size()) throw ShapeError("spike/target count mismatch");
  if (grid.horizon < 1) throw ArgumentError("empty target window");
  return least_squares_residuals(
      design_matrix(spikes, PlacedKernel(pspk, delay, support), grid),
      stacked_targets(targets));
}

struct SupportSelection {
  Eigen::VectorXd support;    // per output neuron
  Eigen::MatrixXd residuals;  // candidates x D_out
};

/// Per-output argmin of the candidate residuals. Residuals within a relative
/// 1e-12 of the minimum count as ties and resolve to the smallest support.
inline SupportSelection select_supports(std::span<const SpikeTrainSet> spikes,
                                        std::span<const DiscreteSignal> targets,
                                        double delay, const std::vector<double>& candidates,
                                        KernelSpec pspk, const TimeGrid& grid,
                                        int threads = 1) {
  if (candidates.empty()) throw ArgumentError("no support candidates");
  if (targets.empty()) throw ArgumentError("no samples for support selection");
  const Index D = targets.front().channels();
  const Index C = static_cast<Index>(candidates.size());
  SupportSelection sel;
  sel.residuals.resize(C, D);
  const Eigen::MatrixXd y = stacked_targets(targets);
  parallel_for(C, threads, [&](Index c) {
    const PlacedKernel k(pspk, delay, candidates[static_cast<std::size_t>(c)]);
    auto r = qr_residuals(design_matrix(spikes, k, grid), y);
    if (!r) r = pivoted_qr_residuals(design_matrix(spikes, k, grid), y);
    sel.residuals.row(c) = r->transpose();
  });
  std::vector<Index> order(static_cast<std::size_t>(C));
  for (Index c = 0; c < C; ++c) order[static_cast<std::size_t>(c)] = c;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return candidates[static_cast<std::size_t>(a)] < candidates[static_cast<std::size_t>(b)];
  });
  sel.support.resize(D);
  for (Index i = 0; i < D; ++i) {
    const double best = sel.residuals.col(i).minCoeff();
    const double tol = 1e-12 * std::max(y.col(i).squaredNorm(), 1e-300);
    for (Index c : order)
      if (sel.residuals(c, i) <= best + tol) {
        sel.support(i) = candidates[static_cast<std::size_t>(c)];
        break;
      }
  }
  return sel;
}

/// Normal-equation accumulator of one output neuron: F = sum_n D_n^T D_n,
/// rhs = sum_n D_n^T y_n, ||y||^2, and the number of samples.
struct GramAccumulator {
  Eigen::MatrixXd gram;
  Eigen::VectorXd rhs;
  double target_sq = 0.0;
  Index samples = 0;

  GramAccumulator() = default;
  explicit GramAccumulator(Index n)
      : gram(Eigen::MatrixXd::Zero(n, n)), rhs(Eigen::VectorXd::Zero(n)) {}

  Index size() const noexcept { return rhs.size(); }

  /// Adds a block of stacked design rows and matching targets covering
  /// `count` samples.
  void add_rows(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, Index count) {
    if (design.cols() != size() || design.rows() != y.size())
      throw ShapeError("design block does not match the accumulator");
    gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
    rhs.noalias() += design.transpose() * y;
    target_sq += y.squaredNorm();
    samples += count;
  }

  void merge(const GramAccumulator& other) {
    if (other.size() != size()) throw ShapeError("accumulator size mismatch");
    gram += other.gram;
    rhs += other.rhs;
    target_sq += other.target_sq;
    samples += other.samples;
  }

  /// Full symmetric Gram (the accumulator fills the lower triangle).
  Eigen::MatrixXd symmetric_gram() const {
    Eigen::MatrixXd g = gram.selfadjointView<Eigen::Lower>();
    return g;
  }
};

/// Streams samples in batches and accumulates the normal equations of every
/// output neuron under its own (delay, support). Neurons sharing the same
/// placement share one Gram; only the batch's design rows are materialized.
/// Batches are merged in a fixed order, so the result does not depend on the
/// thread count.
inline std::vector<GramAccumulator> accumulate_normal_equations(
    std::span<const SpikeTrainSet> spikes, std::span<const DiscreteSignal> targets,
    const Eigen::VectorXd& delay, const Eigen::VectorXd& support, KernelSpec pspk,
    const TimeGrid& grid, Index batch_size = 64, int threads = 1) {
  if (spikes.empty()) throw ArgumentError("empty dataset for normal equations");
  if (spikes.size() != targets.size()) throw ShapeError("spike/target count mismatch");
  if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
  const Index D = delay.size();
  if (support.size() != D || targets.front().channels() != D)
    throw ShapeError("output parameter vectors do not match target channels");
  const Index N = spikes.front().neurons();
  const Index H = grid.horizon;
  const Index M = static_cast<Index>(spikes.size());

  // Group output neurons by identical placement.
  std::map<std::pair<double, double>, std::vector<Index>> groups;
  for (Index i = 0; i < D; ++i) groups[{delay(i), support(i)}].push_back(i);

  std::vector<GramAccumulator> result(static_cast<std::size_t>(D));
  const Index batches = (M + batch_size - 1) / batch_size;
  for (const auto& [placement, members] : groups) {
    const KernelTaps taps =
        kernel_taps(PlacedKernel(pspk, placement.first, placement.second), grid.dt);
    const Index G = static_cast<Index>(members.size());
    // Per batch: one shared Gram plus one rhs / target norm per member.
    std::vector<Eigen::MatrixXd> grams(static_cast<std::size_t>(batches));
    std::vector<Eigen::MatrixXd> rhs(static_cast<std::size_t>(batches));
    std::vector<Eigen::VectorXd> ysq(static_cast<std::size_t>(batches));
    parallel_for(batches, threads, [&](Index b) {
      const Index lo = b * batch_size, hi = std::min(M, lo + batch_size);
      Eigen::MatrixXd design((hi - lo) * H, N + 1);
      Eigen::MatrixXd y((hi - lo) * H, G);
      for (Index n = lo; n < hi; ++n) {
        const auto& s = spikes[static_cast<std::size_t>(n)];
        const auto& t = targets[static_cast<std::size_t>(n)];
        if (s.neurons() != N) throw ShapeError("ragged hidden layer widths");
        if (t.length() != H || t.channels() != D) throw ShapeError("target shape mismatch");
        design_block(s, taps, grid.target_window(), design.middleRows((n - lo) * H, H));
        for (Index g = 0; g < G; ++g)
          y.col(g).segment((n - lo) * H, H) = t.values.row(members[static_cast<std::size_t>(g)]).transpose();
      }
      Eigen::MatrixXd gb = Eigen::MatrixXd::Zero(N + 1, N + 1);
      gb.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
      grams[static_cast<std::size_t>(b)] = std::move(gb);
      rhs[static_cast<std::size_t>(b)] = design.transpose() * y;
      ysq[static_cast<std::size_t>(b)] = y.colwise().squaredNorm().transpose();
    });
    GramAccumulator shared(N + 1);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(N + 1, G);
    Eigen::VectorXd yy = Eigen::VectorXd::Zero(G);
    for (Index b = 0; b < batches; ++b) {
      shared.gram += grams[static_cast<std::size_t>(b)];
      r += rhs[static_cast<std::size_t>(b)];
      yy += ysq[static_cast<std::size_t>(b)];
    }
    for (Index g = 0; g < G; ++g) {
      GramAccumulator acc;
      acc.gram = shared.gram;
      acc.rhs = r.col(g);
      acc.target_sq = yy(g);
      acc.samples = M;
      result[static_cast<std::size_t>(members[static_cast<std::size_t>(g)])] = std::move(acc);
    }
  }
  return result;
}

/// 32 logarithmically spaced values in [1e-5, 0.5] by default.
inline std::vector<double> lambda_grid(Index count = 32, double lo = 1e-5, double hi = 0.5) {
  if (count < 1) throw ArgumentError("lambda grid needs >= 1 value");
  if (!(lo > 0.0) || !(hi >= lo)) throw ArgumentError("lambda grid needs 0 < lo <= hi");
  std::vector<double> v(static_cast<std::size_t>(count));
  if (count == 1) {
    v[0] = lo;
    return v;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (Index k = 0; k < count; ++k)
    v[static_cast<std::size_t>(k)] =
        std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1));
  v.back() = hi;
  v.front() = lo;
  return v;
}

/// Quadratic loss p^T F p - 2 p^T rhs + ||y||^2 = sum ||D p - y||^2.
inline double quadratic_loss(const GramAccumulator& acc, const Eigen::VectorXd& p) {
  const Eigen::MatrixXd g = acc.symmetric_gram();
  return p.dot(g * p) - 2.0 * p.dot(acc.rhs) + acc.target_sq;
}

/// Direct solve of (F + M lambda I) p = rhs.
inline Eigen::VectorXd ridge_solve(const GramAccumulator& acc, double lambda) {
  const Eigen::MatrixXd g = acc.symmetric_gram();
  const Eigen::MatrixXd a =
      g + static_cast<double>(acc.samples) * lambda *
              Eigen::MatrixXd::Identity(acc.size(), acc.size());
  return a.ldlt().solve(acc.rhs);
}

struct RidgeSolution {
  Eigen::VectorXd parameters;  // (bias, weights)
  double lambda = 0.0;
  double validation_loss = 0.0;
  std::vector<double> losses;  // per grid value
};

/// Spectral ridge solutions for every lambda of `grid` from one
/// eigendecomposition of the training Gram. Each solution is scored on the
/// validation accumulator (on the training one when no validation samples
/// exist); ties resolve to the larger lambda.
inline RidgeSolution solve_with_lambda_search(const GramAccumulator& train,
                                              const GramAccumulator& valid,
                                              const std::vector<double>& grid) {
  if (grid.empty()) throw ArgumentError("empty lambda grid");
  if (train.samples < 1) throw ArgumentError("no training samples");
  for (double l : grid)
    if (!(l > 0.0)) throw ArgumentError("lambda values must be > 0");
  const GramAccumulator& score = valid.samples > 0 ? valid : train;
  if (score.size() != train.size()) throw ShapeError("accumulator size mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(train.symmetric_gram());
  if (es.info() != Eigen::Success)
    throw DegenerateError("eigendecomposition of the normal equations did not converge");
  const Eigen::VectorXd proj = es.eigenvectors().transpose() * train.rhs;
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd sg = score.symmetric_gram();
  const double M = static_cast<double>(train.samples);
  RidgeSolution best;
  best.validation_loss = std::numeric_limits<double>::infinity();
  for (double l : grid) {
    const Eigen::VectorXd p =
        es.eigenvectors() * (proj.array() / (ev.array() + M * l)).matrix();
    const double loss = p.dot(sg * p) - 2.0 * p.dot(score.rhs) + score.target_sq;
    best.losses.push_back(loss);
    const bool better = loss < best.validation_loss ||
                        (loss == best.validation_loss && l > best.lambda);
    if (better) {
      best.validation_loss = loss;
      best.lambda = l;
      best.parameters = p;
    }
  }
  if (!best.parameters.allFinite())
    throw DegenerateError("non-finite ridge solution");
  return best;
}

/// Upper bound 1 + H_D/lambda + ||Dk||^2/(M lambda) * sum_n sum_j |T_j^n|^2 on
/// the condition number of F + M lambda I.
inline double condition_bound_diagnostic(Index samples, double lambda,
                                         double spike_count_sq_sum, Index window,
                                         double kernel_norm_sq) {
  if (!(lambda > 0.0)) throw ArgumentError("lambda must be > 0");
  if (samples < 1) throw ArgumentError("condition bound needs >= 1 sample");
  const double ml = static_cast<double>(samples) * lambda;
  return 1.0 + static_cast<double>(window) / lambda +
         kernel_norm_sq / ml * spike_count_sq_sum;
}

/// sum_n sum_j |T_j^n|^2 over a sample set.
inline double spike_count_sq_sum(std::span<const SpikeTrainSet> spikes) {
  double s = 0.0;
  for (const auto& set : spikes)
    for (const auto& t : set.trains) s += static_cast<double>(t.size() * t.size());
  return s;
}

}  // namespace sswim
