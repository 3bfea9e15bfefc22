#include "sswim/hidden_construction.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sswim;

namespace {

DiscreteSignal random_signal(Index channels, Index length, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  DiscreteSignal s(channels, length);
  for (Index c = 0; c < channels; ++c)
    for (Index t = 0; t < length; ++t) s.values(c, t) = nd(rng);
  return s;
}

oracle::Mat to_oracle(const Eigen::MatrixXd& a) {
  oracle::Mat m = oracle::zeros(static_cast<std::size_t>(a.rows()),
                                static_cast<std::size_t>(a.cols()));
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) m[i][j] = a(i, j);
  return m;
}

// Objective dt * sum_t <w, a(t)> <w, b(t)> computed by brute force.
double pair_objective(const std::vector<double>& w, const DiscreteSignal& a,
                      const DiscreteSignal& b) {
  double s = 0.0;
  for (Index t = 0; t < a.length(); ++t) {
    double x = 0.0, y = 0.0;
    for (Index c = 0; c < a.channels(); ++c) {
      x += w[c] * a.values(c, t);
      y += w[c] * b.values(c, t);
    }
    s += x * y * a.dt;
  }
  return s;
}

DiscreteSignal difference(const DiscreteSignal& a, const DiscreteSignal& b) {
  DiscreteSignal d = a;
  d.values -= b.values;
  return d;
}

std::vector<double> as_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(HiddenConstruction, TemporalAssignmentDelays) {
  const auto a = temporal_assignment(1, 2, 4, 100, 20, 5, 50, 10);
  EXPECT_DOUBLE_EQ(a.delay(0), 0.0);
  EXPECT_DOUBLE_EQ(a.delay(1), 6.25);
  EXPECT_DOUBLE_EQ(a.delay(2), 12.5);
  EXPECT_DOUBLE_EQ(a.delay(3), 18.75);
  // O < H branch: tau_max = H.
  const auto b = temporal_assignment(1, 1, 2, 12, 24, 5, 50, 10);
  EXPECT_DOUBLE_EQ(b.delay(1), 12.0);
}

TEST(HiddenConstruction, TemporalAssignmentSupports) {
  const auto a = temporal_assignment(1, 1, 4, 64, 24, 5, 50, 2);
  EXPECT_EQ(as_vec(a.support), (std::vector<double>{5, 50, 5, 50}));
  EXPECT_TRUE((a.refractory_support.array() == 5.0).all());
  const auto b = temporal_assignment(2, 3, 250, 64, 24, 5, 50, 10);
  for (Index i = 0; i < 250; ++i) {
    EXPECT_GE(b.delay(i), 0.0);
    EXPECT_LT(b.delay(i), 2.0 / 3.0 * 32.0);
    EXPECT_GE(b.support(i), 5.0);
    EXPECT_LE(b.support(i), 50.0);
  }
  EXPECT_THROW(temporal_assignment(1, 1, 4, 64, 24, 0, 50, 10), ArgumentError);
  EXPECT_THROW(temporal_assignment(1, 1, 4, 64, 24, 5, 50, 1), ArgumentError);
  EXPECT_THROW(temporal_assignment(3, 2, 4, 64, 24, 5, 50, 10), ArgumentError);
}

TEST(HiddenConstruction, DistSingleChannel) {
  std::mt19937_64 rng(1);
  DiscreteSignal a(3, 20), b(3, 20);
  for (Index t = 0; t < 20; ++t) a.values(0, t) = std::sin(0.3 * t) + 2.0;
  const auto w = weight_dist(a, b);
  EXPECT_NEAR(std::abs(w(0)), 1.0, 1e-12);
  EXPECT_NEAR(w.tail(2).norm(), 0.0, 1e-12);
}

TEST(HiddenConstruction, DistDiagonalMatrix) {
  DiscreteSignal a(2, 2), b(2, 2);
  a.values << std::sqrt(3.0), 0.0, 0.0, 1.0;
  EXPECT_TRUE(dist_matrix(a, b).isApprox((Eigen::Matrix2d() << 3, 0, 0, 1).finished()));
  const auto w = weight_dist(a, b);
  EXPECT_NEAR(w(0), 1.0, 1e-12);
  EXPECT_NEAR(w(1), 0.0, 1e-12);
  EXPECT_THROW(weight_dist(a, a), DegenerateError);
}

TEST(HiddenConstruction, DotTwoByTwo) {
  DiscreteSignal a(2, 10), b(2, 10);
  double rho = 0.0;
  for (Index t = 0; t < 10; ++t) {
    a.values(0, t) = 1.0 + 0.1 * t;
    b.values(1, t) = 2.0 - 0.05 * t;
    rho += a.values(0, t) * b.values(1, t);
  }
  const auto A = dot_matrix(a, b);
  EXPECT_NEAR(A(0, 1), rho / 2, 1e-12);
  EXPECT_NEAR(A(0, 0), 0.0, 1e-15);
  const auto w = weight_dot(a, b);
  EXPECT_NEAR(w(0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(w(1), -1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(w.dot(A * w), -rho / 2, 1e-10);
}

TEST(HiddenConstruction, DotZeroGivesFirstUnit) {
  std::mt19937_64 rng(2);
  const auto a = random_signal(3, 12, rng);
  DiscreteSignal z(3, 12);
  EXPECT_EQ(weight_dot(a, z), Eigen::VectorXd::Unit(3, 0));
}

TEST(HiddenConstruction, SignConvention) {
  Eigen::VectorXd w(3);
  w << 0.2, -0.9, 0.3;
  fix_sign(w);
  EXPECT_GT(w(1), 0.0);
}

TEST(HiddenConstruction, EigenOracle) {
  std::mt19937_64 rng(3);
  for (int inst = 0; inst < 20; ++inst) {
    const auto a = random_signal(3, 30, rng), b = random_signal(3, 30, rng);
    const auto d = difference(a, b);
    const auto wd = weight_dist(a, b), wt = weight_dot(a, b);
    const double best_dist = pair_objective(as_vec(wd), d, d);
    const double best_dot = pair_objective(as_vec(wt), a, b);

    // Independent eigensolve of the hand-assembled matrices.
    oracle::Mat ad = oracle::zeros(3, 3), at = oracle::zeros(3, 3);
    for (Index t = 0; t < 30; ++t)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          ad[i][j] += static_cast<long double>(d.values(i, t)) * d.values(j, t);
          at[i][j] += 0.5L * (static_cast<long double>(a.values(i, t)) * b.values(j, t) +
                              static_cast<long double>(b.values(i, t)) * a.values(j, t));
        }
    const auto [vd, ed] = oracle::jacobi_eigen(ad);
    const auto [vt, et] = oracle::jacobi_eigen(at);
    double dot_d = 0.0, dot_t = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      dot_d += static_cast<double>(ed[i][2]) * wd(i);
      dot_t += static_cast<double>(et[i][0]) * wt(i);
    }
    EXPECT_NEAR(std::abs(dot_d), 1.0, 1e-8);
    EXPECT_NEAR(std::abs(dot_t), 1.0, 1e-8);
    EXPECT_NEAR(best_dist, static_cast<double>(vd[2]), 1e-8 * std::abs(best_dist));
    EXPECT_NEAR(best_dot, static_cast<double>(vt[0]), 1e-8 * std::max(1.0, std::abs(best_dot)));

    for (int k = 0; k < 10000; ++k) {
      const auto u = oracle::random_unit(3, rng);
      EXPECT_GE(best_dist + 1e-9, pair_objective(u, d, d));
      EXPECT_LE(best_dot - 1e-9, pair_objective(u, a, b));
    }
  }
}

TEST(HiddenConstruction, DistSpectrumNonnegative) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 100; ++k) {
    const auto a = random_signal(4, 3, rng), b = random_signal(4, 3, rng);
    const auto [vals, vecs] = oracle::jacobi_eigen(to_oracle(dist_matrix(a, b)));
    EXPECT_GE(static_cast<double>(vals.front()), -1e-10);
  }
}

TEST(HiddenConstruction, WeightRandom) {
  Rng rng(5);
  for (int k = 0; k < 1000; ++k) EXPECT_NEAR(weight_random(7, rng).norm(), 1.0, 1e-12);
  Rng r1(6);
  EXPECT_EQ(std::abs(weight_random(1, r1)(0)), 1.0);
  Rng a(7), b(7);
  EXPECT_EQ(weight_random(5, a), weight_random(5, b));
}

TEST(HiddenConstruction, VoltageStatsExamples) {
  auto s = voltage_stats({std::vector<double>(10, 0.3)});
  EXPECT_DOUBLE_EQ(s.mean, 0.3);
  EXPECT_NEAR(s.stddev, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.max, 0.3);

  // Zero-mean traces with population std 1 and 3.
  s = voltage_stats({{1, -1, 1, -1}, {3, -3, 3, -3}});
  EXPECT_NEAR(s.mean, 0.0, 1e-15);
  EXPECT_NEAR(s.stddev, 2.0, 1e-15);
  EXPECT_EQ(s.max, 3.0);
  EXPECT_EQ(s.samples, 2);
  EXPECT_THROW(voltage_stats(std::vector<std::vector<double>>{}), ArgumentError);
}

TEST(HiddenConstruction, VoltageStatsShiftStability) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> traces(5, std::vector<double>(200)), shifted = traces;
  for (auto& t : traces)
    for (auto& v : t) v = nd(rng);
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t t = 0; t < 200; ++t) shifted[n][t] = traces[n][t] + 1e6;
  // Two-pass reference.
  long double ref_sd = 0.0L;
  for (const auto& t : traces) {
    long double m = 0.0L, v = 0.0L;
    for (double x : t) m += x;
    m /= t.size();
    for (double x : t) v += (x - m) * (x - m);
    ref_sd += std::sqrt(v / t.size());
  }
  ref_sd /= 5;
  const auto a = voltage_stats(traces), b = voltage_stats(shifted);
  EXPECT_NEAR(b.mean - a.mean, 1e6, 1e-6);
  EXPECT_NEAR(b.stddev, static_cast<double>(ref_sd), 1e-6 * static_cast<double>(ref_sd));
  EXPECT_NEAR(a.stddev, static_cast<double>(ref_sd), 1e-12);
}

TEST(HiddenConstruction, NormalizeMsExamples) {
  VoltageStats s{2.0, 4.0, 100.0, 1};
  auto r = normalize_ms(s, 0.5, 0.5, 1e-9);
  EXPECT_DOUBLE_EQ(r.alpha, 0.125);
  EXPECT_DOUBLE_EQ(r.beta, 0.25);
  EXPECT_DOUBLE_EQ(r.gamma, -1.5);
  EXPECT_EQ(r.silence_correction, 0.0);

  s = {0.0, 1.0, 10.0, 1};
  r = normalize_ms(s, 0.5, 0.5, 1e-9);
  EXPECT_DOUBLE_EQ(r.alpha, 0.5);
  EXPECT_DOUBLE_EQ(r.beta, 0.5);

  // Scaled max 0.5 * 0.8 + 0.5 = 0.9.
  s = {0.0, 1.0, 0.8, 1};
  r = normalize_ms(s, 0.5, 0.5, 0.0);
  EXPECT_NEAR(r.silence_correction, 0.1, 1e-15);
  EXPECT_NEAR(r.alpha * s.max + r.beta, 1.0, 1e-15);

  s.stddev = 0.0;
  EXPECT_THROW(normalize_ms(s, 0.5, 0.5, 1e-9), DegenerateError);
  EXPECT_THROW(normalize_ms({0.0, 1.0, 1.0, 1}, 1.0, 0.5, 1e-9), ArgumentError);
}

TEST(HiddenConstruction, NormalizeFlExamples) {
  auto r = normalize_fl({0.0, 0.5, 10.0, 1}, 2.0, 1e-9);
  EXPECT_DOUBLE_EQ(r.alpha, 1.0);
  EXPECT_DOUBLE_EQ(r.beta, 0.0);
  EXPECT_DOUBLE_EQ(r.gamma, -1.5);
  r = normalize_fl({0.4, 0.0, 0.4, 1}, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(r.beta, 0.6);
  EXPECT_EQ(r.silence_correction, 0.0);
  EXPECT_THROW(normalize_fl({0.0, 1.0, 1.0, 1}, 0.0, 1e-9), ArgumentError);
}

TEST(HiddenConstruction, NormalizationExactness) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 20; ++k) {
    const auto x = random_signal(3, 40, rng);
    std::vector<DiscreteSignal> xs{x, random_signal(3, 40, rng), random_signal(3, 40, rng)};
    const KernelTaps taps = kernel_taps(PlacedKernel(pspk_spec(KernelFamily::Hat), 2.0, 6.0), 1.0);
    Rng wr(k);
    const auto w = weight_random(3, wr);
    const auto st = voltage_stats<DiscreteSignal>(w, taps, xs);

    auto ms = normalize_ms(st, 0.5, 0.5, 1e-9);
    if (ms.silence_correction == 0.0) {
      VoltageStatsAccumulator acc;
      for (const auto& s : xs) {
        auto v = weighted_psp(taps, s, Eigen::VectorXd(ms.alpha * w));
        for (auto& e : v) e += ms.beta;
        acc.add_trace(v);
      }
      EXPECT_NEAR(acc.stats().mean, 0.5, 1e-9);
      EXPECT_NEAR(acc.stats().stddev, 0.5, 1e-9);
    }
    const auto fl = normalize_fl(st, 1.0, 1e-9);
    if (fl.silence_correction == 0.0) {
      VoltageStatsAccumulator acc;
      for (const auto& s : xs) {
        auto v = weighted_psp(taps, s, w);
        for (auto& e : v) e += fl.beta;
        acc.add_trace(v);
      }
      EXPECT_NEAR(acc.stats().mean, 1.0 - acc.stats().stddev, 1e-9);
    }
  }
}

TEST(HiddenConstruction, NamesRoundTrip) {
  for (auto c : {WeightCriterion::Dist, WeightCriterion::Dot, WeightCriterion::Random})
    EXPECT_EQ(parse_weight_criterion(weight_criterion_name(c)), c);
  for (auto n : {NormalizerKind::MeanStd, NormalizerKind::Fluctuation})
    EXPECT_EQ(parse_normalizer(normalizer_name(n)), n);
  EXPECT_THROW(parse_weight_criterion("max"), ArgumentError);
}

namespace {

struct SmallTask {
  TimeGrid grid{1.0, 32, 8};
  std::vector<DiscreteSignal> inputs;
  std::vector<DiscreteSignal> targets;
};

SmallTask small_task(std::uint64_t seed, Index samples) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  SmallTask t;
  for (Index n = 0; n < samples; ++n) {
    DiscreteSignal x(2, t.grid.length());
    DiscreteSignal y(2, t.grid.horizon);
    const double ph = nd(rng);
    for (Index s = 0; s < t.grid.length(); ++s) {
      const double a = std::sin(0.3 * (s + n) + ph), b = std::cos(0.17 * (s + 2 * n));
      if (s < t.grid.observation) {
        x.values(0, s) = a + 0.05 * nd(rng);
        x.values(1, s) = b + 0.05 * nd(rng);
      } else {
        y.values(0, s - t.grid.observation) = a;
        y.values(1, s - t.grid.observation) = b;
      }
    }
    t.inputs.push_back(x);
    t.targets.push_back(y);
  }
  return t;
}

}  // namespace

TEST(HiddenConstruction, BuildLayerSilenceCorrectionAndDeterminism) {
  const auto task = small_task(10, 40);
  HiddenLayerConfig cfg;
  cfg.width = 30;
  const LayerInputs in = std::span<const DiscreteSignal>(task.inputs);
  const auto views =
      metric_views(in, task.grid.observation, PlacedKernel(cfg.pspk, 0.0, cfg.sigma_min), 1.0);
  const auto P = pair_probabilities(views, task.targets, {EmbeddingKind::L2Identity},
                                    {EmbeddingKind::L2Identity}, 1e-6, 1e-6);
  for (auto weight : {WeightCriterion::Dot, WeightCriterion::Dist, WeightCriterion::Random})
    for (auto norm : {NormalizerKind::MeanStd, NormalizerKind::Fluctuation}) {
      cfg.weight = weight;
      cfg.normalizer = norm;
      const auto a = build_hidden_layer(1, 1, cfg, in, P, task.grid, 77, 1);
      const auto b = build_hidden_layer(1, 1, cfg, in, P, task.grid, 77, 3);
      EXPECT_EQ(a.layer.weights, b.layer.weights);
      EXPECT_EQ(a.layer.bias, b.layer.bias);
      EXPECT_EQ(a.layer.spike_cost, b.layer.spike_cost);

      const auto mx = max_input_voltage<DiscreteSignal>(a.layer, task.inputs, 1.0);
      EXPECT_GE(mx.minCoeff(), 1.0);
      for (Index i = 0; i < cfg.width; ++i) {
        bool fired = false;
        for (const auto& x : task.inputs)
          fired = fired || !simulate_hidden_layer(a.layer, x).spikes.train(i).empty();
        EXPECT_TRUE(fired) << i;
      }
      // Spike cost is gamma / q(0) with q(0) = 1 for the exponential.
      for (Index i = 0; i < cfg.width; ++i)
        EXPECT_DOUBLE_EQ(a.layer.spike_cost(i),
                         a.normalization[static_cast<std::size_t>(i)].gamma);
    }
}

TEST(HiddenConstruction, BuildSecondLayerFromSpikes) {
  const auto task = small_task(11, 30);
  HiddenLayerConfig cfg;
  cfg.width = 20;
  const LayerInputs in = std::span<const DiscreteSignal>(task.inputs);
  const auto P = pair_probabilities(
      metric_views(in, task.grid.observation, PlacedKernel(cfg.pspk, 0.0, 5.0), 1.0),
      task.targets, {EmbeddingKind::L2Identity}, {EmbeddingKind::L2Identity}, 1e-6, 1e-6);
  const auto l1 = build_hidden_layer(1, 2, cfg, in, P, task.grid, 3);
  std::vector<SpikeTrainSet> spikes;
  for (const auto& x : task.inputs) spikes.push_back(simulate_hidden_layer(l1.layer, x).spikes);
  const LayerInputs in2 = std::span<const SpikeTrainSet>(spikes);
  const auto views2 = metric_views(in2, task.grid.observation, PlacedKernel(cfg.pspk, 0.0, 5.0), 1.0);
  EXPECT_EQ(views2.front().length(), task.grid.length());
  const auto P2 = pair_probabilities(views2, task.targets, {EmbeddingKind::L2Identity},
                                     {EmbeddingKind::L2Identity}, 1e-6, 1e-6);
  const auto l2 = build_hidden_layer(2, 2, cfg, in2, P2, task.grid, 3);
  EXPECT_EQ(l2.layer.input_width(), 20);
  const auto mx = max_input_voltage<SpikeTrainSet>(l2.layer, spikes, 1.0);
  EXPECT_GE(mx.minCoeff(), 1.0);
  EXPECT_LT(l2.layer.delay.maxCoeff(), 2.0 / 2.0 * 16.0);
}

TEST(HiddenConstruction, ConstantInputsExhaustRetries) {
  TimeGrid grid{1.0, 10, 4};
  // Zero inputs give constant voltage traces for every weight.
  std::vector<DiscreteSignal> xs(4, DiscreteSignal(1, 14));
  HiddenLayerConfig cfg;
  cfg.width = 2;
  cfg.weight = WeightCriterion::Random;
  PairProbabilities P;
  P.probabilities.assign(6, 1.0 / 6.0);
  P.sample_count = 4;
  P.normalization = 1.0;
  const LayerInputs in = std::span<const DiscreteSignal>(xs);
  try {
    build_hidden_layer(1, 1, cfg, in, P, grid, 1);
    FAIL() << "expected NeuronError";
  } catch (const NeuronError& e) {
    EXPECT_NE(std::string(e.what()).find("9 draws"), std::string::npos);
  }
}
