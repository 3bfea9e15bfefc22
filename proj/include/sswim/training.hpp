// End-to-end training driver: initialization batch, hidden layers, output
// delays, supports and ridge weights, plus evaluation and ablation sweeps.
#pragma once

#include "sswim/core.hpp"
#include "sswim/harness.hpp"
#include "sswim/hidden_construction.hpp"
#include "sswim/output_construction.hpp"
#include "sswim/sampling.hpp"
#include "sswim/srm_network.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace sswim {

struct Architecture {
  std::vector<Index> hidden = {250};
  KernelFamily pspk = KernelFamily::Hat;
  KernelFamily rfk = KernelFamily::RectExpDecay;
  std::optional<KernelFamily> output_pspk;  // defaults to pspk
};

struct SswimConfig {
  Index init_batch = 1000;
  // Hidden layers.
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
  // Sampling distribution. Without a fixed pair, metrics are chosen per
  // layer by minimal entropy over the candidate lists (empty = defaults).
  std::optional<std::pair<EmbeddingSpec, EmbeddingSpec>> fixed_metrics;
  std::vector<EmbeddingSpec> input_candidates;
  std::vector<EmbeddingSpec> output_candidates;
  double epsilon = 1e-6;
  double min_norm = 1e-6;
  std::optional<double> entropy_floor;
  // Output layer.
  DelayAggregation delay_aggregation = DelayAggregation::Median;
  double support_min = 1.0;
  std::optional<double> support_max;  // defaults to 2H
  double support_alpha = 1.5;
  Index support_count = 30;
  Index lambda_count = 32;
  double lambda_min = 1e-5;
  double lambda_max = 0.5;
  Index batch_size = 64;
};

struct LayerMetrics {
  EmbeddingSpec input;
  EmbeddingSpec output;
  double entropy = 0.0;
};

struct PhaseTimes {
  double hidden = 0.0;
  double delays = 0.0;
  double supports = 0.0;
  double weights = 0.0;
  double total = 0.0;
};

struct RunReport {
  std::uint64_t seed = 0;
  double rse_train = 0.0;
  double rse_valid = std::numeric_limits<double>::quiet_NaN();
  double rse_test = std::numeric_limits<double>::quiet_NaN();
  PhaseTimes seconds;
  Index init_batch = 0;
  std::vector<LayerMetrics> metrics;        // per hidden layer
  std::vector<Eigen::VectorXi> spike_counts;  // per hidden layer, over X_I
  std::vector<int> silence_corrected;       // per hidden layer
  Eigen::VectorXd output_delay;
  Eigen::VectorXd output_support;
  double delay_aggregate = 0.0;
  std::vector<double> lambda;
  std::vector<double> condition_bound;
  std::vector<std::string> warnings;

  /// One `key=value` line per quantity.
  std::string to_text(bool include_timing = true) const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "seed=" << seed << "\n";
    os << "rse_train=" << rse_train << "\n";
    os << "rse_valid=" << rse_valid << "\n";
    os << "rse_test=" << rse_test << "\n";
    os << "init_batch=" << init_batch << "\n";
    for (std::size_t l = 0; l < metrics.size(); ++l) {
      os << "layer" << l + 1 << "_metric_in=" << metrics[l].input.name() << "\n";
      os << "layer" << l + 1 << "_metric_out=" << metrics[l].output.name() << "\n";
      os << "layer" << l + 1 << "_entropy=" << metrics[l].entropy << "\n";
    }
    for (std::size_t l = 0; l < spike_counts.size(); ++l) {
      const auto& c = spike_counts[l];
      os << "layer" << l + 1 << "_spikes_total=" << c.sum() << "\n";
      os << "layer" << l + 1 << "_spikes_min=" << (c.size() ? c.minCoeff() : 0) << "\n";
      os << "layer" << l + 1 << "_spikes_max=" << (c.size() ? c.maxCoeff() : 0) << "\n";
      os << "layer" << l + 1 << "_silence_corrected=" << silence_corrected[l] << "\n";
      os << "layer" << l + 1 << "_spike_counts=";
      for (Index i = 0; i < c.size(); ++i) os << (i ? ";" : "") << c(i);
      os << "\n";
    }
    os << "delay_aggregate=" << delay_aggregate << "\n";
    for (Index i = 0; i < output_delay.size(); ++i) {
      os << "output" << i << "_delay=" << output_delay(i) << "\n";
      os << "output" << i << "_support=" << output_support(i) << "\n";
      os << "output" << i << "_lambda=" << lambda[static_cast<std::size_t>(i)] << "\n";
      os << "output" << i << "_condition_bound="
         << condition_bound[static_cast<std::size_t>(i)] << "\n";
    }
    if (include_timing) {
      os << "seconds_hidden=" << seconds.hidden << "\n";
      os << "seconds_delays=" << seconds.delays << "\n";
      os << "seconds_supports=" << seconds.supports << "\n";
      os << "seconds_weights=" << seconds.weights << "\n";
      os << "seconds_total=" << seconds.total << "\n";
    }
    for (const auto& w : warnings) os << "warning=" << w << "\n";
    return os.str();
  }
};

/// Error raised inside a named pipeline phase.
class PhaseError : public Error {
 public:
  PhaseError(std::string phase, const std::string& what)
      : Error(phase + ": " + what), phase_(std::move(phase)) {}
  const std::string& phase() const noexcept { return phase_; }

 private:
  std::string phase_;
};

namespace detail {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

template <typename F>
auto in_phase(const char* phase, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PhaseError&) {
    throw;
  } catch (const std::exception& e) {
    throw PhaseError(phase, e.what());
  }
}

// Uniform draw of k distinct entries, returned in ascending order.
inline std::vector<Index> draw_subset(const std::vector<Index>& pool, Index k, Rng& rng) {
  std::vector<Index> idx(pool.size());
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> u(i, static_cast<Index>(idx.size()) - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(u(rng))]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  std::vector<Index> out;
  out.reserve(idx.size());
  for (Index i : idx) out.push_back(pool[static_cast<std::size_t>(i)]);
  return out;
}

inline std::vector<EmbeddingSpec> candidates_or_default(const std::vector<EmbeddingSpec>& c,
                                                        Index window_length) {
  return c.empty() ? default_embedding_candidates(window_length) : c;
}

}  // namespace detail

/// Padded model inputs of a list of windows.
inline std::vector<DiscreteSignal> window_inputs(const ForecastDataset& ds,
                                                 const std::vector<Index>& starts,
                                                 Index grid_length) {
  std::vector<DiscreteSignal> out;
  out.reserve(starts.size());
  for (Index s : starts) out.push_back(pad_to_grid(ds.input(s), grid_length));
  return out;
}

inline std::vector<DiscreteSignal> window_targets(const ForecastDataset& ds,
                                                  const std::vector<Index>& starts) {
  std::vector<DiscreteSignal> out;
  out.reserve(starts.size());
  for (Index s : starts) out.push_back(ds.target(s));
  return out;
}

/// Spike trains of the last hidden layer for every window.
inline std::vector<SpikeTrainSet> last_hidden_spikes(const SnnModel& model,
                                                     const ForecastDataset& ds,
                                                     const std::vector<Index>& starts,
                                                     int threads = 1) {
  std::vector<SpikeTrainSet> out(starts.size());
  parallel_for(static_cast<Index>(starts.size()), threads, [&](Index k) {
    out[static_cast<std::size_t>(k)] =
        hidden_forward(model, ds.input(starts[static_cast<std::size_t>(k)])).back();
  });
  return out;
}

struct Evaluation {
  double rse = 0.0;
  std::vector<DiscreteSignal> predictions;
  std::vector<DiscreteSignal> targets;
};

inline Evaluation evaluate(const SnnModel& model, const ForecastDataset& ds, Split split,
                           int threads = 1) {
  if (model.input_dim != ds.variables() || model.output_dim != ds.variables())
    throw ShapeError("model expects " + std::to_string(model.input_dim) +
                     " variables, dataset has " + std::to_string(ds.variables()));
  if (model.grid.observation != ds.observation || model.grid.horizon != ds.horizon)
    throw ShapeError("model grid (O=" + std::to_string(model.grid.observation) +
                     ", H=" + std::to_string(model.grid.horizon) +
                     ") does not match the dataset windows");
  const auto& starts = ds.split(split);
  if (starts.empty())
    throw ArgumentError("split '" + std::string(split_name(split)) + "' has no windows");
  Evaluation ev;
  ev.predictions.resize(starts.size());
  parallel_for(static_cast<Index>(starts.size()), threads, [&](Index k) {
    ev.predictions[static_cast<std::size_t>(k)] =
        forward(model, ds.input(starts[static_cast<std::size_t>(k)])).prediction;
  });
  ev.targets = window_targets(ds, starts);
  ev.rse = rse(ev.predictions, ev.targets);
  return ev;
}

struct TrainResult {
  SnnModel model;
  RunReport report;
};

/// Trains a model on the train split, validating lambda on the valid split.
/// Deterministic given (dataset, architecture, config, seed); thread count
/// does not affect the result.
inline TrainResult train_sswim(const ForecastDataset& ds, const Architecture& arch,
                               const SswimConfig& cfg, std::uint64_t seed,
                               int threads = 1, bool evaluate_splits = true) {
  detail::Stopwatch clock, total_clock;
  TrainResult res;
  RunReport& rep = res.report;
  rep.seed = seed;
  if (arch.hidden.empty()) throw ArgumentError("architecture needs >= 1 hidden layer");
  if (ds.train.size() < 2) throw ArgumentError("need >= 2 training windows");

  SnnModel& model = res.model;
  model.input_dim = ds.variables();
  model.output_dim = ds.variables();
  model.grid = TimeGrid{1.0, ds.observation, ds.horizon};
  const TimeGrid grid = model.grid;
  const Index L = static_cast<Index>(arch.hidden.size());
  const KernelSpec pspk = pspk_spec(arch.pspk);
  const KernelSpec out_pspk = pspk_spec(arch.output_pspk.value_or(arch.pspk));

  // Initialization batch X_I.
  Index m = cfg.init_batch;
  if (m > static_cast<Index>(ds.train.size())) {
    rep.warnings.push_back("init batch capped at train size " +
                           std::to_string(ds.train.size()));
    m = static_cast<Index>(ds.train.size());
  }
  if (m < 2) throw ArgumentError("init batch must be >= 2");
  rep.init_batch = m;
  Rng draw_rng(derive_seed(seed, {0x1u}));
  const std::vector<Index> init = detail::draw_subset(ds.train, m, draw_rng);
  const auto init_inputs = window_inputs(ds, init, grid.length());
  const auto init_targets = window_targets(ds, init);

  // Hidden layers.
  std::vector<SpikeTrainSet> init_spikes;
  detail::in_phase("hidden", [&] {
    for (Index l = 1; l <= L; ++l) {
      HiddenLayerConfig hc;
      hc.width = arch.hidden[static_cast<std::size_t>(l - 1)];
      hc.pspk = pspk;
      hc.rfk = rfk_spec(arch.rfk);
      hc.sigma_min = cfg.sigma_min;
      hc.sigma_max = cfg.sigma_max;
      hc.sigma_count = cfg.sigma_count;
      hc.weight = cfg.weight;
      hc.normalizer = cfg.normalizer;
      hc.mu_t = cfg.mu_t;
      hc.s_t = cfg.s_t;
      hc.z = cfg.z;
      hc.eps_sc = cfg.eps_sc;
      hc.max_retries = cfg.max_retries;

      const LayerInputs inputs =
          l == 1 ? LayerInputs(std::span<const DiscreteSignal>(init_inputs))
                 : LayerInputs(std::span<const SpikeTrainSet>(init_spikes));
      const auto views = metric_views(inputs, grid.observation,
                                      PlacedKernel(pspk, 0.0, cfg.sigma_min), grid.dt);
      LayerMetrics lm;
      if (cfg.fixed_metrics) {
        lm.input = cfg.fixed_metrics->first;
        lm.output = cfg.fixed_metrics->second;
      } else {
        const auto sel = select_metrics(
            views, init_targets,
            detail::candidates_or_default(cfg.input_candidates, views.front().length()),
            detail::candidates_or_default(cfg.output_candidates, grid.horizon),
            cfg.epsilon, cfg.min_norm, cfg.entropy_floor, threads);
        lm.input = sel.input;
        lm.output = sel.output;
      }
      const PairProbabilities P = pair_probabilities(
          views, init_targets, lm.input, lm.output, cfg.epsilon, cfg.min_norm, threads);
      lm.entropy = shannon_entropy(P);
      rep.metrics.push_back(lm);

      HiddenLayerBuild built = build_hidden_layer(l, L, hc, inputs, P, grid, seed, threads);
      int corrected = 0;
      for (const auto& nr : built.normalization) corrected += nr.silence_correction > 0.0;
      rep.silence_corrected.push_back(corrected);
      model.layers.push_back(std::move(built.layer));

      std::vector<SpikeTrainSet> next(static_cast<std::size_t>(m));
      parallel_for(m, threads, [&](Index n) {
        const auto& layer = model.layers.back();
        next[static_cast<std::size_t>(n)] =
            l == 1 ? simulate_hidden_layer(layer, init_inputs[static_cast<std::size_t>(n)], false).spikes
                   : simulate_hidden_layer(layer, init_spikes[static_cast<std::size_t>(n)], grid.dt, false)
                         .spikes;
      });
      init_spikes = std::move(next);
      Eigen::VectorXi counts = Eigen::VectorXi::Zero(hc.width);
      for (const auto& s : init_spikes)
        for (Index i = 0; i < hc.width; ++i) counts(i) += static_cast<int>(s.train(i).size());
      rep.spike_counts.push_back(counts);
    }
  });
  rep.seconds.hidden = clock.lap();

  // Output delays.
  const Index D = model.output_dim;
  LayerParams out;
  out.pspk = out_pspk;
  const DelayEstimate delays = detail::in_phase("delays", [&] {
    return estimate_delays(init_spikes, init_targets, out_pspk, grid, cfg.delay_aggregation);
  });
  out.delay = delays.delay;
  rep.delay_aggregate = delays.aggregate;
  rep.seconds.delays = clock.lap();

  // Output supports.
  detail::in_phase("supports", [&] {
    const double smax = cfg.support_max.value_or(2.0 * static_cast<double>(grid.horizon));
    const auto cand = support_candidates(cfg.support_min, smax, cfg.support_alpha,
                                         cfg.support_count);
    out.support = select_supports(init_spikes, init_targets, delays.aggregate, cand.values,
                                  out_pspk, grid, threads)
                      .support;
  });
  rep.seconds.supports = clock.lap();

  // Output weights.
  detail::in_phase("weights", [&] {
    // Hidden part of the model is final; simulate the train and valid splits.
    SnnModel hidden_only = model;
    LayerParams stub = out;
    stub.weights = Eigen::MatrixXd::Zero(D, arch.hidden.back());
    stub.bias = Eigen::VectorXd::Zero(D);
    hidden_only.layers.push_back(stub);
    const auto train_spikes = last_hidden_spikes(hidden_only, ds, ds.train, threads);
    const auto train_targets = window_targets(ds, ds.train);
    const auto train_acc = accumulate_normal_equations(
        train_spikes, train_targets, out.delay, out.support, out_pspk, grid,
        cfg.batch_size, threads);
    std::vector<GramAccumulator> valid_acc(static_cast<std::size_t>(D));
    if (!ds.valid.empty()) {
      const auto valid_spikes = last_hidden_spikes(hidden_only, ds, ds.valid, threads);
      valid_acc = accumulate_normal_equations(valid_spikes, window_targets(ds, ds.valid),
                                              out.delay, out.support, out_pspk, grid,
                                              cfg.batch_size, threads);
    } else {
      rep.warnings.push_back("no validation windows; lambda scored on the train split");
    }
    const auto lambdas = lambda_grid(cfg.lambda_count, cfg.lambda_min, cfg.lambda_max);
    const Index N = arch.hidden.back();
    out.weights.resize(D, N);
    out.bias.resize(D);
    std::vector<RidgeSolution> sols(static_cast<std::size_t>(D));
    parallel_for(D, threads, [&](Index i) {
      try {
        sols[static_cast<std::size_t>(i)] = solve_with_lambda_search(
            train_acc[static_cast<std::size_t>(i)], valid_acc[static_cast<std::size_t>(i)],
            lambdas);
      } catch (const Error& e) {
        throw NeuronError(i, e.what());
      }
    });
    const double sq = spike_count_sq_sum(train_spikes);
    TrainingInfo info;
    info.seed = seed;
    for (Index i = 0; i < D; ++i) {
      const auto& s = sols[static_cast<std::size_t>(i)];
      out.bias(i) = s.parameters(0);
      out.weights.row(i) = s.parameters.tail(N).transpose();
      const double knorm =
          kernel_taps(out.psp_kernel(i), grid.dt).squared_norm();
      info.lambda.push_back(s.lambda);
      info.condition_bound.push_back(condition_bound_diagnostic(
          static_cast<Index>(train_spikes.size()), s.lambda, sq, grid.horizon, knorm));
    }
    rep.lambda = info.lambda;
    rep.condition_bound = info.condition_bound;
    model.layers.push_back(std::move(out));
    model.training = std::move(info);
    model.validate();
  });
  rep.seconds.weights = clock.lap();
  rep.output_delay = model.output_layer().delay;
  rep.output_support = model.output_layer().support;

  if (evaluate_splits) {
    rep.rse_train = evaluate(model, ds, Split::Train, threads).rse;
    if (!ds.valid.empty()) rep.rse_valid = evaluate(model, ds, Split::Valid, threads).rse;
    if (!ds.test.empty()) rep.rse_test = evaluate(model, ds, Split::Test, threads).rse;
  }
  rep.seconds.total = total_clock.lap();
  return res;
}

/// CSV of per-window predictions: split,window_start,variable,step,target,prediction.
inline std::string predictions_csv(const ForecastDataset& ds, Split split,
                                   const Evaluation& ev) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "split,window_start,variable,step,target,prediction\n";
  const auto& starts = ds.split(split);
  for (std::size_t k = 0; k < starts.size(); ++k)
    for (Index v = 0; v < ev.targets[k].channels(); ++v)
      for (Index t = 0; t < ev.targets[k].length(); ++t)
        os << split_name(split) << "," << starts[k] << "," << v << "," << t << ","
           << ev.targets[k].values(v, t) << "," << ev.predictions[k].values(v, t) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Ablation sweeps.

struct AblationCell {
  WeightCriterion weight = WeightCriterion::Dot;
  NormalizerKind normalizer = NormalizerKind::MeanStd;
  Index width = 250;
  std::uint64_t seed = 1;

  std::string key() const {
    return std::string(weight_criterion_name(weight)) + "," +
           std::string(normalizer_name(normalizer)) + "," + std::to_string(width) + "," +
           std::to_string(seed);
  }
};

struct AblationRow {
  AblationCell cell;
  bool ok = false;
  double rse_valid = std::numeric_limits<double>::quiet_NaN();
  double rse_test = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct AblationGrid {
  std::vector<WeightCriterion> weights = {WeightCriterion::Dot, WeightCriterion::Random};
  std::vector<NormalizerKind> normalizers = {NormalizerKind::MeanStd};
  std::vector<Index> widths = {250};
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  std::vector<AblationCell> cells() const {
    std::vector<AblationCell> out;
    for (auto w : weights)
      for (auto n : normalizers)
        for (auto width : widths)
          for (auto s : seeds) out.push_back({w, n, width, s});
    return out;
  }
};

inline constexpr const char* kManifestHeader = "criterion,normalizer,width,seed,status,rse_valid,rse_test,error";

inline std::string manifest_line(const AblationRow& r) {
  std::ostringstream os;
  os << std::setprecision(17) << r.cell.key() << "," << (r.ok ? "ok" : "failed") << ","
     << r.rse_valid << "," << r.rse_test << ",";
  for (char c : r.error) os << (c == ',' || c == '\n' ? ';' : c);
  return os.str();
}

/// Reads completed rows from a manifest written by run_ablation.
inline std::vector<AblationRow> read_manifest(const std::string& path) {
  std::vector<AblationRow> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      if (line != kManifestHeader) throw ArgumentError("'" + path + "' is not an ablation manifest");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    if (f.size() < 7) continue;  // truncated by an interrupted write
    try {
      AblationRow r;
      r.cell.weight = parse_weight_criterion(f[0]);
      r.cell.normalizer = parse_normalizer(f[1]);
      r.cell.width = std::stol(f[2]);
      r.cell.seed = std::stoull(f[3]);
      r.ok = f[4] == "ok";
      r.rse_valid = std::stod(f[5]);
      r.rse_test = std::stod(f[6]);
      if (f.size() > 7) r.error = f[7];
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      continue;
    }
  }
  return rows;
}

/// Dataset used by the cells of one seed.
using DatasetForSeed = std::function<const ForecastDataset&(std::uint64_t)>;

/// Runs every cell of the grid, skipping cells already present in the
/// manifest (when given) and appending each finished row to it. Failed
/// cells are recorded and the sweep continues.
inline std::vector<AblationRow> run_ablation(
    const DatasetForSeed& data, const Architecture& arch, const SswimConfig& base,
    const AblationGrid& grid, const std::string& manifest_path = "", int threads = 1,
    const std::function<void(const AblationRow&)>& on_row = {}) {
  std::vector<AblationRow> rows;
  std::set<std::string> done;
  if (!manifest_path.empty()) {
    for (auto& r : read_manifest(manifest_path)) {
      done.insert(r.cell.key());
      rows.push_back(std::move(r));
    }
  }
  std::ofstream manifest;
  if (!manifest_path.empty()) {
    const bool fresh = !std::filesystem::exists(manifest_path) ||
                       std::filesystem::file_size(manifest_path) == 0;
    manifest.open(manifest_path, std::ios::app);
    if (!manifest) throw Error("cannot open manifest '" + manifest_path + "'");
    if (fresh) manifest << kManifestHeader << "\n" << std::flush;
  }
  for (const auto& cell : grid.cells()) {
    if (done.count(cell.key())) continue;
    AblationRow row;
    row.cell = cell;
    try {
      Architecture a = arch;
      a.hidden.back() = cell.width;
      SswimConfig c = base;
      c.weight = cell.weight;
      c.normalizer = cell.normalizer;
      const auto res = train_sswim(data(cell.seed), a, c, cell.seed, threads);
      row.ok = std::isfinite(res.report.rse_test);
      row.rse_valid = res.report.rse_valid;
      row.rse_test = res.report.rse_test;
      if (!row.ok) row.error = "non-finite test rse";
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (manifest.is_open()) manifest << manifest_line(row) << "\n" << std::flush;
    if (on_row) on_row(row);
    done.insert(cell.key());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<AblationRow> run_ablation(
    const ForecastDataset& ds, const Architecture& arch, const SswimConfig& base,
    const AblationGrid& grid, const std::string& manifest_path = "", int threads = 1,
    const std::function<void(const AblationRow&)>& on_row = {}) {
  return run_ablation([&ds](std::uint64_t) -> const ForecastDataset& { return ds; }, arch, base,
                      grid, manifest_path, threads, on_row);
}

struct AblationSummaryRow {
  WeightCriterion weight;
  NormalizerKind normalizer;
  Index width;
  Index runs = 0;
  Index failures = 0;
  double mean_rse_test = std::numeric_limits<double>::quiet_NaN();
};

/// Mean test RSE over seeds per (criterion, normalizer, width), in grid order.
inline std::vector<AblationSummaryRow> summarize_ablation(const std::vector<AblationRow>& rows,
                                                          const AblationGrid& grid) {
  std::vector<AblationSummaryRow> out;
  for (auto w : grid.weights)
    for (auto n : grid.normalizers)
      for (auto width : grid.widths) {
        AblationSummaryRow s{w, n, width};
        double sum = 0.0;
        Index ok = 0;
        for (const auto& r : rows) {
          if (r.cell.weight != w || r.cell.normalizer != n || r.cell.width != width) continue;
          ++s.runs;
          if (r.ok) {
            sum += r.rse_test;
            ++ok;
          } else {
            ++s.failures;
          }
        }
        if (ok > 0) s.mean_rse_test = sum / static_cast<double>(ok);
        out.push_back(s);
      }
  return out;
}

inline std::string summary_csv(const std::vector<AblationSummaryRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "criterion,normalizer,width,runs,failures,mean_rse_test\n";
  for (const auto& r : rows)
    os << weight_criterion_name(r.weight) << "," << normalizer_name(r.normalizer) << ","
       << r.width << "," << r.runs << "," << r.failures << "," << r.mean_rse_test << "\n";
  return os.str();
}

}  // namespace sswim
