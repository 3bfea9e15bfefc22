// Dataset ingestion, sliding-window forecasting datasets, min-max scaling,
// synthetic series and the RSE metric.
#pragma once

#include "sswim/core.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

namespace sswim {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses a rectangular numeric CSV (one row per time step, one column per
/// variable) into a variables x steps matrix. A first row containing a
/// non-numeric cell is treated as a header. `columns` optionally selects
/// variables by zero-based column index.
inline RowMatrix parse_csv(std::istream& in, const std::vector<Index>& columns = {},
                           const std::string& source = "<csv>") {
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  Index lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = detail::parse_number(fields[c]);
      if (!v) {
        numeric = false;
        bad = c;
        break;
      }
      row.push_back(*v);
    }
    if (first) {
      first = false;
      width = fields.size();
      if (!numeric) continue;  // header
    }
    if (fields.size() != width)
      throw ArgumentError(source + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(width) + " columns, found " +
                          std::to_string(fields.size()));
    if (!numeric)
      throw ArgumentError(source + ":" + std::to_string(lineno) + ": column " +
                          std::to_string(bad + 1) + ": not a number '" +
                          std::string(fields[bad]) + "'");
    for (std::size_t c = 0; c < row.size(); ++c)
      if (!std::isfinite(row[c]))
        throw ArgumentError(source + ":" + std::to_string(lineno) + ": column " +
                            std::to_string(c + 1) + ": non-finite value");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ArgumentError(source + ": no data rows");
  std::vector<Index> cols = columns;
  if (cols.empty())
    for (std::size_t c = 0; c < width; ++c) cols.push_back(static_cast<Index>(c));
  for (Index c : cols)
    if (c < 0 || c >= static_cast<Index>(width))
      throw ArgumentError(source + ": column index " + std::to_string(c) + " out of range");
  RowMatrix out(static_cast<Index>(cols.size()), static_cast<Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t k = 0; k < cols.size(); ++k)
      out(static_cast<Index>(k), static_cast<Index>(t)) =
          rows[t][static_cast<std::size_t>(cols[k])];
  return out;
}

inline RowMatrix load_csv(const std::string& path, const std::vector<Index>& columns = {}) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open csv '" + path + "'");
  return parse_csv(in, columns, path);
}

/// Per-variable affine map to [0, 1] fitted on a step range.
struct MinMaxScaler {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static MinMaxScaler fit(const RowMatrix& series, StepRange steps) {
    if (steps.size() <= 0 || steps.end > series.cols())
      throw ArgumentError("scaler fit range outside the series");
    MinMaxScaler s;
    const auto block = series.middleCols(steps.begin, steps.size());
    s.lo = block.rowwise().minCoeff();
    s.hi = block.rowwise().maxCoeff();
    return s;
  }

  /// Constant variables map to 0.
  RowMatrix transform(const RowMatrix& series) const {
    RowMatrix out(series.rows(), series.cols());
    for (Index v = 0; v < series.rows(); ++v) {
      const double range = hi(v) - lo(v);
      if (range > 0.0)
        out.row(v) = (series.row(v).array() - lo(v)) / range;
      else
        out.row(v).setZero();
    }
    return out;
  }
};

struct SplitRatios {
  double train = 0.7;
  double valid = 0.2;
  double test = 0.1;
};

enum class Split { Train, Valid, Test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Valid:
      return "valid";
    case Split::Test:
      return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw ArgumentError("unknown split '" + std::string(s) + "' (expected train, valid or test)");
}

/// Sliding-window forecasting dataset over a scaled series. Window k starts
/// at step k * stride; its input covers [start, start + O) and its target
/// [start + O, start + O + H).
struct ForecastDataset {
  RowMatrix raw;
  RowMatrix scaled;
  MinMaxScaler scaler;
  Index observation = 0;
  Index horizon = 0;
  Index stride = 1;
  std::vector<Index> train;  // window start steps, chronological
  std::vector<Index> valid;
  std::vector<Index> test;

  Index variables() const noexcept { return raw.rows(); }
  Index windows() const noexcept {
    return static_cast<Index>(train.size() + valid.size() + test.size());
  }

  const std::vector<Index>& split(Split s) const {
    switch (s) {
      case Split::Train:
        return train;
      case Split::Valid:
        return valid;
      case Split::Test:
        break;
    }
    return test;
  }

  DiscreteSignal input(Index start) const {
    return DiscreteSignal(RowMatrix(scaled.middleCols(start, observation)), 1.0);
  }
  DiscreteSignal target(Index start) const {
    return DiscreteSignal(RowMatrix(scaled.middleCols(start + observation, horizon)), 1.0);
  }
};

/// Window count floor((steps - (O + H)) / stride) + 1 and the chronological
/// split sizes: train = max(1, floor(r_train * W)), valid = floor(r_valid * W)
/// (capped by what is left), test = the rest.
inline std::array<Index, 3> split_sizes(Index windows, const SplitRatios& r) {
  if (windows < 1) throw ArgumentError("no windows to split");
  if (r.train <= 0.0 || r.valid < 0.0 || r.test < 0.0 ||
      r.train + r.valid + r.test > 1.0 + 1e-12)
    throw ArgumentError("split ratios must be nonnegative, train > 0, sum <= 1");
  const double w = static_cast<double>(windows);
  // Guard floor() against ratios like 0.7 * 100 = 69.999...
  auto fl = [](double x) { return static_cast<Index>(std::floor(x + 1e-9)); };
  const Index tr = std::min(windows, std::max<Index>(1, fl(r.train * w)));
  const Index va = std::min(fl(r.valid * w), windows - tr);
  return {tr, va, windows - tr - va};
}

inline ForecastDataset make_windows(const RowMatrix& series, Index observation,
                                    Index horizon, Index stride = 1,
                                    const SplitRatios& ratios = {}) {
  if (observation < 1 || horizon < 1) throw ArgumentError("O and H must be >= 1");
  if (stride < 1) throw ArgumentError("window stride must be >= 1");
  if (series.rows() < 1) throw ArgumentError("series has no variables");
  if (series.cols() < observation + horizon)
    throw ArgumentError("series too short: " + std::to_string(series.cols()) +
                        " steps < O + H = " + std::to_string(observation + horizon));
  if (!series.allFinite()) throw ArgumentError("series contains non-finite values");
  const Index W = (series.cols() - (observation + horizon)) / stride + 1;
  const auto sizes = split_sizes(W, ratios);
  ForecastDataset ds;
  ds.raw = series;
  ds.observation = observation;
  ds.horizon = horizon;
  ds.stride = stride;
  for (Index k = 0; k < W; ++k) {
    const Index start = k * stride;
    if (k < sizes[0])
      ds.train.push_back(start);
    else if (k < sizes[0] + sizes[1])
      ds.valid.push_back(start);
    else
      ds.test.push_back(start);
  }
  // The scaler sees only raw steps covered by training windows.
  const Index train_end = ds.train.back() + observation + horizon;
  ds.scaler = MinMaxScaler::fit(series, {0, train_end});
  ds.scaled = ds.scaler.transform(series);
  return ds;
}

struct SineComponent {
  double amplitude = 1.0;
  double period = 16.0;
  double phase = 0.0;
};

/// Multi-sine series: per variable 2-4 sinusoids with periods in [8, 64],
/// amplitudes in [0.5, 1.5], plus Gaussian noise.
struct MultiSine {
  std::vector<std::vector<SineComponent>> components;  // per variable
  double noise = 0.05;

  static MultiSine random(Index variables, std::uint64_t seed, double noise = 0.05) {
    Rng rng(derive_seed(seed, {0x5157u}));
    std::uniform_int_distribution<int> count(2, 4);
    std::uniform_real_distribution<double> amp(0.5, 1.5), per(8.0, 64.0),
        ph(0.0, 2.0 * std::numbers::pi);
    MultiSine m;
    m.noise = noise;
    for (Index v = 0; v < variables; ++v) {
      std::vector<SineComponent> cs(static_cast<std::size_t>(count(rng)));
      for (auto& c : cs) {
        c.amplitude = amp(rng);
        c.period = per(rng);
        c.phase = ph(rng);
      }
      m.components.push_back(std::move(cs));
    }
    return m;
  }

  double clean(Index v, Index t) const {
    double s = 0.0;
    for (const auto& c : components[static_cast<std::size_t>(v)])
      s += c.amplitude *
           std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / c.period + c.phase);
    return s;
  }

  RowMatrix generate(Index steps, std::uint64_t seed) const {
    Rng rng(derive_seed(seed, {0x401eu}));
    std::normal_distribution<double> nd(0.0, 1.0);
    const Index V = static_cast<Index>(components.size());
    RowMatrix out(V, steps);
    for (Index v = 0; v < V; ++v)
      for (Index t = 0; t < steps; ++t)
        out(v, t) = clean(v, t) + (noise > 0.0 ? noise * nd(rng) : 0.0);
    return out;
  }
};

/// Order-2 autoregressive series x_t = a1 x_{t-1} + a2 x_{t-2} + e_t with
/// coefficients drawn inside the stationarity triangle.
struct ARNoise {
  std::vector<std::array<double, 2>> coefficients;  // per variable
  double noise = 1.0;

  static ARNoise random(Index variables, std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0xa702u}));
    // Complex roots with modulus r in [0.6, 0.95] keep the process stable.
    std::uniform_real_distribution<double> rad(0.6, 0.95), ang(0.1, std::numbers::pi - 0.1);
    ARNoise a;
    for (Index v = 0; v < variables; ++v) {
      const double r = rad(rng), th = ang(rng);
      a.coefficients.push_back({2.0 * r * std::cos(th), -r * r});
    }
    return a;
  }

  static bool stable(const std::array<double, 2>& c) {
    return std::abs(c[1]) < 1.0 && c[1] + c[0] < 1.0 && c[1] - c[0] < 1.0;
  }

  RowMatrix generate(Index steps, std::uint64_t seed, Index burn_in = 200) const {
    Rng rng(derive_seed(seed, {0xa703u}));
    std::normal_distribution<double> nd(0.0, noise);
    const Index V = static_cast<Index>(coefficients.size());
    RowMatrix out(V, steps);
    for (Index v = 0; v < V; ++v) {
      const auto& c = coefficients[static_cast<std::size_t>(v)];
      double x1 = 0.0, x2 = 0.0;
      for (Index t = -burn_in; t < steps; ++t) {
        const double x = c[0] * x1 + c[1] * x2 + nd(rng);
        x2 = x1;
        x1 = x;
        if (t >= 0) out(v, t) = x;
      }
    }
    return out;
  }
};

enum class SynthKind { MultiSine, ARNoise };

inline std::string_view synth_kind_name(SynthKind k) {
  return k == SynthKind::MultiSine ? "multisine" : "arnoise";
}

inline SynthKind parse_synth_kind(std::string_view s) {
  if (s == "multisine") return SynthKind::MultiSine;
  if (s == "arnoise") return SynthKind::ARNoise;
  throw ArgumentError("unknown synthetic dataset '" + std::string(s) +
                      "' (expected multisine or arnoise)");
}

inline RowMatrix synth_dataset(SynthKind kind, Index variables, Index steps,
                               std::uint64_t seed, double noise = 0.05) {
  if (variables < 1 || steps < 1) throw ArgumentError("synthetic dataset needs a positive size");
  if (kind == SynthKind::MultiSine)
    return MultiSine::random(variables, seed, noise).generate(steps, seed);
  return ARNoise::random(variables, seed).generate(steps, seed);
}

/// sqrt(sum ||Y - Yhat||^2 / sum ||Y - Ybar||^2), Ybar the elementwise mean
/// target over the evaluation set.
inline double rse(std::span<const DiscreteSignal> predictions,
                  std::span<const DiscreteSignal> targets) {
  if (predictions.size() != targets.size()) throw ShapeError("prediction/target count mismatch");
  if (targets.empty()) throw ArgumentError("rse of an empty set");
  const auto& first = targets.front().values;
  RowMatrix mean = RowMatrix::Zero(first.rows(), first.cols());
  for (std::size_t n = 0; n < targets.size(); ++n) {
    if (targets[n].values.rows() != first.rows() || targets[n].values.cols() != first.cols() ||
        predictions[n].values.rows() != first.rows() ||
        predictions[n].values.cols() != first.cols())
      throw ShapeError("prediction/target shape mismatch");
    mean += targets[n].values;
  }
  mean /= static_cast<double>(targets.size());
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < targets.size(); ++n) {
    num += (targets[n].values - predictions[n].values).squaredNorm();
    den += (targets[n].values - mean).squaredNorm();
  }
  if (!(den > 0.0)) throw DegenerateError("rse undefined: constant targets");
  return std::sqrt(num / den);
}

}  // namespace sswim
