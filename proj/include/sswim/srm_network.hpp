// Feed-forward Spike Response Model network: parameter containers and a
// discrete-time simulator (spike trains for hidden layers, voltages for the
// output layer).
#pragma once

#include "sswim/core.hpp"
#include "sswim/kernels.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sswim {

/// Uniform time grid of a forecasting task: input on [0, T), prediction on
/// [T, T + H). Steps are integer multiples of dt.
struct TimeGrid {
  double dt = 1.0;
  Index observation = 0;  // T (= O for forecasting)
  Index horizon = 0;      // H

  Index length() const noexcept { return observation + horizon; }
  StepRange target_window() const noexcept {
    return {observation, observation + horizon};
  }
  bool operator==(const TimeGrid&) const = default;
};

/// Parameters of one layer. Hidden layers additionally carry spike costs,
/// refractory supports and a refractory kernel; the output layer does not.
struct LayerParams {
  Eigen::MatrixXd weights;  // N_l x N_{l-1}
  Eigen::VectorXd bias;
  Eigen::VectorXd delay;
  Eigen::VectorXd support;
  Eigen::VectorXd spike_cost;          // hidden only
  Eigen::VectorXd refractory_support;  // hidden only
  KernelSpec pspk = pspk_spec(KernelFamily::Hat);
  std::optional<KernelSpec> rfk;       // hidden only

  bool is_hidden() const noexcept { return rfk.has_value(); }
  Index width() const noexcept { return weights.rows(); }
  Index input_width() const noexcept { return weights.cols(); }

  PlacedKernel psp_kernel(Index i) const {
    return PlacedKernel(pspk, delay(i), support(i));
  }
  PlacedKernel refractory_kernel(Index i) const {
    return PlacedKernel(*rfk, 0.0, refractory_support(i));
  }

  void validate() const {
    const Index n = width();
    if (bias.size() != n || delay.size() != n || support.size() != n)
      throw ShapeError("layer parameter vectors do not match layer width");
    if (!weights.allFinite() || !bias.allFinite())
      throw ArgumentError("non-finite weights or biases");
    for (Index i = 0; i < n; ++i) {
      if (!(support(i) > 0.0)) throw ArgumentError("PSPK support must be > 0");
      if (!(delay(i) >= 0.0)) throw ArgumentError("delay must be >= 0");
    }
    if (is_hidden()) {
      if (spike_cost.size() != n || refractory_support.size() != n)
        throw ShapeError("hidden layer spike-cost vectors do not match width");
      if (!spike_cost.allFinite()) throw ArgumentError("non-finite spike cost");
      for (Index i = 0; i < n; ++i)
        if (!(refractory_support(i) > 0.0))
          throw ArgumentError("refractory support must be > 0");
    } else if (spike_cost.size() != 0 || refractory_support.size() != 0) {
      throw ShapeError("output layer carries no spike cost");
    }
  }
};

/// Metadata recorded by the trainer alongside the parameters.
struct TrainingInfo {
  std::uint64_t seed = 0;
  std::vector<double> lambda;           // per output neuron
  std::vector<double> condition_bound;  // per output neuron
  bool operator==(const TrainingInfo&) const = default;
};

struct SnnModel {
  std::vector<LayerParams> layers;  // L hidden layers followed by the output
  Index input_dim = 0;
  Index output_dim = 0;
  TimeGrid grid;
  std::optional<TrainingInfo> training;

  Index hidden_layers() const noexcept {
    return static_cast<Index>(layers.size()) - 1;
  }
  const LayerParams& output_layer() const { return layers.back(); }

  void validate() const {
    if (layers.size() < 2)
      throw ShapeError("model needs at least one hidden layer and an output layer");
    Index width = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      layer.validate();
      if (layer.input_width() != width)
        throw ShapeError("layer " + std::to_string(l + 1) +
                         " input width does not chain");
      const bool last = l + 1 == layers.size();
      if (layer.is_hidden() == last)
        throw ShapeError(last ? "output layer must not be spiking"
                              : "hidden layer needs a refractory kernel");
      width = layer.width();
    }
    if (width != output_dim) throw ShapeError("output width != output_dim");
    if (grid.observation <= 0 || grid.horizon <= 0 || !(grid.dt > 0.0))
      throw ArgumentError("invalid time grid");
  }
};

/// out[t] += scale * dt * sum_s k[s] * x[t - s] (causal, per channel).
inline void causal_convolve_add(std::span<const double> x, const KernelTaps& k,
                                double dt, double scale, std::span<double> out) {
  const Index n = static_cast<Index>(out.size());
  const Index nx = static_cast<Index>(x.size());
  const double f = scale * dt;
  for (Index s = k.first; s < k.end(); ++s) {
    const double ks = f * k.values[static_cast<std::size_t>(s - k.first)];
    if (ks == 0.0) continue;
    const Index stop = std::min(n, nx + s);
    for (Index t = s; t < stop; ++t) out[t] += ks * x[t - s];
  }
}

/// out[t] += scale * k[t - t_f] for each spike t_f (sparse kernel placement).
inline void place_spikes_add(const std::vector<Index>& train, const KernelTaps& k,
                             double scale, std::span<double> out) {
  const Index n = static_cast<Index>(out.size());
  for (Index tf : train) {
    const Index lo = tf + k.first;
    const Index hi = std::min(n, tf + k.end());
    for (Index t = lo; t < hi; ++t)
      out[t] += scale * k.values[static_cast<std::size_t>(t - lo)];
  }
}

namespace detail {

inline void check_window(StepRange w, Index length) {
  if (w.begin < 0 || w.end > length || w.begin > w.end)
    throw ShapeError("window outside the grid");
}

}  // namespace detail

/// PSP contributions psi_ij, j = 1..N_{l-1}, of neuron i for a real-valued
/// layer input, restricted to `window`.
inline DiscreteSignal psp_contributions(const LayerParams& layer, Index neuron,
                                        const DiscreteSignal& input,
                                        StepRange window) {
  if (input.channels() != layer.input_width())
    throw ShapeError("input channel count does not match layer input width");
  detail::check_window(window, input.length());
  const KernelTaps taps = kernel_taps(layer.psp_kernel(neuron), input.dt);
  DiscreteSignal out(input.channels(), window.size(), input.dt);
  std::vector<double> buf(static_cast<std::size_t>(window.end));
  for (Index j = 0; j < input.channels(); ++j) {
    std::fill(buf.begin(), buf.end(), 0.0);
    causal_convolve_add(input.channel(j), taps, input.dt, 1.0, buf);
    for (Index t = window.begin; t < window.end; ++t)
      out.values(j, t - window.begin) = buf[static_cast<std::size_t>(t)];
  }
  return out;
}

/// Spike-valued overload: one kernel copy per spike.
inline DiscreteSignal psp_contributions(const LayerParams& layer, Index neuron,
                                        const SpikeTrainSet& input,
                                        StepRange window, double dt) {
  if (input.neurons() != layer.input_width())
    throw ShapeError("spike input width does not match layer input width");
  detail::check_window(window, input.length);
  const KernelTaps taps = kernel_taps(layer.psp_kernel(neuron), dt);
  DiscreteSignal out(input.neurons(), window.size(), dt);
  std::vector<double> buf(static_cast<std::size_t>(window.end));
  for (Index j = 0; j < input.neurons(); ++j) {
    std::fill(buf.begin(), buf.end(), 0.0);
    place_spikes_add(input.train(j), taps, 1.0, buf);
    for (Index t = window.begin; t < window.end; ++t)
      out.values(j, t - window.begin) = buf[static_cast<std::size_t>(t)];
  }
  return out;
}

/// sum_j w_j psi_ij(t) over the whole input grid. Linear in w, so real inputs
/// are mixed first and convolved once.
inline std::vector<double> weighted_psp(const KernelTaps& taps,
                                        const DiscreteSignal& input,
                                        const Eigen::Ref<const Eigen::VectorXd>& w) {
  if (w.size() != input.channels()) throw ShapeError("weight/channel mismatch");
  const Index n = input.length();
  std::vector<double> mixed(static_cast<std::size_t>(n), 0.0);
  for (Index j = 0; j < input.channels(); ++j) {
    const double wj = w(j);
    if (wj == 0.0) continue;
    const auto ch = input.channel(j);
    for (Index t = 0; t < n; ++t) mixed[t] += wj * ch[t];
  }
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  causal_convolve_add(mixed, taps, input.dt, 1.0, out);
  return out;
}

inline std::vector<double> weighted_psp(const KernelTaps& taps,
                                        const SpikeTrainSet& input,
                                        const Eigen::Ref<const Eigen::VectorXd>& w) {
  if (w.size() != input.neurons()) throw ShapeError("weight/neuron mismatch");
  std::vector<double> out(static_cast<std::size_t>(input.length), 0.0);
  for (Index j = 0; j < input.neurons(); ++j)
    if (w(j) != 0.0) place_spikes_add(input.train(j), taps, w(j), out);
  return out;
}

/// Threshold loop of one neuron: v(t) = drive(t) + bias + cost * eta(t) where
/// eta only sees strictly earlier spikes. Returns spike steps; writes the
/// voltage trace when `voltage` is non-empty.
inline std::vector<Index> run_threshold(std::span<const double> drive, double bias,
                                        double cost, const KernelTaps& refractory,
                                        std::span<double> voltage = {}) {
  const Index n = static_cast<Index>(drive.size());
  std::vector<double> eta(static_cast<std::size_t>(n), 0.0);
  std::vector<Index> spikes;
  for (Index t = 0; t < n; ++t) {
    const double v = drive[t] + bias + eta[t];
    if (!voltage.empty()) voltage[t] = v;
    if (v >= kThreshold) {
      spikes.push_back(t);
      if (cost != 0.0) {
        const Index hi = std::min(n, t + refractory.end());
        for (Index u = t + refractory.first; u < hi; ++u)
          eta[u] += cost * refractory.values[static_cast<std::size_t>(u - t - refractory.first)];
      }
    }
  }
  return spikes;
}

struct HiddenLayerOutput {
  SpikeTrainSet spikes;
  DiscreteSignal voltages;  // full grid, including the refractory term
};

namespace detail {

template <typename Input>
HiddenLayerOutput simulate_hidden(const LayerParams& layer, const Input& input,
                                  Index length, double dt, bool keep_voltages) {
  if (!layer.is_hidden()) throw ArgumentError("layer has no refractory kernel");
  const Index n = layer.width();
  HiddenLayerOutput out;
  out.spikes = SpikeTrainSet(n, length);
  if (keep_voltages) out.voltages = DiscreteSignal(n, length, dt);
  for (Index i = 0; i < n; ++i) {
    const KernelTaps taps = kernel_taps(layer.psp_kernel(i), dt);
    const KernelTaps rtaps = kernel_taps(layer.refractory_kernel(i), dt);
    const auto drive = weighted_psp(taps, input, layer.weights.row(i).transpose());
    std::span<double> vspan;
    if (keep_voltages) vspan = out.voltages.channel(i);
    out.spikes.trains[static_cast<std::size_t>(i)] =
        run_threshold(drive, layer.bias(i), layer.spike_cost(i), rtaps, vspan);
  }
  return out;
}

}  // namespace detail

/// Simulates every neuron of a hidden layer on the full grid of `input`.
inline HiddenLayerOutput simulate_hidden_layer(const LayerParams& layer,
                                               const DiscreteSignal& input,
                                               bool keep_voltages = true) {
  if (input.channels() != layer.input_width())
    throw ShapeError("input channel count does not match layer input width");
  return detail::simulate_hidden(layer, input, input.length(), input.dt,
                                 keep_voltages);
}

inline HiddenLayerOutput simulate_hidden_layer(const LayerParams& layer,
                                               const SpikeTrainSet& input, double dt,
                                               bool keep_voltages = true) {
  if (input.neurons() != layer.input_width())
    throw ShapeError("spike input width does not match layer input width");
  return detail::simulate_hidden(layer, input, input.length, dt, keep_voltages);
}

/// Output-layer voltages sum_j W_ij psi_ij + b_i on `window` (no threshold).
inline DiscreteSignal output_voltages(const LayerParams& layer,
                                      const SpikeTrainSet& input, StepRange window,
                                      double dt) {
  if (input.neurons() != layer.input_width())
    throw ShapeError("spike input width does not match output layer width");
  detail::check_window(window, input.length);
  DiscreteSignal out(layer.width(), window.size(), dt);
  for (Index i = 0; i < layer.width(); ++i) {
    const KernelTaps taps = kernel_taps(layer.psp_kernel(i), dt);
    const auto v = weighted_psp(taps, input, layer.weights.row(i).transpose());
    for (Index t = window.begin; t < window.end; ++t)
      out.values(i, t - window.begin) = v[static_cast<std::size_t>(t)] + layer.bias(i);
  }
  return out;
}

/// Zero-extends an input observed on [0, T) to the full model grid.
inline DiscreteSignal pad_to_grid(const DiscreteSignal& x, Index length) {
  if (x.length() == length) return x;
  if (x.length() > length) throw ShapeError("input longer than the model grid");
  DiscreteSignal out(x.channels(), length, x.dt);
  out.values.leftCols(x.length()) = x.values;
  return out;
}

struct ForwardResult {
  DiscreteSignal prediction;              // D_out x H on [T, T + H)
  std::vector<SpikeTrainSet> hidden_spikes;  // one per hidden layer
};

/// Runs the hidden layers and returns the spike trains of the last one.
inline std::vector<SpikeTrainSet> hidden_forward(const SnnModel& model,
                                                 const DiscreteSignal& x) {
  if (x.channels() != model.input_dim) throw ShapeError("input dimension mismatch");
  const DiscreteSignal input = pad_to_grid(x, model.grid.length());
  std::vector<SpikeTrainSet> spikes;
  spikes.reserve(static_cast<std::size_t>(model.hidden_layers()));
  for (Index l = 0; l < model.hidden_layers(); ++l) {
    const auto& layer = model.layers[static_cast<std::size_t>(l)];
    if (l == 0)
      spikes.push_back(simulate_hidden_layer(layer, input, false).spikes);
    else
      spikes.push_back(
          simulate_hidden_layer(layer, spikes.back(), model.grid.dt, false).spikes);
  }
  return spikes;
}

inline ForwardResult forward(const SnnModel& model, const DiscreteSignal& x) {
  ForwardResult r;
  r.hidden_spikes = hidden_forward(model, x);
  r.prediction = output_voltages(model.output_layer(), r.hidden_spikes.back(),
                                 model.grid.target_window(), model.grid.dt);
  return r;
}

}  // namespace sswim
