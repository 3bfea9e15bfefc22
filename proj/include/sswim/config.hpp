// Run configuration: a JSON file describing the dataset, windowing,
// architecture, training hyperparameters, seeds and ablation grid. Unknown
// keys are rejected.
#pragma once

#include "sswim/harness.hpp"
#include "sswim/training.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace sswim {

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DatasetSource {
  bool synthetic = true;
  SynthKind kind = SynthKind::MultiSine;
  Index variables = 4;
  Index steps = 3000;
  std::uint64_t seed = 7;
  bool seed_from_run = false;  // "seed": "run" regenerates the series per run seed
  double noise = 0.05;
  std::string csv_path;
  std::vector<Index> columns;
};

struct RunConfig {
  DatasetSource dataset;
  Index observation = 64;
  Index horizon = 24;
  Index stride = 1;
  SplitRatios split;
  Architecture architecture;
  SswimConfig sswim;
  std::vector<std::uint64_t> seeds = {1};
  int threads = 0;  // 0 = all hardware threads
  std::string output_dir = "sswim_out";
  AblationGrid ablation;

  /// Dataset for a run with the given seed; only synthetic sources with
  /// seed_from_run depend on it.
  ForecastDataset make_dataset(std::uint64_t run_seed = 0) const {
    const RowMatrix series =
        dataset.synthetic
            ? synth_dataset(dataset.kind, dataset.variables, dataset.steps,
                            dataset.seed_from_run ? run_seed : dataset.seed, dataset.noise)
            : load_csv(dataset.csv_path, dataset.columns);
    return make_windows(series, observation, horizon, stride, split);
  }

  bool dataset_per_seed() const { return dataset.synthetic && dataset.seed_from_run; }
};

namespace detail {

using json = nlohmann::json;

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + ": missing required field");
    return j_.at(key);
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  T get(const std::string& key) {
    try {
      return at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type");
    }
  }

  template <typename T>
  void opt(const std::string& key, T& out) {
    if (has(key)) out = get<T>(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(field(k) + ": unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
auto parse_field(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

inline std::vector<EmbeddingSpec> embedding_list(ObjectReader& r, const std::string& key) {
  std::vector<EmbeddingSpec> out;
  for (const auto& s : r.get<std::vector<std::string>>(key))
    out.push_back(parse_field(r.field(key), [&] { return EmbeddingSpec::parse(s); }));
  if (out.empty()) throw ConfigError(r.field(key) + ": must not be empty");
  return out;
}

}  // namespace detail

/// Parses a configuration document. Relative csv paths are resolved against
/// `base_dir`.
inline RunConfig parse_run_config(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {}) {
  using detail::ObjectReader;
  using detail::parse_field;
  RunConfig rc;
  ObjectReader root(j, "");

  {
    ObjectReader d(root.at("dataset"), "dataset");
    const auto source = d.get<std::string>("source");
    if (source == "synth") {
      rc.dataset.synthetic = true;
      if (d.has("kind"))
        rc.dataset.kind = parse_field("dataset.kind",
                                      [&] { return parse_synth_kind(d.get<std::string>("kind")); });
      d.opt("variables", rc.dataset.variables);
      d.opt("steps", rc.dataset.steps);
      if (d.has("seed")) {
        const auto& v = d.at("seed");
        if (v.is_string()) {
          if (v.get<std::string>() != "run")
            throw ConfigError("dataset.seed: expected an integer or \"run\"");
          rc.dataset.seed_from_run = true;
        } else {
          rc.dataset.seed = d.get<std::uint64_t>("seed");
        }
      }
      d.opt("noise", rc.dataset.noise);
      if (rc.dataset.variables < 1) throw ConfigError("dataset.variables: must be >= 1");
      if (rc.dataset.steps < 1) throw ConfigError("dataset.steps: must be >= 1");
      if (rc.dataset.noise < 0.0) throw ConfigError("dataset.noise: must be >= 0");
    } else if (source == "csv") {
      rc.dataset.synthetic = false;
      std::filesystem::path p = d.get<std::string>("path");
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      if (!std::filesystem::exists(p))
        throw ConfigError("dataset.path: file not found '" + p.string() + "'");
      rc.dataset.csv_path = p.string();
      d.opt("columns", rc.dataset.columns);
    } else {
      throw ConfigError("dataset.source: expected 'synth' or 'csv'");
    }
    d.finish();
  }

  {
    ObjectReader w(root.at("window"), "window");
    rc.observation = w.get<Index>("observation");
    rc.horizon = w.get<Index>("horizon");
    w.opt("stride", rc.stride);
    if (w.has("split")) {
      const auto s = w.get<std::vector<double>>("split");
      if (s.size() != 3) throw ConfigError("window.split: expected [train, valid, test]");
      rc.split = {s[0], s[1], s[2]};
    }
    w.finish();
    if (rc.observation < 1) throw ConfigError("window.observation: must be >= 1");
    if (rc.horizon < 1) throw ConfigError("window.horizon: must be >= 1");
    if (rc.stride < 1) throw ConfigError("window.stride: must be >= 1");
    parse_field("window.split", [&] { return split_sizes(1, rc.split); });
  }

  if (root.has("architecture")) {
    ObjectReader a(root.at("architecture"), "architecture");
    a.opt("hidden", rc.architecture.hidden);
    auto fam = [&](const char* key) {
      return parse_field(a.field(key), [&] { return parse_kernel_family(a.get<std::string>(key)); });
    };
    if (a.has("pspk")) rc.architecture.pspk = fam("pspk");
    if (a.has("rfk")) rc.architecture.rfk = fam("rfk");
    if (a.has("output_pspk")) rc.architecture.output_pspk = fam("output_pspk");
    a.finish();
    if (rc.architecture.hidden.empty()) throw ConfigError("architecture.hidden: must not be empty");
    for (Index w : rc.architecture.hidden)
      if (w < 1) throw ConfigError("architecture.hidden: widths must be >= 1");
  }

  if (root.has("sswim")) {
    SswimConfig& c = rc.sswim;
    ObjectReader s(root.at("sswim"), "sswim");
    s.opt("init_batch", c.init_batch);
    s.opt("sigma_min", c.sigma_min);
    s.opt("sigma_max", c.sigma_max);
    s.opt("sigma_count", c.sigma_count);
    if (s.has("weight"))
      c.weight = parse_field("sswim.weight",
                             [&] { return parse_weight_criterion(s.get<std::string>("weight")); });
    if (s.has("normalizer"))
      c.normalizer = parse_field("sswim.normalizer",
                                 [&] { return parse_normalizer(s.get<std::string>("normalizer")); });
    s.opt("mu_t", c.mu_t);
    s.opt("s_t", c.s_t);
    s.opt("z", c.z);
    s.opt("eps_sc", c.eps_sc);
    s.opt("max_retries", c.max_retries);
    if (s.has("metrics")) {
      const auto& m = s.at("metrics");
      if (m.is_string()) {
        if (m.get<std::string>() != "entropy")
          throw ConfigError("sswim.metrics: expected \"entropy\" or {\"input\", \"output\"}");
      } else {
        ObjectReader mr(m, "sswim.metrics");
        const auto in = mr.get<std::string>("input");
        const auto out = mr.get<std::string>("output");
        mr.finish();
        c.fixed_metrics = parse_field("sswim.metrics", [&] {
          return std::make_pair(EmbeddingSpec::parse(in), EmbeddingSpec::parse(out));
        });
      }
    }
    if (s.has("input_candidates")) c.input_candidates = detail::embedding_list(s, "input_candidates");
    if (s.has("output_candidates")) c.output_candidates = detail::embedding_list(s, "output_candidates");
    s.opt("epsilon", c.epsilon);
    s.opt("min_norm", c.min_norm);
    if (s.has("entropy_floor")) c.entropy_floor = s.get<double>("entropy_floor");
    if (s.has("delay_aggregation"))
      c.delay_aggregation = parse_field("sswim.delay_aggregation", [&] {
        return parse_delay_aggregation(s.get<std::string>("delay_aggregation"));
      });
    if (s.has("support_grid")) {
      ObjectReader g(s.at("support_grid"), "sswim.support_grid");
      g.opt("min", c.support_min);
      if (g.has("max")) c.support_max = g.get<double>("max");
      g.opt("alpha", c.support_alpha);
      g.opt("count", c.support_count);
      g.finish();
    }
    if (s.has("lambda_grid")) {
      ObjectReader g(s.at("lambda_grid"), "sswim.lambda_grid");
      g.opt("count", c.lambda_count);
      g.opt("min", c.lambda_min);
      g.opt("max", c.lambda_max);
      g.finish();
    }
    s.opt("batch_size", c.batch_size);
    s.finish();

    if (c.init_batch < 2) throw ConfigError("sswim.init_batch: must be >= 2");
    if (!(c.sigma_min > 0.0) || c.sigma_max < c.sigma_min)
      throw ConfigError("sswim.sigma_min/sigma_max: need 0 < sigma_min <= sigma_max");
    if (c.sigma_count < 2) throw ConfigError("sswim.sigma_count: must be >= 2");
    if (!(c.mu_t < 1.0)) throw ConfigError("sswim.mu_t: must be < 1");
    if (!(c.s_t > 0.0)) throw ConfigError("sswim.s_t: must be > 0");
    if (!(c.z > 0.0)) throw ConfigError("sswim.z: must be > 0");
    if (c.eps_sc < 0.0) throw ConfigError("sswim.eps_sc: must be >= 0");
    if (c.max_retries < 0) throw ConfigError("sswim.max_retries: must be >= 0");
    if (c.epsilon < 0.0) throw ConfigError("sswim.epsilon: must be >= 0");
    if (c.min_norm < 0.0) throw ConfigError("sswim.min_norm: must be >= 0");
    if (!(c.support_min > 0.0)) throw ConfigError("sswim.support_grid.min: must be > 0");
    if (c.support_max && !(*c.support_max > c.support_min))
      throw ConfigError("sswim.support_grid.max: must exceed min");
    if (c.support_alpha < 1.0) throw ConfigError("sswim.support_grid.alpha: must be >= 1");
    if (c.support_count < 1) throw ConfigError("sswim.support_grid.count: must be >= 1");
    if (c.lambda_count < 1) throw ConfigError("sswim.lambda_grid.count: must be >= 1");
    if (!(c.lambda_min > 0.0) || c.lambda_max < c.lambda_min)
      throw ConfigError("sswim.lambda_grid: need 0 < min <= max");
    if (c.batch_size < 1) throw ConfigError("sswim.batch_size: must be >= 1");
  }

  if (root.has("seeds")) {
    rc.seeds = root.get<std::vector<std::uint64_t>>("seeds");
    if (rc.seeds.empty()) throw ConfigError("seeds: must not be empty");
  }
  root.opt("threads", rc.threads);
  if (rc.threads < 0) throw ConfigError("threads: must be >= 0");
  root.opt("output_dir", rc.output_dir);

  if (root.has("ablation")) {
    ObjectReader a(root.at("ablation"), "ablation");
    AblationGrid& g = rc.ablation;
    if (a.has("criteria")) {
      g.weights.clear();
      for (const auto& s : a.get<std::vector<std::string>>("criteria"))
        g.weights.push_back(parse_field("ablation.criteria", [&] { return parse_weight_criterion(s); }));
    }
    if (a.has("normalizers")) {
      g.normalizers.clear();
      for (const auto& s : a.get<std::vector<std::string>>("normalizers"))
        g.normalizers.push_back(parse_field("ablation.normalizers", [&] { return parse_normalizer(s); }));
    }
    a.opt("widths", g.widths);
    a.opt("seeds", g.seeds);
    a.finish();
    if (g.weights.empty() || g.normalizers.empty() || g.widths.empty() || g.seeds.empty())
      throw ConfigError("ablation: every list must be nonempty");
    for (Index w : g.widths)
      if (w < 1) throw ConfigError("ablation.widths: must be >= 1");
  } else {
    rc.ablation.seeds = rc.seeds;
    rc.ablation.widths = {rc.architecture.hidden.back()};
  }
  root.finish();
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j, std::filesystem::path(path).parent_path());
}

}  // namespace sswim
