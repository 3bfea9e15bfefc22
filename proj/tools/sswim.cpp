// sswim command-line front end: train, eval, ablate, inspect.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or usage.

#include "sswim/sswim.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using namespace sswim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::string model;
  std::string out;
  std::string split = "test";
  std::vector<std::uint64_t> seeds;
  int threads = -1;
};

// --out beats SSWIM_OUT_DIR beats the config file.
std::string output_dir(const Options& o, const RunConfig& rc) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("SSWIM_OUT_DIR"); env && *env) return env;
  return rc.output_dir;
}

int thread_count(const Options& o, const RunConfig* rc) {
  int t = o.threads >= 0 ? o.threads : (rc ? rc->threads : 0);
  return t == 0 ? default_thread_count() : t;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + p.string() + "'");
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

int cmd_train(const Options& o) {
  const RunConfig rc = load_run_config(o.config);
  const auto seeds = o.seeds.empty() ? rc.seeds : o.seeds;
  const int threads = thread_count(o, &rc);
  std::optional<ForecastDataset> shared;
  if (!rc.dataset_per_seed()) shared = rc.make_dataset();
  const fs::path dir = prepare_dir(output_dir(o, rc));
  std::cout << std::setprecision(17);
  for (auto seed : seeds) {
    const ForecastDataset ds = shared ? *shared : rc.make_dataset(seed);
    const auto res = train_sswim(ds, rc.architecture, rc.sswim, seed, threads);
    const std::string tag = "seed" + std::to_string(seed);
    save_model(res.model, (dir / ("model_" + tag + ".json")).string());
    write_file(dir / ("report_" + tag + ".txt"), res.report.to_text());
    Split split = Split::Test;
    if (ds.test.empty()) split = ds.valid.empty() ? Split::Train : Split::Valid;
    write_file(dir / ("predictions_" + tag + ".csv"),
               predictions_csv(ds, split, evaluate(res.model, ds, split, threads)));
    std::cout << "seed=" << seed << " rse_train=" << res.report.rse_train
              << " rse_valid=" << res.report.rse_valid << " rse_test=" << res.report.rse_test
              << " seconds=" << res.report.seconds.total << "\n";
  }
  return kExitOk;
}

int cmd_eval(const Options& o) {
  const RunConfig rc = load_run_config(o.config);
  const Split split = [&] {
    try {
      return parse_split(o.split);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("--split: ") + e.what());
    }
  }();
  const SnnModel model = load_model(o.model);
  std::uint64_t seed = 0;
  if (rc.dataset_per_seed()) {
    if (!o.seeds.empty()) seed = o.seeds.front();
    else if (model.training) seed = model.training->seed;
    else throw ConfigError("dataset.seed is \"run\" but the model records no seed; pass --seed");
  }
  const ForecastDataset ds = rc.make_dataset(seed);
  const auto ev = evaluate(model, ds, split, thread_count(o, &rc));
  std::cout << std::setprecision(17) << "split=" << split_name(split) << " rse=" << ev.rse
            << " windows=" << ev.targets.size() << "\n";
  return kExitOk;
}

int cmd_ablate(const Options& o) {
  const RunConfig rc = load_run_config(o.config);
  AblationGrid grid = rc.ablation;
  if (!o.seeds.empty()) grid.seeds = o.seeds;
  std::map<std::uint64_t, ForecastDataset> cache;
  auto data = [&](std::uint64_t seed) -> const ForecastDataset& {
    const std::uint64_t key = rc.dataset_per_seed() ? seed : 0;
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, rc.make_dataset(key)).first;
    return it->second;
  };
  const fs::path dir = prepare_dir(output_dir(o, rc));
  const std::string manifest = (dir / "ablation_manifest.csv").string();
  const auto rows = run_ablation(data, rc.architecture, rc.sswim, grid, manifest,
                                 thread_count(o, &rc), [](const AblationRow& r) {
                                   std::cerr << manifest_line(r) << "\n";
                                 });
  const std::string summary = summary_csv(summarize_ablation(rows, grid));
  write_file(dir / "ablation_summary.csv", summary);
  std::cout << summary;
  return kExitOk;
}

std::string histogram_csv(const SnnModel& m, Index bins = 10) {
  std::ostringstream os;
  os << std::setprecision(17) << "layer,quantity,bin_lo,bin_hi,count\n";
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    auto emit = [&](const char* name, const Eigen::VectorXd& v) {
      const double lo = v.minCoeff(), hi = v.maxCoeff();
      const double w = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
      std::vector<Index> c(static_cast<std::size_t>(bins), 0);
      for (Index i = 0; i < v.size(); ++i) {
        const Index b = std::min<Index>(bins - 1, static_cast<Index>((v(i) - lo) / w));
        ++c[static_cast<std::size_t>(b)];
      }
      for (Index b = 0; b < bins; ++b)
        os << l + 1 << "," << name << "," << lo + static_cast<double>(b) * w << ","
           << lo + static_cast<double>(b + 1) * w << "," << c[static_cast<std::size_t>(b)] << "\n";
    };
    emit("delay", layer.delay);
    emit("support", layer.support);
    if (layer.is_hidden()) emit("spike_cost", layer.spike_cost);
  }
  return os.str();
}

int cmd_inspect(const Options& o) {
  const SnnModel m = load_model(o.model);
  std::ostringstream os;
  os << std::setprecision(17)
     << "layer,kind,neuron,delay,support,bias,weight_norm,spike_cost,refractory_support,"
        "lambda,condition_bound\n";
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    for (Index i = 0; i < layer.width(); ++i) {
      os << l + 1 << "," << (layer.is_hidden() ? "hidden" : "output") << "," << i << ","
         << layer.delay(i) << "," << layer.support(i) << "," << layer.bias(i) << ","
         << layer.weights.row(i).norm() << ",";
      if (layer.is_hidden())
        os << layer.spike_cost(i) << "," << layer.refractory_support(i) << ",,";
      else if (m.training && static_cast<std::size_t>(i) < m.training->lambda.size())
        os << ",," << m.training->lambda[static_cast<std::size_t>(i)] << ","
           << m.training->condition_bound[static_cast<std::size_t>(i)];
      else
        os << ",,,";
      os << "\n";
    }
  }
  std::cout << os.str();
  std::string dir = o.out;
  if (dir.empty())
    if (const char* env = std::getenv("SSWIM_OUT_DIR"); env && *env) dir = env;
  if (!dir.empty()) {
    const fs::path p = prepare_dir(dir);
    const std::string stem = fs::path(o.model).stem().string();
    write_file(p / (stem + "_parameters.csv"), os.str());
    write_file(p / (stem + "_histograms.csv"), histogram_csv(m));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-free training of spiking forecasting networks"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "train one model per seed");
  train->add_option("-c,--config", o.config, "run configuration (JSON)")->required();
  train->add_option("-s,--seed", o.seeds, "seed(s), overriding the config");
  train->add_option("-t,--threads", o.threads, "worker threads (0 = all)");
  train->add_option("-o,--out", o.out, "output directory");

  auto* eval = app.add_subcommand("eval", "evaluate a saved model on a split");
  eval->add_option("-m,--model", o.model, "model file")->required();
  eval->add_option("-c,--config", o.config, "run configuration (JSON)")->required();
  eval->add_option("-s,--seed", o.seeds, "run seed selecting a per-seed synthetic series");
  eval->add_option("--split", o.split, "train, valid or test")->capture_default_str();
  eval->add_option("-t,--threads", o.threads, "worker threads (0 = all)");

  auto* ablate = app.add_subcommand("ablate", "run the ablation grid of a configuration");
  ablate->add_option("-c,--config", o.config, "run configuration (JSON)")->required();
  ablate->add_option("-s,--seed", o.seeds, "seed(s), overriding the grid");
  ablate->add_option("-t,--threads", o.threads, "worker threads (0 = all)");
  ablate->add_option("-o,--out", o.out, "output directory");

  auto* inspect = app.add_subcommand("inspect", "dump per-neuron parameters as CSV");
  inspect->add_option("-m,--model", o.model, "model file")->required();
  inspect->add_option("-o,--out", o.out, "also write parameter and histogram CSVs here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*ablate) return cmd_ablate(o);
    if (*inspect) return cmd_inspect(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
