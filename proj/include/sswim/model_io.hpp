// JSON (de)serialization of trained models. Doubles are written in shortest
// round-trip form, so save -> load reproduces every parameter exactly.
#pragma once

#include "sswim/srm_network.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace sswim {

namespace detail {

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

inline nlohmann::json kernel_json(KernelSpec k) {
  return {{"family", std::string(kernel_family_name(k.family))},
          {"rectification", std::string(rectification_name(k.rectification))}};
}

inline KernelSpec json_kernel(const nlohmann::json& j) {
  return {parse_kernel_family(j.at("family").get<std::string>()),
          parse_rectification(j.at("rectification").get<std::string>())};
}

}  // namespace detail

inline nlohmann::json model_to_json(const SnnModel& model) {
  model.validate();
  nlohmann::json j;
  j["format"] = "sswim-model";
  j["version"] = 1;
  j["input_dim"] = model.input_dim;
  j["output_dim"] = model.output_dim;
  j["grid"] = {{"dt", model.grid.dt},
               {"observation", model.grid.observation},
               {"horizon", model.grid.horizon}};
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& layer : model.layers) {
    nlohmann::json lj;
    lj["kind"] = layer.is_hidden() ? "hidden" : "output";
    lj["width"] = layer.width();
    lj["input_width"] = layer.input_width();
    lj["pspk"] = detail::kernel_json(layer.pspk);
    auto& w = lj["weights"] = nlohmann::json::array();
    for (Index i = 0; i < layer.width(); ++i)
      w.push_back(detail::vector_json(layer.weights.row(i).transpose()));
    lj["bias"] = detail::vector_json(layer.bias);
    lj["delay"] = detail::vector_json(layer.delay);
    lj["support"] = detail::vector_json(layer.support);
    if (layer.is_hidden()) {
      lj["rfk"] = detail::kernel_json(*layer.rfk);
      lj["spike_cost"] = detail::vector_json(layer.spike_cost);
      lj["refractory_support"] = detail::vector_json(layer.refractory_support);
    }
    layers.push_back(std::move(lj));
  }
  if (model.training) {
    j["training"] = {{"seed", model.training->seed},
                     {"lambda", model.training->lambda},
                     {"condition_bound", model.training->condition_bound}};
  }
  return j;
}

inline SnnModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "sswim-model")
      throw ArgumentError("not an sswim model file");
    if (j.at("version").get<int>() != 1)
      throw ArgumentError("unsupported model file version");
    SnnModel m;
    m.input_dim = j.at("input_dim").get<Index>();
    m.output_dim = j.at("output_dim").get<Index>();
    const auto& g = j.at("grid");
    m.grid.dt = g.at("dt").get<double>();
    m.grid.observation = g.at("observation").get<Index>();
    m.grid.horizon = g.at("horizon").get<Index>();
    for (const auto& lj : j.at("layers")) {
      LayerParams layer;
      const Index width = lj.at("width").get<Index>();
      const Index in_width = lj.at("input_width").get<Index>();
      layer.weights.resize(width, in_width);
      const auto& w = lj.at("weights");
      if (static_cast<Index>(w.size()) != width)
        throw ShapeError("weight row count does not match width");
      for (Index i = 0; i < width; ++i) {
        const Eigen::VectorXd row = detail::json_vector(w.at(static_cast<std::size_t>(i)));
        if (row.size() != in_width) throw ShapeError("weight row length mismatch");
        layer.weights.row(i) = row.transpose();
      }
      layer.pspk = detail::json_kernel(lj.at("pspk"));
      layer.bias = detail::json_vector(lj.at("bias"));
      layer.delay = detail::json_vector(lj.at("delay"));
      layer.support = detail::json_vector(lj.at("support"));
      const auto kind = lj.at("kind").get<std::string>();
      if (kind == "hidden") {
        layer.rfk = detail::json_kernel(lj.at("rfk"));
        layer.spike_cost = detail::json_vector(lj.at("spike_cost"));
        layer.refractory_support = detail::json_vector(lj.at("refractory_support"));
      } else if (kind != "output") {
        throw ArgumentError("unknown layer kind '" + kind + "'");
      }
      m.layers.push_back(std::move(layer));
    }
    if (j.contains("training")) {
      TrainingInfo info;
      const auto& t = j.at("training");
      info.seed = t.at("seed").get<std::uint64_t>();
      info.lambda = t.at("lambda").get<std::vector<double>>();
      info.condition_bound = t.at("condition_bound").get<std::vector<double>>();
      m.training = std::move(info);
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed model file: ") + e.what());
  }
}

inline std::string serialize_model(const SnnModel& model) {
  return model_to_json(model).dump(1) + "\n";
}

inline SnnModel deserialize_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ArgumentError(std::string("malformed model file: ") + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const SnnModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << serialize_model(model);
  if (!out) throw Error("failed writing '" + path + "'");
}

inline SnnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace sswim
