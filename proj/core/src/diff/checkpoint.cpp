#include "vmac/diff/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace vmac::diff {

using nlohmann::json;

json checkpoint_to_json(const NamedParams& params, const json& meta) {
  json ckpt;
  ckpt["format"] = kCheckpointFormat;
  ckpt["meta"] = meta;
  json p = json::object();
  for (const auto& [name, tensor] : params) {
    p[name] = {{"shape", tensor->shape}, {"data", tensor->data}};
  }
  ckpt["params"] = std::move(p);
  return ckpt;
}

void save_checkpoint(const std::string& path, const NamedParams& params, const json& meta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
  out << checkpoint_to_json(params, meta) << "\n";
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

json load_checkpoint_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  json ckpt = json::parse(in);
  if (!ckpt.contains("format") || ckpt["format"] != kCheckpointFormat) {
    throw std::runtime_error("unsupported checkpoint format in " + path);
  }
  return ckpt;
}

void load_checkpoint_params(const json& ckpt, const NamedParams& params) {
  const auto& stored = ckpt.at("params");
  for (const auto& [name, tensor] : params) {
    if (!stored.contains(name)) {
      throw std::runtime_error("checkpoint is missing parameter '" + name + "'");
    }
    const auto& entry = stored.at(name);
    const Shape shape = entry.at("shape").get<Shape>();
    if (shape != tensor->shape) {
      throw std::runtime_error("checkpoint parameter '" + name + "' has shape " +
                               shape_str(shape) + " but the model expects " +
                               shape_str(tensor->shape));
    }
    tensor->data = entry.at("data").get<std::vector<double>>();
    tensor->zero_grad();
  }
}

}  // namespace vmac::diff
