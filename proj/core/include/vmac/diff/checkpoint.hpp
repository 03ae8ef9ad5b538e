#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vmac/diff/tensor.hpp"

namespace vmac::diff {

inline constexpr const char* kCheckpointFormat = "vmac-checkpoint-v1";

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;

// Serializes {name -> shape + float array} plus caller metadata under a
// versioned header. Doubles survive the JSON round trip exactly.
nlohmann::json checkpoint_to_json(const NamedParams& params, const nlohmann::json& meta);
void save_checkpoint(const std::string& path, const NamedParams& params,
                     const nlohmann::json& meta);

nlohmann::json load_checkpoint_json(const std::string& path);
// Copies stored values into the given tensors. Names and shapes must match
// exactly; mismatches are rejected with both signatures in the message.
void load_checkpoint_params(const nlohmann::json& ckpt, const NamedParams& params);

}  // namespace vmac::diff
