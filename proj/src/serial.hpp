#pragma once

// Internal JSON converters shared between translation units.

#include <json.hpp>

#include "emt/cyclegan.hpp"
#include "emt/geometry.hpp"
#include "emt/net.hpp"

namespace emt {

nlohmann::json mlp_to_json(const MlpParams& p);
MlpParams mlp_from_json(const nlohmann::json& j);

nlohmann::json bounds_to_json(const NormalizationBounds& b);
NormalizationBounds bounds_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const GanCheckpoint& ckpt);
GanCheckpoint checkpoint_from_json(const nlohmann::json& j);

}  // namespace emt
