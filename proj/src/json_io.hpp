#pragma once

// nlohmann::json conversions for the configuration types. Private to the
// library; public entry points expose strings and files.

#include "fcdistill/converter.hpp"
#include "fcdistill/mpc.hpp"
#include "fcdistill/scenario.hpp"
#include "json.hpp"

namespace fcdistill {

void to_json(nlohmann::json& j, const ConverterParams& p);
void from_json(const nlohmann::json& j, ConverterParams& p);

void to_json(nlohmann::json& j, const MpcConfig& c);
void from_json(const nlohmann::json& j, MpcConfig& c);

void to_json(nlohmann::json& j, const OuterLoopConfig& o);
void from_json(const nlohmann::json& j, OuterLoopConfig& o);

void to_json(nlohmann::json& j, const ScenarioConfig& c);
void from_json(const nlohmann::json& j, ScenarioConfig& c);

void to_json(nlohmann::json& j, const RandomizationRanges& r);
void from_json(const nlohmann::json& j, RandomizationRanges& r);

}  // namespace fcdistill
