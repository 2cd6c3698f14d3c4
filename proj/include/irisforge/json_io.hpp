#pragma once

#include <json.hpp>

#include "irisforge/models.hpp"

namespace irisforge {

using json = nlohmann::json;

void to_json(json& j, const NetConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const json& j, NetConfig& c);

}  // namespace irisforge

#include "irisforge/synthesis.hpp"
#include "irisforge/training.hpp"

namespace irisforge {

void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);

void to_json(json& j, const ClassifierConfig& c);
void from_json(const json& j, ClassifierConfig& c);
void to_json(json& j, const GenerationConfig& c);
void from_json(const json& j, GenerationConfig& c);

}  // namespace irisforge
