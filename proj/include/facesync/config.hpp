#pragma once

// JSON conversions for every configuration struct. Parsing is strict: an
// unknown key is an error naming the key and the enclosing section, and
// absent keys keep their defaults.

#include <initializer_list>
#include <string>

#include "json.hpp"

namespace facesync {

using json = nlohmann::json;

struct ArchConfig;
struct SynthConfig;
struct OutlierPolicy;
struct PreprocessOptions;
struct TrainConfig;
struct StudyConfig;

/// Throws DataError when `j` is not an object or carries a key outside `allowed`.
void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section);

void to_json(json& j, const ArchConfig& c);
void from_json(const json& j, ArchConfig& c);
void to_json(json& j, const SynthConfig& c);
void from_json(const json& j, SynthConfig& c);
void to_json(json& j, const OutlierPolicy& c);
void from_json(const json& j, OutlierPolicy& c);
void to_json(json& j, const PreprocessOptions& c);
void from_json(const json& j, PreprocessOptions& c);
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);
void to_json(json& j, const StudyConfig& c);
void from_json(const json& j, StudyConfig& c);

}  // namespace facesync
