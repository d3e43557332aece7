#pragma once

// JSON/CSV serialization for every result type, with versioned schema tags.
// Summaries carry the seed and a provenance list of (module, operation,
// config) triples; the generated_at field is the only non-deterministic
// entry and sits at the top level so comparisons can drop it.

#include "tke/estimates.hpp"
#include "tke/functionals.hpp"
#include "tke/ma_solver.hpp"
#include "tke/model.hpp"
#include "tke/spectral.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace tke::io {

using nlohmann::json;

json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& j);

json to_json(const BasicFunction& f);
BasicFunction function_from_json(const json& j, const TransverseModel& model);

json to_json(const ContinuityFamily& fam);
ContinuityFamily family_from_json(const json& j);

json to_json(const FunctionalReport& rep);
json to_json(const EstimateReport& rep);
json to_json(const GreenBound& gb);
json to_json(const RescaledMetric& rm);
json to_json(const SpectrumResult& spec);
json to_json(const DetectorResult& det);
json to_json(const UniquenessReport& rep);

struct Provenance {
  std::string module;
  std::string operation;
  json config;
};

// Wraps a payload with schema/seed/provenance/generated_at and writes it.
void write_summary(const std::string& path, const std::string& schema, uint64_t seed,
                   const std::vector<Provenance>& provenance, json payload);

json read_json_file(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Applies the output-directory override (TKE_OUT_DIR) to relative paths.
std::string resolve_output_path(const std::string& path);

}  // namespace tke::io
