#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "model/baselines.hpp"
#include "model/encoder.hpp"
#include "model/mortality.hpp"

namespace vitalattn {

// Self-describing single-file JSON checkpoints: a header with
// {schema_version, kind, config, seed} followed by named parameter arrays with
// shapes. save(load(x)) is byte-identical to x.
inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor>> params;
};

void save_checkpoint(const std::string& path, const nlohmann::json& header,
                     const std::vector<std::pair<std::string, Tensor>>& params);
Checkpoint load_checkpoint(const std::string& path);

struct PretrainedVitals {
  EncoderConfig config;
  uint64_t seed = 0;
  std::unique_ptr<VitalEncoder> encoder;
  std::unique_ptr<VitalDecoder> decoder;
};

// The optional `stamp` is copied into the header verbatim (the experiment
// runner uses it for {tool_version, config_hash, master_seed}).
void save_pretrained_vitals(const std::string& path, const VitalEncoder& encoder,
                            const VitalDecoder& decoder, uint64_t seed,
                            const nlohmann::json* stamp = nullptr);
PretrainedVitals load_pretrained_vitals(const std::string& path);

void save_mortality_model(const std::string& path, const MortalityModel& model,
                          const nlohmann::json* stamp = nullptr);
std::unique_ptr<MortalityModel> load_mortality_model(const std::string& path);

void save_logistic_model(const std::string& path, const LogisticModel& model,
                         const nlohmann::json* stamp = nullptr);
std::unique_ptr<LogisticModel> load_logistic_model(const std::string& path);

void save_lstm_model(const std::string& path, const LstmFusionModel& model,
                     const nlohmann::json* stamp = nullptr);
std::unique_ptr<LstmFusionModel> load_lstm_model(const std::string& path);

// Reads a checkpoint's "kind" field without materializing a model.
std::string checkpoint_kind(const std::string& path);

}  // namespace vitalattn
