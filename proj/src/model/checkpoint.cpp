#include "model/checkpoint.hpp"

#include <fstream>

#include "common/errors.hpp"

namespace vitalattn {

using nlohmann::json;

void save_checkpoint(const std::string& path, const json& header,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
  json doc = header;
  doc["schema_version"] = kCheckpointSchemaVersion;
  json param_list = json::array();
  for (const auto& [name, tensor] : params) {
    json p;
    p["name"] = name;
    p["shape"] = tensor.shape();
    p["values"] = std::vector<double>(tensor.values().begin(), tensor.values().end());
    param_list.push_back(std::move(p));
  }
  doc["params"] = std::move(param_list);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << doc.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != kCheckpointSchemaVersion)
    throw DataError("checkpoint " + path + " has an unsupported schema version");
  Checkpoint ckpt;
  for (const auto& p : doc.at("params")) {
    Shape shape = p.at("shape").get<Shape>();
    std::vector<double> values = p.at("values").get<std::vector<double>>();
    ckpt.params.emplace_back(p.at("name").get<std::string>(),
                             Tensor::from_values(std::move(shape), std::move(values)));
  }
  doc.erase("params");
  ckpt.header = std::move(doc);
  return ckpt;
}

std::string checkpoint_kind(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  return doc.value("kind", "");
}

namespace {

json encoder_config_json(const EncoderConfig& cfg) {
  json j;
  j["dim"] = cfg.dim;
  j["blocks"] = cfg.blocks;
  j["heads"] = cfg.heads;
  j["ffn_mult"] = cfg.ffn_mult;
  j["full_attention"] = cfg.full_attention;
  return j;
}

EncoderConfig encoder_config_from(const json& j) {
  EncoderConfig cfg;
  cfg.dim = j.at("dim").get<int64_t>();
  cfg.blocks = j.at("blocks").get<int64_t>();
  cfg.heads = j.at("heads").get<int64_t>();
  cfg.ffn_mult = j.at("ffn_mult").get<int64_t>();
  cfg.full_attention = j.at("full_attention").get<bool>();
  return cfg;
}

void expect_kind(const Checkpoint& ckpt, const std::string& kind, const std::string& path) {
  if (ckpt.header.value("kind", "") != kind)
    throw DataError("checkpoint " + path + " has kind '" + ckpt.header.value("kind", "") +
                    "', expected '" + kind + "'");
}

}  // namespace

void save_pretrained_vitals(const std::string& path, const VitalEncoder& encoder,
                            const VitalDecoder& decoder, uint64_t seed, const json* stamp) {
  json header;
  header["kind"] = "pretrained_vitals";
  header["config"] = encoder_config_json(encoder.config());
  header["seed"] = seed;
  if (stamp) header["artifact"] = *stamp;
  auto params = encoder.params().entries();
  const auto& dec = decoder.params().entries();
  params.insert(params.end(), dec.begin(), dec.end());
  save_checkpoint(path, header, params);
}

PretrainedVitals load_pretrained_vitals(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  expect_kind(ckpt, "pretrained_vitals", path);
  PretrainedVitals out;
  out.config = encoder_config_from(ckpt.header.at("config"));
  out.seed = ckpt.header.at("seed").get<uint64_t>();
  out.encoder = std::make_unique<VitalEncoder>(out.config, out.seed);
  out.decoder = std::make_unique<VitalDecoder>(out.config.dim, out.seed);
  out.encoder->params().load_values(ckpt.params);
  out.decoder->params().load_values(ckpt.params);
  return out;
}

void save_mortality_model(const std::string& path, const MortalityModel& model,
                          const json* stamp) {
  json header;
  if (stamp) header["artifact"] = *stamp;
  header["kind"] = "attention";
  header["config"] = encoder_config_json(model.config().encoder);
  header["config"]["fusion_full_self_attention"] = model.config().fusion_full_self_attention;
  header["seed"] = model.seed();
  save_checkpoint(path, header, model.named_params());
}

std::unique_ptr<MortalityModel> load_mortality_model(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  expect_kind(ckpt, "attention", path);
  MortalityConfig cfg;
  cfg.encoder = encoder_config_from(ckpt.header.at("config"));
  cfg.fusion_full_self_attention =
      ckpt.header.at("config").at("fusion_full_self_attention").get<bool>();
  auto model = std::make_unique<MortalityModel>(cfg, ckpt.header.at("seed").get<uint64_t>());
  model->load_named_params(ckpt.params);
  return model;
}

void save_logistic_model(const std::string& path, const LogisticModel& model,
                         const json* stamp) {
  json header;
  if (stamp) header["artifact"] = *stamp;
  header["kind"] = "logistic";
  header["config"] = json{{"l2", model.l2_strength()}};
  header["seed"] = model.seed();
  save_checkpoint(path, header, model.params().entries());
}

std::unique_ptr<LogisticModel> load_logistic_model(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  expect_kind(ckpt, "logistic", path);
  auto model = std::make_unique<LogisticModel>(ckpt.header.at("seed").get<uint64_t>(),
                                               ckpt.header.at("config").at("l2").get<double>());
  model->params().load_values(ckpt.params);
  return model;
}

void save_lstm_model(const std::string& path, const LstmFusionModel& model,
                     const json* stamp) {
  json header;
  if (stamp) header["artifact"] = *stamp;
  header["kind"] = "lstm_fusion";
  header["config"] = json{{"hidden", model.config().hidden}};
  header["seed"] = model.seed();
  save_checkpoint(path, header, model.params().entries());
}

std::unique_ptr<LstmFusionModel> load_lstm_model(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  expect_kind(ckpt, "lstm_fusion", path);
  LstmConfig cfg;
  cfg.hidden = ckpt.header.at("config").at("hidden").get<int64_t>();
  auto model =
      std::make_unique<LstmFusionModel>(cfg, ckpt.header.at("seed").get<uint64_t>());
  model->params().load_values(ckpt.params);
  return model;
}

}  // namespace vitalattn
