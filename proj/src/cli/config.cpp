#include "cli/config.hpp"

#include <fstream>
#include <set>

#include "common/errors.hpp"

namespace vitalattn {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& path) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + path + key + "'");
}

template <typename T>
T get_or(const json& obj, const std::string& key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + path + key + "' has the wrong type");
  }
}

void require_range(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
  reject_unknown_keys(doc,
                      {"data", "preprocess", "model", "models", "pretrain", "train",
                       "logistic_train", "lstm_train", "explain", "fidelity", "case_study",
                       "seed"},
                      "");
  ExperimentConfig cfg;
  cfg.seed = get_or<uint64_t>(doc, "seed", "", 7);

  if (!doc.contains("data")) throw ConfigError("missing required key 'data'");
  {
    const json& data = doc.at("data");
    reject_unknown_keys(data, {"source", "n", "positive_fraction", "missing_fraction", "seed",
                               "path"},
                        "data.");
    const std::string source = get_or<std::string>(data, "source", "data.", "synth");
    if (source == "synth") {
      cfg.data.source = DataSpec::Source::Synth;
      cfg.data.synth.n = get_or<int64_t>(data, "n", "data.", 600);
      cfg.data.synth.positive_fraction = get_or<double>(data, "positive_fraction", "data.", 0.5);
      cfg.data.synth.missing_fraction = get_or<double>(data, "missing_fraction", "data.", 0.0);
      cfg.data.synth.seed = get_or<uint64_t>(data, "seed", "data.", cfg.seed);
      require_range(cfg.data.synth.n >= 10, "data.n must be >= 10");
      require_range(cfg.data.synth.positive_fraction > 0.0 && cfg.data.synth.positive_fraction < 1.0,
                    "data.positive_fraction must lie in (0,1)");
      require_range(cfg.data.synth.missing_fraction >= 0.0 && cfg.data.synth.missing_fraction < 1.0,
                    "data.missing_fraction must lie in [0,1)");
    } else if (source == "csv") {
      cfg.data.source = DataSpec::Source::Csv;
      if (!data.contains("path")) throw ConfigError("data.path is required for source 'csv'");
      cfg.data.csv_path = data.at("path").get<std::string>();
    } else {
      throw ConfigError("data.source must be 'synth' or 'csv'");
    }
  }

  if (doc.contains("preprocess")) {
    const json& pp = doc.at("preprocess");
    reject_unknown_keys(pp, {"mice_rounds", "undersample", "per_fold"}, "preprocess.");
    cfg.mice_rounds = get_or<int>(pp, "mice_rounds", "preprocess.", 10);
    cfg.undersample = get_or<bool>(pp, "undersample", "preprocess.", true);
    cfg.per_fold_preprocessing = get_or<bool>(pp, "per_fold", "preprocess.", true);
    require_range(cfg.mice_rounds >= 1, "preprocess.mice_rounds must be >= 1");
  }

  if (doc.contains("model")) {
    const json& m = doc.at("model");
    reject_unknown_keys(m,
                        {"dim", "blocks", "heads", "ffn_mult", "full_attention",
                         "fusion_full_self_attention", "lstm_hidden"},
                        "model.");
    cfg.attention_model.encoder.dim = get_or<int64_t>(m, "dim", "model.", 32);
    cfg.attention_model.encoder.blocks = get_or<int64_t>(m, "blocks", "model.", 2);
    cfg.attention_model.encoder.heads = get_or<int64_t>(m, "heads", "model.", 4);
    cfg.attention_model.encoder.ffn_mult = get_or<int64_t>(m, "ffn_mult", "model.", 2);
    cfg.attention_model.encoder.full_attention = get_or<bool>(m, "full_attention", "model.", false);
    cfg.attention_model.fusion_full_self_attention =
        get_or<bool>(m, "fusion_full_self_attention", "model.", false);
    cfg.lstm_model.hidden = get_or<int64_t>(m, "lstm_hidden", "model.", 32);
    require_range(cfg.attention_model.encoder.dim >= 2, "model.dim must be >= 2");
    require_range(cfg.attention_model.encoder.blocks >= 1, "model.blocks must be >= 1");
    require_range(cfg.attention_model.encoder.heads >= 1 &&
                      cfg.attention_model.encoder.dim % cfg.attention_model.encoder.heads == 0,
                  "model.dim must be divisible by model.heads");
    require_range(cfg.lstm_model.hidden >= 1, "model.lstm_hidden must be >= 1");
  }

  if (doc.contains("models")) {
    cfg.models.clear();
    for (const auto& name : doc.at("models")) {
      try {
        cfg.models.push_back(model_kind_from_name(name.get<std::string>()));
      } catch (const json::exception&) {
        throw ConfigError("models entries must be strings");
      }
    }
    require_range(!cfg.models.empty(), "models must name at least one model");
  }

  if (doc.contains("pretrain")) {
    const json& p = doc.at("pretrain");
    reject_unknown_keys(p, {"epochs", "batch_size", "learning_rate"}, "pretrain.");
    cfg.pretrain.epochs = get_or<int>(p, "epochs", "pretrain.", 30);
    cfg.pretrain.batch_size = get_or<int>(p, "batch_size", "pretrain.", 32);
    cfg.pretrain.learning_rate = get_or<double>(p, "learning_rate", "pretrain.", 1e-3);
    require_range(cfg.pretrain.epochs >= 1 && cfg.pretrain.batch_size >= 1 &&
                      cfg.pretrain.learning_rate > 0,
                  "pretrain budget must be positive");
  }

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    reject_unknown_keys(t, {"epochs", "batch_size", "learning_rate", "folds",
                            "fine_tune_encoder"},
                        "train.");
    cfg.train.epochs = get_or<int>(t, "epochs", "train.", 50);
    cfg.train.batch_size = get_or<int>(t, "batch_size", "train.", 32);
    cfg.train.learning_rate = get_or<double>(t, "learning_rate", "train.", 1e-3);
    cfg.train.folds = get_or<int>(t, "folds", "train.", 10);
    cfg.train.fine_tune_encoder = get_or<bool>(t, "fine_tune_encoder", "train.", true);
    require_range(cfg.train.folds >= 2, "train.folds must be >= 2");
    require_range(cfg.train.epochs >= 1 && cfg.train.batch_size >= 1 &&
                      cfg.train.learning_rate > 0,
                  "train budget must be positive");
  }

  if (doc.contains("logistic_train")) {
    const json& t = doc.at("logistic_train");
    reject_unknown_keys(t, {"epochs", "learning_rate"}, "logistic_train.");
    cfg.logistic_train.epochs = get_or<int>(t, "epochs", "logistic_train.", 300);
    cfg.logistic_train.learning_rate = get_or<double>(t, "learning_rate", "logistic_train.", 0.05);
  }

  if (doc.contains("lstm_train")) {
    const json& t = doc.at("lstm_train");
    reject_unknown_keys(t, {"epochs", "batch_size", "learning_rate"}, "lstm_train.");
    cfg.lstm_train.epochs = get_or<int>(t, "epochs", "lstm_train.", 30);
    cfg.lstm_train.batch_size = get_or<int>(t, "batch_size", "lstm_train.", 32);
    cfg.lstm_train.learning_rate = get_or<double>(t, "learning_rate", "lstm_train.", 1e-3);
  }

  if (doc.contains("explain")) {
    const json& e = doc.at("explain");
    reject_unknown_keys(e, {"methods", "shap_samples"}, "explain.");
    if (e.contains("methods")) {
      cfg.explain_methods.clear();
      for (const auto& m : e.at("methods")) {
        const std::string name = m.get<std::string>();
        if (name != "attention" && name != "weight" && name != "shap" && name != "random")
          throw ConfigError("explain.methods entries must be attention|weight|shap|random");
        cfg.explain_methods.push_back(name);
      }
    }
    cfg.shap_samples = get_or<int>(e, "shap_samples", "explain.", 4096);
    require_range(cfg.shap_samples >= 2 * kTokens + 2,
                  "explain.shap_samples must be >= 2*364+2");
  }

  if (doc.contains("fidelity")) {
    const json& f = doc.at("fidelity");
    reject_unknown_keys(f, {"enabled", "fractions", "draws", "substitution"}, "fidelity.");
    cfg.fidelity_enabled = get_or<bool>(f, "enabled", "fidelity.", true);
    if (f.contains("fractions"))
      cfg.fidelity_fractions = f.at("fractions").get<std::vector<double>>();
    for (double fr : cfg.fidelity_fractions)
      require_range(fr > 0.0 && fr <= 1.0, "fidelity.fractions must lie in (0,1]");
    cfg.fidelity_draws = get_or<int>(f, "draws", "fidelity.", 10);
    require_range(cfg.fidelity_draws >= 1, "fidelity.draws must be >= 1");
    const std::string sub = get_or<std::string>(f, "substitution", "fidelity.", "uniform");
    if (sub == "uniform")
      cfg.fidelity_substitution = SubstitutionMode::Uniform;
    else if (sub == "permutation")
      cfg.fidelity_substitution = SubstitutionMode::Permutation;
    else
      throw ConfigError("fidelity.substitution must be 'uniform' or 'permutation'");
  }

  if (doc.contains("case_study")) {
    const json& c = doc.at("case_study");
    reject_unknown_keys(c, {"enabled", "stays", "first_positive", "top_k"}, "case_study.");
    cfg.case_study_enabled = get_or<bool>(c, "enabled", "case_study.", true);
    cfg.case_study_first_positive = get_or<bool>(c, "first_positive", "case_study.", false);
    if (c.contains("stays"))
      cfg.case_study_stays = c.at("stays").get<std::vector<std::string>>();
    cfg.case_study_top_k = get_or<int>(c, "top_k", "case_study.", 20);
    require_range(cfg.case_study_top_k >= 1 && cfg.case_study_top_k <= kTokens,
                  "case_study.top_k must lie in [1,364]");
    if (cfg.case_study_enabled && !cfg.case_study_first_positive && cfg.case_study_stays.empty())
      throw ConfigError("case_study needs 'stays' or 'first_positive'");
  }

  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_experiment_config(doc);
}

std::string config_hash(const json& doc) {
  const std::string text = doc.dump();
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

nlohmann::json artifact_stamp(const std::string& hash, uint64_t seed) {
  json stamp;
  stamp["tool_version"] = kToolVersion;
  stamp["config_hash"] = hash;
  stamp["master_seed"] = seed;
  return stamp;
}

}  // namespace vitalattn
