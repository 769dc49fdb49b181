#include "cli/experiment.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli/case_study.hpp"
#include "common/errors.hpp"
#include "data/preprocess.hpp"
#include "eval/metrics.hpp"
#include "explain/attribution.hpp"
#include "explain/shap.hpp"
#include "model/checkpoint.hpp"
#include "train/kfold.hpp"

namespace vitalattn {

namespace fs = std::filesystem;
using nlohmann::json;

void assume_preprocessed(Cohort& cohort) {
  for (const auto& rec : cohort.records) {
    for (int t = 0; t < kTokens; ++t) {
      const double v = rec.token(t);
      if (is_missing(v))
        throw DataError("record " + rec.stay_id + " has missing values; run `preprocess` first");
      if (v < 0.0 || v > 1.0)
        throw DataError("record " + rec.stay_id + " has values outside [0,1]; run `preprocess`");
    }
  }
  cohort.stage = CohortStage::Normalized;
}

namespace {

class DirectoryLock {
 public:
  explicit DirectoryLock(const std::string& dir) : path_((fs::path(dir) / ".lock").string()) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw ContractError("output directory is locked by another experiment (" + path_ +
                          " exists; remove it if stale)");
    ::close(fd);
  }
  ~DirectoryLock() { ::unlink(path_.c_str()); }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::string path_;
};

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

void write_json_file(const std::string& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

std::string stamp_comment(const json& stamp) {
  std::ostringstream os;
  os << "# vitalattn " << stamp.at("tool_version").get<std::string>()
     << " config=" << stamp.at("config_hash").get<std::string>()
     << " seed=" << stamp.at("master_seed").get<uint64_t>() << "\n";
  return os.str();
}

struct MethodAttributions {
  // per-record scores; global methods broadcast a single array
  std::vector<std::array<double, kTokens>> per_record;
  bool global = false;
};

AttributionProvider provider_for(const MethodAttributions& attr) {
  return [&attr](int64_t i) { return attr.global ? attr.per_record[0] : attr.per_record[i]; };
}

bool method_applies(const std::string& method, ModelKind kind) {
  if (method == "attention") return kind == ModelKind::Attention;
  if (method == "weight") return kind == ModelKind::Logistic;
  return method == "shap" || method == "random";  // any model
}

}  // namespace

std::string render_metrics_table(const std::vector<CvResult>& results) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-14s%-22s%-22s\n", "model", "AUROC", "AUPRC");
  os << buf;
  for (const auto& r : results) {
    char auroc_s[32], auprc_s[32];
    std::snprintf(auroc_s, sizeof(auroc_s), "%.4f +/- %.4f", r.auroc_mean, r.auroc_std);
    std::snprintf(auprc_s, sizeof(auprc_s), "%.4f +/- %.4f", r.auprc_mean, r.auprc_std);
    std::snprintf(buf, sizeof(buf), "%-14s%-22s%-22s\n", model_kind_name(r.kind).c_str(), auroc_s,
                  auprc_s);
    os << buf;
  }
  return os.str();
}

void run_experiment(const json& config_doc, const std::string& out_dir) {
  const ExperimentConfig cfg = parse_experiment_config(config_doc);  // before any work
  const std::string hash = config_hash(config_doc);
  const json stamp = artifact_stamp(hash, cfg.seed);

  fs::create_directories(out_dir);
  DirectoryLock lock(out_dir);
  const auto artifact_path = [&](const std::string& name) {
    return (fs::path(out_dir) / name).string();
  };

  json manifest;
  manifest["artifact"] = stamp;
  manifest["artifacts"] = json::array();
  manifest["stages"] = json::array();
  std::string stage = "data";
  const auto note_artifact = [&](const std::string& path) {
    manifest["artifacts"].push_back(fs::path(path).filename().string());
  };

  try {
    // ---- data ----
    Cohort cohort = Cohort::with_default_names("");
    if (cfg.data.source == DataSpec::Source::Synth) {
      auto [synth_cohort, truth] = synth_generate(cfg.data.synth);
      cohort = std::move(synth_cohort);
      json gt;
      gt["important_tokens"] = truth.important_tokens;
      gt["seed"] = truth.seed;
      write_json_file(artifact_path("ground_truth.json"), gt);
      note_artifact("ground_truth.json");
    } else {
      cohort = load_cohort_csv(cfg.data.csv_path);
    }
    manifest["stages"].push_back(stage);

    // ---- preprocess ----
    stage = "preprocess";
    Cohort cv_cohort = Cohort::with_default_names("");
    Cohort final_cohort = Cohort::with_default_names("");
    {
      MiceImputer imputer(cfg.mice_rounds);
      MinMaxScaler scaler;
      const uint64_t balance_seed = Rng::mix(cfg.seed, 0xba1a);
      if (cfg.per_fold_preprocessing) {
        // balance up front (labels only), refit imputation/scaling inside folds
        if (cfg.undersample) cohort = undersample_balance(cohort, balance_seed);
        cv_cohort = cohort;
        final_cohort = scaler.fit_transform(imputer.fit_transform(cohort));
      } else {
        // canonical global order: impute -> normalize -> undersample
        Cohort processed = scaler.fit_transform(imputer.fit_transform(cohort));
        if (cfg.undersample) processed = undersample_balance(processed, balance_seed);
        cv_cohort = processed;
        final_cohort = processed;
      }
    }
    manifest["stages"].push_back(stage);

    // ---- cross-validation ----
    stage = "cv";
    CvOptions cv_opts;
    cv_opts.seed = Rng::mix(cfg.seed, 0xcf01d);
    cv_opts.per_fold_preprocessing = cfg.per_fold_preprocessing;
    cv_opts.mice_rounds = cfg.mice_rounds;
    cv_opts.attention_model = cfg.attention_model;
    cv_opts.lstm_model = cfg.lstm_model;
    cv_opts.pretrain = cfg.pretrain;
    cv_opts.stage2 = cfg.train;
    cv_opts.logistic = cfg.logistic_train;
    cv_opts.lstm = cfg.lstm_train;

    std::vector<CvResult> cv_results;
    for (ModelKind kind : cfg.models) cv_results.push_back(run_cv(cv_cohort, kind, cv_opts));

    {
      json metrics;
      metrics["artifact"] = stamp;
      metrics["models"] = json::object();
      std::ostringstream folds_out;
      folds_out << artifact_stamp(hash, cfg.seed).dump() << "\n";
      for (const auto& r : cv_results) {
        json m;
        m["auroc_mean"] = r.auroc_mean;
        m["auroc_std"] = r.auroc_std;
        m["auprc_mean"] = r.auprc_mean;
        m["auprc_std"] = r.auprc_std;
        m["folds"] = json::array();
        for (const auto& f : r.folds) {
          m["folds"].push_back({{"fold", f.fold}, {"auroc", f.auroc}, {"auprc", f.auprc}});
          json line;
          line["model"] = model_kind_name(r.kind);
          line["fold"] = f.fold;
          line["auroc"] = f.auroc;
          line["auprc"] = f.auprc;
          line["stay_ids"] = f.stay_ids;
          line["probabilities"] = f.probabilities;
          line["labels"] = f.labels;
          folds_out << line.dump() << "\n";
        }
        metrics["models"][model_kind_name(r.kind)] = std::move(m);
      }
      write_json_file(artifact_path("metrics.json"), metrics);
      note_artifact("metrics.json");
      write_text(artifact_path("fold_results.jsonl"), folds_out.str());
      note_artifact("fold_results.jsonl");
      write_text(artifact_path("metrics_table.txt"),
                 stamp_comment(stamp) + render_metrics_table(cv_results));
      note_artifact("metrics_table.txt");
    }
    manifest["stages"].push_back(stage);

    // ---- final models on the full preprocessed cohort ----
    stage = "final_models";
    std::unique_ptr<MortalityModel> attention_model;
    std::unique_ptr<LogisticModel> logistic_model;
    std::unique_ptr<LstmFusionModel> lstm_model;
    {
      std::ostringstream curves;
      curves << artifact_stamp(hash, cfg.seed).dump() << "\n";
      const auto curve_lines = [&curves](const std::string& model, const std::string& phase,
                                         const LossCurve& curve) {
        for (size_t e = 0; e < curve.epoch_loss.size(); ++e) {
          json line;
          line["model"] = model;
          line["phase"] = phase;
          line["epoch"] = e;
          line["loss"] = curve.epoch_loss[e];
          curves << line.dump() << "\n";
        }
      };
      for (ModelKind kind : cfg.models) {
        const uint64_t model_seed = Rng::mix(cfg.seed, 0xf17a1, static_cast<uint64_t>(kind));
        switch (kind) {
          case ModelKind::Attention: {
            const auto windows = make_windows(final_cohort);
            VitalEncoder encoder(cfg.attention_model.encoder, Rng::mix(model_seed, 0xe2c));
            VitalDecoder decoder(cfg.attention_model.encoder.dim, Rng::mix(model_seed, 0xdec));
            PretrainConfig pre_cfg = cfg.pretrain;
            pre_cfg.seed = Rng::mix(model_seed, 0x97e);
            curve_lines("attention", "pretrain",
                        pretrain_stage1(encoder, decoder, windows, pre_cfg));
            save_pretrained_vitals(artifact_path("encoder.ckpt.json"), encoder, decoder,
                                   pre_cfg.seed, &stamp);
            note_artifact("encoder.ckpt.json");

            attention_model = std::make_unique<MortalityModel>(cfg.attention_model, model_seed);
            attention_model->encoder().params().load_values(encoder.params().entries());
            TrainConfig s2 = cfg.train;
            s2.seed = Rng::mix(model_seed, 0x5743);
            curve_lines("attention", "train", train_stage2(*attention_model, final_cohort, s2));
            save_mortality_model(artifact_path("attention.ckpt.json"), *attention_model,
                                 &stamp);
            note_artifact("attention.ckpt.json");
            break;
          }
          case ModelKind::Logistic: {
            logistic_model = std::make_unique<LogisticModel>(model_seed);
            LogisticTrainConfig lcfg = cfg.logistic_train;
            lcfg.seed = Rng::mix(model_seed, 0x1052);
            curve_lines("logistic", "train", train_logistic(*logistic_model, final_cohort, lcfg));
            save_logistic_model(artifact_path("logistic.ckpt.json"), *logistic_model, &stamp);
            note_artifact("logistic.ckpt.json");
            break;
          }
          case ModelKind::LstmFusion: {
            lstm_model = std::make_unique<LstmFusionModel>(cfg.lstm_model, model_seed);
            LstmTrainConfig lcfg = cfg.lstm_train;
            lcfg.seed = Rng::mix(model_seed, 0x15b4);
            curve_lines("lstm_fusion", "train", train_lstm(*lstm_model, final_cohort, lcfg));
            save_lstm_model(artifact_path("lstm_fusion.ckpt.json"), *lstm_model, &stamp);
            note_artifact("lstm_fusion.ckpt.json");
            break;
          }
        }
      }
      write_text(artifact_path("loss_curves.jsonl"), curves.str());
      note_artifact("loss_curves.jsonl");
    }
    manifest["stages"].push_back(stage);

    // ---- attributions ----
    stage = "explain";
    const int64_t n_records = static_cast<int64_t>(final_cohort.records.size());
    std::map<std::pair<std::string, std::string>, MethodAttributions> attributions;
    const auto scorer_for = [&](ModelKind kind) -> BatchScorer {
      switch (kind) {
        case ModelKind::Attention:
          return make_token_scorer(*attention_model);
        case ModelKind::Logistic:
          return make_token_scorer(*logistic_model);
        case ModelKind::LstmFusion:
          return make_token_scorer(*lstm_model);
      }
      throw ContractError("unreachable model kind");
    };
    {
      std::array<double, kTokens> background{};
      for (const auto& rec : final_cohort.records)
        for (int t = 0; t < kTokens; ++t) background[t] += rec.token(t);
      for (int t = 0; t < kTokens; ++t) background[t] /= static_cast<double>(n_records);

      std::ostringstream attr_out;
      attr_out << artifact_stamp(hash, cfg.seed).dump() << "\n";
      for (ModelKind kind : cfg.models) {
        const std::string model_name = model_kind_name(kind);
        for (const std::string& method : cfg.explain_methods) {
          if (!method_applies(method, kind)) continue;
          MethodAttributions attr;
          if (method == "attention") {
            for (const auto& rec : final_cohort.records)
              attr.per_record.push_back(attention_importance(*attention_model, rec).scores);
          } else if (method == "weight") {
            attr.global = true;
            attr.per_record.push_back(logistic_weight_importance(*logistic_model).scores);
          } else if (method == "shap") {
            const BatchScorer scorer = scorer_for(kind);
            ShapConfig shap_cfg;
            shap_cfg.n_samples = cfg.shap_samples;
            for (int64_t i = 0; i < n_records; ++i) {
              shap_cfg.seed = Rng::mix(cfg.seed, 0x54a9, static_cast<uint64_t>(i));
              attr.per_record.push_back(
                  kernel_shap(scorer, record_tokens(final_cohort.records[i]), background,
                              shap_cfg)
                      .values);
            }
          } else {  // random: seeded diagnostic ranking
            for (int64_t i = 0; i < n_records; ++i) {
              Rng rng(Rng::mix(cfg.seed, 0x7a7d, static_cast<uint64_t>(i)));
              std::array<double, kTokens> scores{};
              for (auto& s : scores) s = rng.uniform();
              attr.per_record.push_back(scores);
            }
          }
          for (size_t i = 0; i < attr.per_record.size(); ++i) {
            json line;
            line["model"] = model_name;
            line["method"] = method;
            if (!attr.global) line["stay_id"] = final_cohort.records[i].stay_id;
            line["scores"] = attr.per_record[i];
            attr_out << line.dump() << "\n";
          }
          attributions[{model_name, method}] = std::move(attr);
        }
      }
      write_text(artifact_path("attributions.jsonl"), attr_out.str());
      note_artifact("attributions.jsonl");
    }
    manifest["stages"].push_back(stage);

    // ---- fidelity ----
    stage = "fidelity";
    if (cfg.fidelity_enabled) {
      std::vector<FidelityReport> reports;
      for (ModelKind kind : cfg.models) {
        const std::string model_name = model_kind_name(kind);
        const BatchScorer scorer = scorer_for(kind);
        for (const std::string& method : cfg.explain_methods) {
          if (!method_applies(method, kind)) continue;
          const MethodAttributions& attr = attributions.at({model_name, method});
          for (FidelityDirection direction : {FidelityDirection::Plus, FidelityDirection::Minus}) {
            FidelityConfig fcfg;
            fcfg.direction = direction;
            fcfg.fractions = cfg.fidelity_fractions;
            fcfg.draws = cfg.fidelity_draws;
            fcfg.seed = Rng::mix(cfg.seed, 0xf1de);
            fcfg.substitution = cfg.fidelity_substitution;
            reports.push_back(run_fidelity(scorer, final_cohort, provider_for(attr), model_name,
                                           method, fcfg));
          }
        }
      }
      json fid;
      fid["artifact"] = stamp;
      fid["reports"] = json::array();
      for (const auto& r : reports) fid["reports"].push_back(fidelity_report_to_json(r));
      write_json_file(artifact_path("fidelity.json"), fid);
      note_artifact("fidelity.json");
      if (!reports.empty()) {
        write_text(artifact_path("fidelity_table.txt"),
                   stamp_comment(stamp) + render_fidelity_table(reports));
        note_artifact("fidelity_table.txt");
        write_text(artifact_path("fidelity_table.csv"),
                   stamp_comment(stamp) + render_fidelity_csv(reports));
        note_artifact("fidelity_table.csv");
      }
    }
    manifest["stages"].push_back(stage);

    // ---- case study ----
    stage = "case_study";
    if (cfg.case_study_enabled) {
      if (!attention_model)
        throw ConfigError("case_study requires the attention model in 'models'");
      std::vector<std::string> stays = cfg.case_study_stays;
      if (cfg.case_study_first_positive) {
        for (const auto& rec : final_cohort.records)
          if (rec.label == 1) {
            stays.push_back(rec.stay_id);
            break;
          }
      }
      for (const auto& stay : stays) {
        CaseStudyExport e =
            build_case_study(*attention_model, final_cohort, stay, cfg.case_study_top_k);
        const std::string dir = (fs::path(out_dir) / "case_study" / stay).string();
        for (const auto& path : write_case_study(e, dir))
          manifest["artifacts"].push_back(
              (fs::path("case_study") / stay / fs::path(path).filename()).string());
      }
    }
    manifest["stages"].push_back(stage);

    manifest["status"] = "ok";
    write_json_file(artifact_path("MANIFEST.json"), manifest);
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["failed_stage"] = stage;
    manifest["error"] = e.what();
    write_json_file(artifact_path("MANIFEST.json"), manifest);
    throw;
  }
}

}  // namespace vitalattn
