#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cli/case_study.hpp"
#include "cli/config.hpp"
#include "cli/experiment.hpp"
#include "common/errors.hpp"
#include "data/preprocess.hpp"
#include "data/synth.hpp"
#include "eval/fidelity.hpp"
#include "explain/attribution.hpp"
#include "explain/shap.hpp"
#include "model/checkpoint.hpp"
#include "train/kfold.hpp"
#include "train/trainer.hpp"

namespace {

using namespace vitalattn;
using nlohmann::json;

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

Cohort load_preprocessed(const std::string& path) {
  Cohort cohort = load_cohort_csv(path);
  assume_preprocessed(cohort);
  return cohort;
}

struct LoadedModel {
  std::string kind;
  std::unique_ptr<MortalityModel> attention;
  std::unique_ptr<LogisticModel> logistic;
  std::unique_ptr<LstmFusionModel> lstm;

  BatchScorer scorer() const {
    if (attention) return make_token_scorer(*attention);
    if (logistic) return make_token_scorer(*logistic);
    return make_token_scorer(*lstm);
  }
};

LoadedModel load_any_model(const std::string& path) {
  LoadedModel m;
  m.kind = checkpoint_kind(path);
  if (m.kind == "attention")
    m.attention = load_mortality_model(path);
  else if (m.kind == "logistic")
    m.logistic = load_logistic_model(path);
  else if (m.kind == "lstm_fusion")
    m.lstm = load_lstm_model(path);
  else
    throw DataError("checkpoint " + path + " has unsupported kind '" + m.kind + "'");
  return m;
}

std::array<double, kTokens> cohort_mean_tokens(const Cohort& cohort) {
  std::array<double, kTokens> mean{};
  for (const auto& rec : cohort.records)
    for (int t = 0; t < kTokens; ++t) mean[t] += rec.token(t);
  for (int t = 0; t < kTokens; ++t) mean[t] /= static_cast<double>(cohort.records.size());
  return mean;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vitalattn: attention-based mortality prediction workbench"};
  app.require_subcommand(1);

  try {
    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic cohort CSV");
    SynthSpec synth_spec;
    std::string synth_out, synth_gt;
    synth_cmd->add_option("--n", synth_spec.n, "record count")->default_val(600);
    synth_cmd->add_option("--pos-frac", synth_spec.positive_fraction, "positive fraction")
        ->default_val(0.5);
    synth_cmd->add_option("--seed", synth_spec.seed, "seed")->default_val(7);
    synth_cmd->add_option("--missing-frac", synth_spec.missing_fraction, "knockout probability")
        ->default_val(0.0);
    synth_cmd->add_option("--out", synth_out, "output CSV path")->required();
    synth_cmd->add_option("--ground-truth", synth_gt, "also write the planted-token JSON");
    synth_cmd->callback([&] {
      auto [cohort, truth] = synth_generate(synth_spec);
      save_cohort_csv(cohort, synth_out);
      if (!synth_gt.empty()) {
        json gt;
        gt["important_tokens"] = truth.important_tokens;
        gt["seed"] = truth.seed;
        write_json_file(synth_gt, gt);
      }
      std::printf("wrote %zu records to %s\n", cohort.records.size(), synth_out.c_str());
    });

    // ---- preprocess ----
    auto* prep_cmd =
        app.add_subcommand("preprocess", "impute, scale and undersample a cohort CSV");
    std::string prep_in, prep_out, prep_registry;
    int prep_rounds = 10;
    uint64_t prep_seed = 7;
    bool prep_no_undersample = false;
    prep_cmd->add_option("--in", prep_in, "input CSV")->required();
    prep_cmd->add_option("--out", prep_out, "output CSV")->required();
    prep_cmd->add_option("--mice-rounds", prep_rounds)->default_val(10);
    prep_cmd->add_option("--seed", prep_seed, "undersampling seed")->default_val(7);
    prep_cmd->add_flag("--no-undersample", prep_no_undersample, "skip class balancing");
    prep_cmd->add_option("--registry", prep_registry, "write the min-max registry JSON");
    prep_cmd->callback([&] {
      Cohort cohort = load_cohort_csv(prep_in);
      MiceImputer imputer(prep_rounds);
      cohort = imputer.fit_transform(cohort);
      MinMaxScaler scaler;
      cohort = scaler.fit_transform(cohort);
      if (!prep_no_undersample) cohort = undersample_balance(cohort, prep_seed);
      save_cohort_csv(cohort, prep_out);
      for (const auto& warning : scaler.registry().warnings)
        std::fprintf(stderr, "warning: %s\n", warning.c_str());
      if (!prep_registry.empty()) {
        json reg;
        reg["agg_min"] = scaler.registry().agg_min;
        reg["agg_max"] = scaler.registry().agg_max;
        reg["chan_min"] = scaler.registry().chan_min;
        reg["chan_max"] = scaler.registry().chan_max;
        reg["warnings"] = scaler.registry().warnings;
        write_json_file(prep_registry, reg);
      }
      std::printf("wrote %zu records to %s\n", cohort.records.size(), prep_out.c_str());
    });

    // ---- pretrain ----
    auto* pre_cmd = app.add_subcommand("pretrain", "stage-one self-supervised encoder training");
    std::string pre_cohort, pre_out, pre_curve;
    EncoderConfig pre_enc;
    PretrainConfig pre_cfg;
    pre_cmd->add_option("--cohort", pre_cohort, "preprocessed cohort CSV")->required();
    pre_cmd->add_option("--out", pre_out, "encoder checkpoint path")->required();
    pre_cmd->add_option("--curve", pre_curve, "loss curve JSONL path");
    pre_cmd->add_option("--dim", pre_enc.dim)->default_val(32);
    pre_cmd->add_option("--blocks", pre_enc.blocks)->default_val(2);
    pre_cmd->add_option("--heads", pre_enc.heads)->default_val(4);
    pre_cmd->add_option("--ffn-mult", pre_enc.ffn_mult)->default_val(2);
    pre_cmd->add_flag("--full-attention", pre_enc.full_attention);
    pre_cmd->add_option("--epochs", pre_cfg.epochs)->default_val(30);
    pre_cmd->add_option("--batch", pre_cfg.batch_size)->default_val(32);
    pre_cmd->add_option("--lr", pre_cfg.learning_rate)->default_val(1e-3);
    pre_cmd->add_option("--seed", pre_cfg.seed)->default_val(7);
    pre_cmd->callback([&] {
      Cohort cohort = load_preprocessed(pre_cohort);
      const auto windows = make_windows(cohort);
      VitalEncoder encoder(pre_enc, Rng::mix(pre_cfg.seed, 0xe2c));
      VitalDecoder decoder(pre_enc.dim, Rng::mix(pre_cfg.seed, 0xdec));
      const LossCurve curve = pretrain_stage1(encoder, decoder, windows, pre_cfg);
      save_pretrained_vitals(pre_out, encoder, decoder, pre_cfg.seed);
      if (!pre_curve.empty()) {
        std::string lines;
        for (size_t e = 0; e < curve.epoch_loss.size(); ++e)
          lines += json{{"epoch", e}, {"loss", curve.epoch_loss[e]}}.dump() + "\n";
        write_text_file(pre_curve, lines);
      }
      std::printf("pretrained on %zu windows; final loss %.6f\n", windows.size(),
                  curve.epoch_loss.back());
    });

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "stage-two / baseline supervised training");
    std::string train_cohort, train_out, train_encoder, train_kind = "attention",
                train_curve;
    TrainConfig train_cfg;
    LogisticTrainConfig train_log_cfg;
    LstmTrainConfig train_lstm_cfg;
    LstmConfig train_lstm_model;
    bool train_freeze = false;
    bool train_fusion_full = false;
    train_cmd->add_option("--cohort", train_cohort, "preprocessed cohort CSV")->required();
    train_cmd->add_option("--model-kind", train_kind, "attention|logistic|lstm_fusion")
        ->default_val("attention");
    train_cmd->add_option("--encoder", train_encoder, "stage-one checkpoint (attention only)");
    train_cmd->add_option("--out", train_out, "model checkpoint path")->required();
    train_cmd->add_option("--curve", train_curve, "loss curve JSONL path");
    train_cmd->add_option("--epochs", train_cfg.epochs)->default_val(50);
    train_cmd->add_option("--batch", train_cfg.batch_size)->default_val(32);
    train_cmd->add_option("--lr", train_cfg.learning_rate)->default_val(1e-3);
    train_cmd->add_option("--seed", train_cfg.seed)->default_val(7);
    train_cmd->add_flag("--freeze-encoder", train_freeze, "do not fine-tune the encoder");
    train_cmd->add_flag("--fusion-full-self-attention", train_fusion_full);
    train_cmd->add_option("--logistic-epochs", train_log_cfg.epochs)->default_val(300);
    train_cmd->add_option("--logistic-lr", train_log_cfg.learning_rate)->default_val(0.05);
    train_cmd->add_option("--lstm-hidden", train_lstm_model.hidden)->default_val(32);
    train_cmd->add_option("--lstm-epochs", train_lstm_cfg.epochs)->default_val(30);
    train_cmd->callback([&] {
      Cohort cohort = load_preprocessed(train_cohort);
      LossCurve curve;
      if (train_kind == "attention") {
        if (train_encoder.empty())
          throw ConfigError("--encoder (stage-one checkpoint) is required for attention");
        PretrainedVitals pre = load_pretrained_vitals(train_encoder);
        MortalityConfig cfg;
        cfg.encoder = pre.config;
        cfg.fusion_full_self_attention = train_fusion_full;
        MortalityModel model(cfg, train_cfg.seed);
        model.encoder().params().load_values(pre.encoder->params().entries());
        train_cfg.fine_tune_encoder = !train_freeze;
        curve = train_stage2(model, cohort, train_cfg);
        save_mortality_model(train_out, model);
      } else if (train_kind == "logistic") {
        LogisticModel model(train_cfg.seed);
        train_log_cfg.seed = train_cfg.seed;
        curve = train_logistic(model, cohort, train_log_cfg);
        save_logistic_model(train_out, model);
      } else if (train_kind == "lstm_fusion") {
        LstmFusionModel model(train_lstm_model, train_cfg.seed);
        train_lstm_cfg.seed = train_cfg.seed;
        curve = train_lstm(model, cohort, train_lstm_cfg);
        save_lstm_model(train_out, model);
      } else {
        throw ConfigError("unknown --model-kind '" + train_kind + "'");
      }
      if (!train_curve.empty()) {
        std::string lines;
        for (size_t e = 0; e < curve.epoch_loss.size(); ++e)
          lines += json{{"epoch", e}, {"loss", curve.epoch_loss[e]}}.dump() + "\n";
        write_text_file(train_curve, lines);
      }
      std::printf("trained %s; final loss %.6f\n", train_kind.c_str(), curve.epoch_loss.back());
    });

    // ---- evaluate ----
    auto* eval_cmd = app.add_subcommand("evaluate", "k-fold cross-validated AUROC/AUPRC");
    std::string eval_cohort, eval_out = "metrics.json", eval_models = "attention,logistic";
    CvOptions eval_opts;
    bool eval_undersample = false;
    bool eval_global = false;
    eval_cmd->add_option("--cohort", eval_cohort, "cohort CSV (raw or preprocessed)")->required();
    eval_cmd->add_option("--models", eval_models, "comma list of model kinds")
        ->default_val("attention,logistic");
    eval_cmd->add_option("--folds", eval_opts.stage2.folds)->default_val(10);
    eval_cmd->add_option("--seed", eval_opts.seed)->default_val(7);
    eval_cmd->add_option("--dim", eval_opts.attention_model.encoder.dim)->default_val(32);
    eval_cmd->add_option("--blocks", eval_opts.attention_model.encoder.blocks)->default_val(2);
    eval_cmd->add_option("--heads", eval_opts.attention_model.encoder.heads)->default_val(4);
    eval_cmd->add_option("--pre-epochs", eval_opts.pretrain.epochs)->default_val(30);
    eval_cmd->add_option("--epochs", eval_opts.stage2.epochs)->default_val(50);
    eval_cmd->add_option("--mice-rounds", eval_opts.mice_rounds)->default_val(10);
    eval_cmd->add_flag("--undersample", eval_undersample, "balance classes first");
    eval_cmd->add_flag("--global-preprocessing", eval_global,
                       "fit imputation/scaling once on the whole cohort");
    eval_cmd->add_option("--out", eval_out)->default_val("metrics.json");
    eval_cmd->callback([&] {
      Cohort cohort = load_cohort_csv(eval_cohort);
      eval_opts.per_fold_preprocessing = !eval_global;
      if (eval_global) {
        // canonical order: impute -> normalize -> undersample
        MiceImputer imputer(eval_opts.mice_rounds);
        MinMaxScaler scaler;
        cohort = scaler.fit_transform(imputer.fit_transform(cohort));
      }
      if (eval_undersample) cohort = undersample_balance(cohort, eval_opts.seed);
      std::vector<CvResult> results;
      std::stringstream models_in(eval_models);
      std::string name;
      while (std::getline(models_in, name, ','))
        results.push_back(run_cv(cohort, model_kind_from_name(name), eval_opts));
      json metrics;
      metrics["models"] = json::object();
      for (const auto& r : results) {
        json m;
        m["auroc_mean"] = r.auroc_mean;
        m["auroc_std"] = r.auroc_std;
        m["auprc_mean"] = r.auprc_mean;
        m["auprc_std"] = r.auprc_std;
        metrics["models"][model_kind_name(r.kind)] = std::move(m);
      }
      write_json_file(eval_out, metrics);
      std::printf("%s", render_metrics_table(results).c_str());
    });

    // ---- explain ----
    auto* explain_cmd = app.add_subcommand("explain", "per-token attribution for one stay");
    std::string ex_model, ex_cohort, ex_stay, ex_method = "attention", ex_out = "attribution.json";
    int ex_samples = 4096;
    uint64_t ex_seed = 7;
    explain_cmd->add_option("--model", ex_model, "model checkpoint")->required();
    explain_cmd->add_option("--cohort", ex_cohort, "preprocessed cohort CSV")->required();
    explain_cmd->add_option("--stay", ex_stay, "stay id (attention/shap)");
    explain_cmd->add_option("--method", ex_method, "attention|weight|shap")
        ->default_val("attention");
    explain_cmd->add_option("--shap-samples", ex_samples)->default_val(4096);
    explain_cmd->add_option("--seed", ex_seed)->default_val(7);
    explain_cmd->add_option("--out", ex_out)->default_val("attribution.json");
    explain_cmd->callback([&] {
      Cohort cohort = load_preprocessed(ex_cohort);
      LoadedModel model = load_any_model(ex_model);
      Attribution attribution;
      if (ex_method == "attention") {
        if (!model.attention) throw ConfigError("attention method needs an attention checkpoint");
        const PatientRecord* rec = cohort.find_stay(ex_stay);
        if (!rec) throw DataError("stay_id '" + ex_stay + "' not found");
        attribution = attention_importance(*model.attention, *rec);
      } else if (ex_method == "weight") {
        if (!model.logistic) throw ConfigError("weight method needs a logistic checkpoint");
        attribution = logistic_weight_importance(*model.logistic);
      } else if (ex_method == "shap") {
        const PatientRecord* rec = cohort.find_stay(ex_stay);
        if (!rec) throw DataError("stay_id '" + ex_stay + "' not found");
        ShapConfig cfg;
        cfg.n_samples = ex_samples;
        cfg.seed = ex_seed;
        const ShapResult result =
            kernel_shap(model.scorer(), record_tokens(*rec), cohort_mean_tokens(cohort), cfg);
        attribution.method = "shap";
        attribution.stay_id = ex_stay;
        attribution.scores = result.values;
      } else {
        throw ConfigError("unknown --method '" + ex_method + "'");
      }
      write_json_file(ex_out, attribution_to_json(attribution, cohort));
      std::printf("wrote %s\n", ex_out.c_str());
    });

    // ---- fidelity ----
    auto* fid_cmd = app.add_subcommand("fidelity", "perturbation-based faithfulness report");
    std::string f_model, f_cohort, f_method = "attention", f_direction = "both",
                f_out = "fidelity_report.json", f_table;
    std::vector<double> f_fractions = {0.05, 0.10, 0.20};
    int f_draws = 10;
    uint64_t f_seed = 7;
    int f_shap_samples = 4096;
    std::string f_substitution = "uniform";
    fid_cmd->add_option("--model", f_model, "model checkpoint")->required();
    fid_cmd->add_option("--cohort", f_cohort, "preprocessed cohort CSV")->required();
    fid_cmd->add_option("--method", f_method, "attention|weight|shap|random")
        ->default_val("attention");
    fid_cmd->add_option("--direction", f_direction, "plus|minus|both")->default_val("both");
    fid_cmd->add_option("--fractions", f_fractions, "masking fraction ladder")
        ->delimiter(',');
    fid_cmd->add_option("--draws", f_draws, "substitution draws per rung")->default_val(10);
    fid_cmd->add_option("--seed", f_seed)->default_val(7);
    fid_cmd->add_option("--substitution", f_substitution, "uniform|permutation")
        ->default_val("uniform");
    fid_cmd->add_option("--shap-samples", f_shap_samples)->default_val(4096);
    fid_cmd->add_option("--out", f_out)->default_val("fidelity_report.json");
    fid_cmd->add_option("--table", f_table, "also render the delta table");
    fid_cmd->callback([&] {
      Cohort cohort = load_preprocessed(f_cohort);
      LoadedModel model = load_any_model(f_model);
      const BatchScorer scorer = model.scorer();
      const int64_t n = static_cast<int64_t>(cohort.records.size());

      std::vector<std::array<double, kTokens>> per_record;
      bool global = false;
      if (f_method == "attention") {
        if (!model.attention) throw ConfigError("attention method needs an attention checkpoint");
        for (const auto& rec : cohort.records)
          per_record.push_back(attention_importance(*model.attention, rec).scores);
      } else if (f_method == "weight") {
        if (!model.logistic) throw ConfigError("weight method needs a logistic checkpoint");
        per_record.push_back(logistic_weight_importance(*model.logistic).scores);
        global = true;
      } else if (f_method == "shap") {
        const auto background = cohort_mean_tokens(cohort);
        for (int64_t i = 0; i < n; ++i) {
          ShapConfig cfg;
          cfg.n_samples = f_shap_samples;
          cfg.seed = Rng::mix(f_seed, 0x54a9, static_cast<uint64_t>(i));
          per_record.push_back(
              kernel_shap(scorer, record_tokens(cohort.records[i]), background, cfg).values);
        }
      } else if (f_method == "random") {
        for (int64_t i = 0; i < n; ++i) {
          Rng rng(Rng::mix(f_seed, 0x7a7d, static_cast<uint64_t>(i)));
          std::array<double, kTokens> scores{};
          for (auto& s : scores) s = rng.uniform();
          per_record.push_back(scores);
        }
      } else {
        throw ConfigError("unknown --method '" + f_method + "'");
      }
      const AttributionProvider provider = [&](int64_t i) {
        return global ? per_record[0] : per_record[i];
      };

      std::vector<FidelityReport> reports;
      for (FidelityDirection dir : {FidelityDirection::Plus, FidelityDirection::Minus}) {
        if (f_direction == "plus" && dir != FidelityDirection::Plus) continue;
        if (f_direction == "minus" && dir != FidelityDirection::Minus) continue;
        FidelityConfig cfg;
        cfg.direction = dir;
        cfg.fractions = f_fractions;
        cfg.draws = f_draws;
        cfg.seed = f_seed;
        cfg.substitution = f_substitution == "permutation" ? SubstitutionMode::Permutation
                                                           : SubstitutionMode::Uniform;
        reports.push_back(run_fidelity(scorer, cohort, provider, model.kind, f_method, cfg));
      }
      json doc;
      doc["reports"] = json::array();
      for (const auto& r : reports) doc["reports"].push_back(fidelity_report_to_json(r));
      write_json_file(f_out, doc);
      if (!f_table.empty()) write_text_file(f_table, render_fidelity_table(reports));
      std::printf("%s", render_fidelity_table(reports).c_str());
    });

    // ---- case-study ----
    auto* case_cmd = app.add_subcommand("case-study", "top-20 token export with figure panels");
    std::string c_model, c_cohort, c_stay, c_out;
    int c_top_k = 20;
    case_cmd->add_option("--model", c_model, "attention checkpoint")->required();
    case_cmd->add_option("--cohort", c_cohort, "preprocessed cohort CSV")->required();
    case_cmd->add_option("--stay", c_stay, "stay id")->required();
    case_cmd->add_option("--out", c_out, "output directory")->required();
    case_cmd->add_option("--top-k", c_top_k)->default_val(20);
    case_cmd->callback([&] {
      Cohort cohort = load_preprocessed(c_cohort);
      std::unique_ptr<MortalityModel> model = load_mortality_model(c_model);
      const CaseStudyExport e = build_case_study(*model, cohort, c_stay, c_top_k);
      for (const auto& path : write_case_study(e, c_out)) std::printf("wrote %s\n", path.c_str());
    });

    // ---- run ----
    auto* run_cmd = app.add_subcommand("run", "full config-driven experiment");
    std::string run_config, run_out;
    run_cmd->add_option("--config", run_config, "experiment config JSON")->required();
    run_cmd->add_option("--out", run_out, "output directory")->required();
    run_cmd->callback([&] {
      std::ifstream in(run_config);
      if (!in) throw ConfigError("cannot open config file: " + run_config);
      json doc;
      try {
        in >> doc;
      } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
      run_experiment(doc, run_out);
      std::printf("experiment complete: %s\n", run_out.c_str());
    });

    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
