#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli/case_study.hpp"
#include "cli/config.hpp"
#include "cli/experiment.hpp"
#include "cli/svg.hpp"
#include "common/errors.hpp"
#include "data/preprocess.hpp"
#include "data/synth.hpp"
#include "model/mortality.hpp"
#include "train/trainer.hpp"

using namespace vitalattn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "vitalattn_cli_test";

int run_tool(const std::string& args) {
  const std::string cmd = std::string(VITALATTN_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json tiny_experiment_config(int n, uint64_t seed) {
  json cfg;
  cfg["data"] = {{"source", "synth"}, {"n", n}, {"positive_fraction", 0.5}, {"seed", seed}};
  cfg["model"] = {{"dim", 4}, {"blocks", 1}, {"heads", 1}};
  cfg["pretrain"] = {{"epochs", 1}, {"batch_size", 64}};
  cfg["train"] = {{"epochs", 2}, {"folds", 2}};
  cfg["logistic_train"] = {{"epochs", 50}};
  cfg["fidelity"] = {{"fractions", {0.1}}, {"draws", 2}};
  cfg["seed"] = seed;
  return cfg;
}

// One trained tiny model shared by the case-study tests.
struct CaseStudyFixture {
  Cohort cohort = Cohort::with_default_names("");
  std::unique_ptr<MortalityModel> model;

  CaseStudyFixture() {
    auto [raw, truth] = synth_generate({.n = 24, .positive_fraction = 0.5, .seed = 91});
    MiceImputer imputer(2);
    MinMaxScaler scaler;
    cohort = scaler.fit_transform(imputer.fit_transform(raw));
    MortalityConfig cfg;
    cfg.encoder = {.dim = 4, .blocks = 1, .heads = 1, .ffn_mult = 2};
    model = std::make_unique<MortalityModel>(cfg, 93);
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.seed = 95;
    train_stage2(*model, cohort, tcfg);
  }
};

CaseStudyFixture& case_fixture() {
  static CaseStudyFixture fixture;
  return fixture;
}

}  // namespace

TEST_CASE("experiment config: strict validation before any compute") {
  json good = tiny_experiment_config(40, 7);
  CHECK_NOTHROW(parse_experiment_config(good));

  json fold1 = good;
  fold1["train"]["folds"] = 1;
  CHECK_THROWS_WITH_AS(parse_experiment_config(fold1), doctest::Contains("folds"), ConfigError);

  json unknown = good;
  unknown["trian"] = json::object();
  CHECK_THROWS_WITH_AS(parse_experiment_config(unknown), doctest::Contains("trian"), ConfigError);

  json nested_unknown = good;
  nested_unknown["train"]["learning_rte"] = 0.1;
  CHECK_THROWS_WITH_AS(parse_experiment_config(nested_unknown),
                       doctest::Contains("train.learning_rte"), ConfigError);

  json no_data = good;
  no_data.erase("data");
  CHECK_THROWS_AS(parse_experiment_config(no_data), ConfigError);

  json bad_frac = good;
  bad_frac["fidelity"]["fractions"] = {0.0};
  CHECK_THROWS_AS(parse_experiment_config(bad_frac), ConfigError);
}

TEST_CASE("config hash is stable across formatting and sensitive to content") {
  json a = tiny_experiment_config(40, 7);
  json b = json::parse(a.dump(4));  // different formatting, same content
  CHECK(config_hash(a) == config_hash(b));
  json c = a;
  c["seed"] = 8;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("run_experiment: artifacts, manifest, and byte-identical reruns") {
  const fs::path dir_a = kWork / "run_a";
  const fs::path dir_b = kWork / "run_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  const json cfg = tiny_experiment_config(40, 11);
  run_experiment(cfg, dir_a.string());

  for (const char* name : {"metrics.json", "fidelity.json", "metrics_table.txt",
                           "fidelity_table.txt", "fidelity_table.csv", "fold_results.jsonl",
                           "loss_curves.jsonl", "attributions.jsonl", "ground_truth.json",
                           "MANIFEST.json"})
    CHECK(fs::exists(dir_a / name));

  const json manifest = json::parse(slurp(dir_a / "MANIFEST.json"));
  CHECK(manifest.at("status") == "ok");
  CHECK(manifest.at("artifact").at("tool_version") == kToolVersion);
  CHECK(manifest.at("artifact").at("config_hash") == config_hash(cfg));

  const json metrics = json::parse(slurp(dir_a / "metrics.json"));
  CHECK(metrics.at("models").contains("attention"));
  CHECK(metrics.at("models").contains("logistic"));
  CHECK(metrics.at("models").at("attention").at("folds").size() == 2);

  // identical config, fresh directory: byte-identical artifacts
  run_experiment(cfg, dir_b.string());
  CHECK(slurp(dir_a / "metrics.json") == slurp(dir_b / "metrics.json"));
  CHECK(slurp(dir_a / "fidelity.json") == slurp(dir_b / "fidelity.json"));
  CHECK(slurp(dir_a / "attributions.jsonl") == slurp(dir_b / "attributions.jsonl"));

  // ground truth JSON schema
  const json gt = json::parse(slurp(dir_a / "ground_truth.json"));
  CHECK(gt.at("important_tokens").is_array());
  CHECK(gt.at("seed") == 11);
}

TEST_CASE("run_experiment: lockfile blocks concurrent use of an output directory") {
  const fs::path dir = kWork / "locked";
  fs::create_directories(dir);
  std::ofstream(dir / ".lock") << "";
  CHECK_THROWS_AS(run_experiment(tiny_experiment_config(40, 3), dir.string()), ContractError);
  fs::remove(dir / ".lock");
}

TEST_CASE("run_experiment: a failing stage leaves a manifest naming it") {
  const fs::path dir = kWork / "failing";
  fs::remove_all(dir);
  json cfg = tiny_experiment_config(40, 5);
  cfg["case_study"] = {{"enabled", true}, {"stays", {"no-such-stay"}}};
  CHECK_THROWS_AS(run_experiment(cfg, dir.string()), DataError);
  const json manifest = json::parse(slurp(dir / "MANIFEST.json"));
  CHECK(manifest.at("status") == "failed");
  CHECK(manifest.at("failed_stage") == "case_study");
  CHECK(fs::exists(dir / "metrics.json"));  // partial artifacts retained
}

TEST_CASE("case study: exactly top_k tokens, grouped channels, json round trip") {
  auto& fixture = case_fixture();
  const std::string stay = fixture.cohort.records[1].stay_id;
  const CaseStudyExport e = build_case_study(*fixture.model, fixture.cohort, stay, 20);

  CHECK(e.stay_id == stay);
  CHECK(e.top_tokens.size() == 20);

  // vital tokens of one channel share a panel; flagged hours match top tokens
  size_t vital_in_top = 0;
  for (const auto& t : e.top_tokens) vital_in_top += t.token_id < kVitalTokens ? 1 : 0;
  size_t flagged_total = 0;
  for (const auto& p : e.vital_panels) flagged_total += p.flagged_hours.size();
  CHECK(flagged_total == vital_in_top);
  CHECK(e.agg_panels.size() == 20 - vital_in_top);

  // scores arrive in rank order
  for (size_t i = 1; i < e.top_tokens.size(); ++i)
    CHECK(e.top_tokens[i - 1].score >= e.top_tokens[i].score);

  const json j = case_study_to_json(e);
  const CaseStudyExport back = case_study_from_json(j);
  CHECK(back == e);

  CHECK_THROWS_AS(build_case_study(*fixture.model, fixture.cohort, "missing-stay", 20),
                  DataError);
}

TEST_CASE("case study: flagged hour markers sit on the patient polyline") {
  auto& fixture = case_fixture();
  const std::string stay = fixture.cohort.records[0].stay_id;
  const CaseStudyExport e = build_case_study(*fixture.model, fixture.cohort, stay, 20);

  const fs::path dir = kWork / "case_svg";
  fs::remove_all(dir);
  write_case_study(e, dir.string());
  CHECK(fs::exists(dir / "case_study.json"));

  for (const auto& panel : e.vital_panels) {
    char name[64];
    std::snprintf(name, sizeof(name), "vital_channel_%d.svg", panel.channel);
    const std::string svg = slurp(dir / name);
    const PanelGeometry geom;
    for (int hour : panel.flagged_hours) {
      // the red marker is emitted at the polyline's coordinate for that hour
      const SvgPoint p = hour_value_point(geom, hour, panel.patient_values[hour - 1]);
      char marker[128];
      std::snprintf(marker, sizeof(marker), "<circle cx=\"%.2f\" cy=\"%.2f\"", p.x, p.y);
      CHECK(svg.find(marker) != std::string::npos);
      char vertex[64];
      std::snprintf(vertex, sizeof(vertex), "%.2f,%.2f", p.x, p.y);
      CHECK(svg.find(vertex) != std::string::npos);
    }
  }
}

TEST_CASE("cli binary: synth, preprocess, evaluate, explain, and exit codes") {
  fs::create_directories(kWork);
  const std::string cohort_csv = (kWork / "cohort.csv").string();
  const std::string prep_csv = (kWork / "prep.csv").string();
  const std::string gt_json = (kWork / "gt.json").string();

  CHECK(run_tool("synth --n 44 --pos-frac 0.5 --seed 5 --missing-frac 0.02 --out " + cohort_csv +
                 " --ground-truth " + gt_json) == 0);
  CHECK(fs::exists(cohort_csv));
  const json gt = json::parse(slurp(gt_json));
  CHECK(gt.at("important_tokens").size() == 28);

  CHECK(run_tool("preprocess --in " + cohort_csv + " --mice-rounds 2 --seed 5 --out " +
                 prep_csv) == 0);
  Cohort prep = load_cohort_csv(prep_csv);
  CHECK(prep.count_label(0) == prep.count_label(1));
  CHECK_NOTHROW(assume_preprocessed(prep));

  // evaluate: logistic two-fold on the preprocessed file
  const std::string metrics = (kWork / "m.json").string();
  CHECK(run_tool("evaluate --cohort " + prep_csv +
                 " --models logistic --folds 2 --seed 7 --out " + metrics) == 0);
  CHECK(json::parse(slurp(metrics)).at("models").contains("logistic"));

  // train logistic, then weight-based explain + fidelity
  const std::string logistic_ckpt = (kWork / "logistic.ckpt.json").string();
  CHECK(run_tool("train --cohort " + prep_csv + " --model-kind logistic --logistic-epochs 50" +
                 " --seed 3 --out " + logistic_ckpt) == 0);
  const std::string attribution = (kWork / "attr.json").string();
  CHECK(run_tool("explain --model " + logistic_ckpt + " --cohort " + prep_csv +
                 " --method weight --out " + attribution) == 0);
  const json attr = json::parse(slurp(attribution));
  CHECK(attr.at("scores").size() == 364);
  CHECK(attr.at("method") == "weight");

  const std::string fid = (kWork / "fid.json").string();
  CHECK(run_tool("fidelity --model " + logistic_ckpt + " --cohort " + prep_csv +
                 " --method weight --fractions 0.1 --draws 2 --seed 3 --out " + fid) == 0);
  CHECK(json::parse(slurp(fid)).at("reports").size() == 2);  // plus and minus

  // exit codes: 2 for config problems, 3 for data problems
  CHECK(run_tool("explain --model " + logistic_ckpt + " --cohort " + prep_csv +
                 " --method nonsense") == 2);
  CHECK(run_tool("explain --model " + logistic_ckpt + " --cohort " + prep_csv +
                 " --method shap --stay missing-stay --shap-samples 1024") == 3);
  CHECK(run_tool("evaluate --cohort /does/not/exist.csv --models logistic") == 3);
  CHECK(run_tool("synth --n 44") == 2);  // missing required --out
}

TEST_CASE("cli binary: pretrain, train, case-study flow") {
  fs::create_directories(kWork);
  const std::string cohort_csv = (kWork / "flow.csv").string();
  const std::string prep_csv = (kWork / "flow_prep.csv").string();
  const std::string enc = (kWork / "enc.ckpt.json").string();
  const std::string model = (kWork / "att.ckpt.json").string();
  const std::string case_dir = (kWork / "case_out").string();

  CHECK(run_tool("synth --n 24 --pos-frac 0.5 --seed 13 --out " + cohort_csv) == 0);
  CHECK(run_tool("preprocess --in " + cohort_csv + " --mice-rounds 2 --seed 13 --out " +
                 prep_csv) == 0);
  CHECK(run_tool("pretrain --cohort " + prep_csv +
                 " --dim 4 --blocks 1 --heads 1 --epochs 1 --batch 64 --seed 17 --out " + enc) ==
        0);
  CHECK(run_tool("train --cohort " + prep_csv + " --model-kind attention --encoder " + enc +
                 " --epochs 2 --seed 19 --out " + model) == 0);

  const Cohort prep = load_cohort_csv(prep_csv);
  std::string positive_stay;
  for (const auto& rec : prep.records)
    if (rec.label == 1) {
      positive_stay = rec.stay_id;
      break;
    }
  REQUIRE_FALSE(positive_stay.empty());

  CHECK(run_tool("case-study --model " + model + " --cohort " + prep_csv + " --stay " +
                 positive_stay + " --out " + case_dir) == 0);
  CHECK(fs::exists(fs::path(case_dir) / "case_study.json"));
  const json case_json = json::parse(slurp(fs::path(case_dir) / "case_study.json"));
  CHECK(case_json.at("top_tokens").size() == 20);

  CHECK(run_tool("case-study --model " + model + " --cohort " + prep_csv +
                 " --stay nope --out " + case_dir) == 3);
}

TEST_CASE("cli binary: run subcommand end to end with exit-code mapping") {
  fs::create_directories(kWork);
  const std::string config_path = (kWork / "exp.json").string();
  const std::string out_dir = (kWork / "run_cli").string();
  fs::remove_all(out_dir);
  {
    std::ofstream out(config_path);
    out << tiny_experiment_config(40, 21).dump(2) << "\n";
  }
  CHECK(run_tool("run --config " + config_path + " --out " + out_dir) == 0);
  CHECK(fs::exists(fs::path(out_dir) / "metrics.json"));

  // invalid config: exit 2 before compute
  const std::string bad_path = (kWork / "bad.json").string();
  {
    json bad = tiny_experiment_config(40, 21);
    bad["train"]["folds"] = 1;
    std::ofstream out(bad_path);
    out << bad.dump() << "\n";
  }
  const std::string out2 = (kWork / "run_bad").string();
  fs::remove_all(out2);
  CHECK(run_tool("run --config " + bad_path + " --out " + out2) == 2);
  CHECK_FALSE(fs::exists(fs::path(out2) / "metrics.json"));

  {
    std::ofstream out(bad_path);
    out << "{not json";
  }
  CHECK(run_tool("run --config " + bad_path + " --out " + out2) == 2);
}
