#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "common/errors.hpp"
#include "core/rng.hpp"
#include "data/synth.hpp"
#include "eval/fidelity.hpp"
#include "eval/metrics.hpp"

using namespace vitalattn;

namespace {

// O(n^2) pairwise oracle: concordant pairs plus half the ties.
double auroc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        num += 1.0;
      else if (scores[i] == scores[j])
        num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

// Step-sum oracle: recount precision from scratch at every positive rank.
double auprc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  const int64_t n = static_cast<int64_t>(scores.size());
  std::vector<int64_t> order(n);
  for (int64_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return scores[a] > scores[b]; });
  int64_t n_pos = 0;
  for (int y : labels) n_pos += y == 1;
  double ap = 0.0;
  for (int64_t k = 0; k < n; ++k) {
    if (labels[order[k]] != 1) continue;
    int64_t tp = 0;
    for (int64_t r = 0; r <= k; ++r) tp += labels[order[r]] == 1;  // recount
    ap += static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  return ap / static_cast<double>(n_pos);
}

struct RandomInstance {
  std::vector<double> scores;
  std::vector<int> labels;
};

RandomInstance random_instance(Rng& rng) {
  const int64_t n = 2 + static_cast<int64_t>(rng.below(49));
  RandomInstance inst;
  bool has_pos = false, has_neg = false;
  for (int64_t i = 0; i < n; ++i) {
    // coarse grid of score values to force plenty of ties
    inst.scores.push_back(static_cast<double>(rng.below(10)) / 10.0);
    const int y = rng.below(2) == 1 ? 1 : 0;
    inst.labels.push_back(y);
    (y == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos) inst.labels[0] = 1;
  if (!has_neg) inst.labels[inst.labels.size() - 1] = 0;
  return inst;
}

// Additive bounded scorer over a planted token set.
BatchScorer planted_mean_scorer(const std::vector<int>& planted) {
  return [planted](const std::vector<std::array<double, kTokens>>& inputs) {
    std::vector<double> out;
    for (const auto& x : inputs) {
      double acc = 0.0;
      for (int t : planted) acc += x[t];
      out.push_back(acc / static_cast<double>(planted.size()));
    }
    return out;
  };
}

}  // namespace

TEST_CASE("auroc: hand cases") {
  CHECK(auroc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(auroc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}) == 0.75);
  CHECK(auroc({0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(auroc({0.1, 0.2}, {1, 1}), ContractError);
}

TEST_CASE("auroc equals the pairwise oracle exactly on 200 random instances") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const RandomInstance inst = random_instance(rng);
    CHECK(auroc(inst.scores, inst.labels) == auroc_oracle(inst.scores, inst.labels));
  }
}

TEST_CASE("auprc: hand cases") {
  CHECK(auprc({0.9, 0.8, 0.7}, {1, 0, 1}) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(auprc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(auprc({0.3, 0.6}, {1, 1}) == 1.0);  // all positive
  CHECK_THROWS_AS(auprc({0.1, 0.2}, {0, 0}), ContractError);
}

TEST_CASE("auprc equals the step-sum oracle exactly on 200 random instances") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const RandomInstance inst = random_instance(rng);
    CHECK(auprc(inst.scores, inst.labels) == auprc_oracle(inst.scores, inst.labels));
  }
}

TEST_CASE("mean true-label probability") {
  CHECK(mean_true_label_probability({0.8, 0.3}, {1, 0}) == doctest::Approx(0.75));
}

TEST_CASE("fidelity: single-token scorer — plus hurts, minus is exactly zero") {
  // token 5 carries the whole signal
  Cohort cohort = Cohort::with_default_names("fid");
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    PatientRecord rec;
    rec.stay_id = "r" + std::to_string(i);
    rec.label = i % 2;
    for (int t = 0; t < kTokens; ++t) rec.set_token(t, rng.uniform());
    rec.set_token(5, rec.label == 1 ? 0.9 : 0.1);
    cohort.records.push_back(std::move(rec));
  }
  const BatchScorer scorer = [](const std::vector<std::array<double, kTokens>>& inputs) {
    std::vector<double> out;
    for (const auto& x : inputs) out.push_back(x[5]);
    return out;
  };
  std::array<double, kTokens> oracle{};
  oracle[5] = 1.0;
  const AttributionProvider provider = [&oracle](int64_t) { return oracle; };

  FidelityConfig cfg;
  cfg.fractions = {0.001};  // k = ceil(0.001 * 364) = 1
  cfg.draws = 5;
  cfg.seed = 11;

  cfg.direction = FidelityDirection::Plus;
  const FidelityReport plus = run_fidelity(scorer, cohort, provider, "toy", "oracle", cfg);
  REQUIRE(plus.rungs.size() == 1);
  CHECK(plus.rungs[0].k == 1);
  CHECK(plus.rungs[0].prob_point.delta < 0.0);

  cfg.direction = FidelityDirection::Minus;
  const FidelityReport minus = run_fidelity(scorer, cohort, provider, "toy", "oracle", cfg);
  CHECK(minus.rungs[0].prob_point.delta == 0.0);  // token 5 never lands in the bottom-1
  CHECK(minus.rungs[0].auroc_point.delta == 0.0);
  CHECK(minus.rungs[0].auprc_point.delta == 0.0);
}

TEST_CASE("fidelity: same seed and draw count reproduce the report bit for bit") {
  auto [cohort, truth] = synth_generate({.n = 30, .positive_fraction = 0.5, .seed = 13});
  const BatchScorer scorer = planted_mean_scorer(truth.important_tokens);
  std::array<double, kTokens> oracle{};
  for (int t : truth.important_tokens) oracle[t] = 1.0;
  const AttributionProvider provider = [&oracle](int64_t) { return oracle; };

  FidelityConfig cfg;
  cfg.direction = FidelityDirection::Plus;
  cfg.fractions = {0.05, 0.1};
  cfg.draws = 4;
  cfg.seed = 17;
  const FidelityReport a = run_fidelity(scorer, cohort, provider, "toy", "oracle", cfg);
  const FidelityReport b = run_fidelity(scorer, cohort, provider, "toy", "oracle", cfg);
  CHECK(fidelity_report_to_json(a).dump() == fidelity_report_to_json(b).dump());
}

TEST_CASE("fidelity: |plus delta| grows with the fraction on an additive scorer") {
  auto [cohort, truth] = synth_generate({.n = 40, .positive_fraction = 0.5, .seed = 19});
  const BatchScorer scorer = planted_mean_scorer(truth.important_tokens);
  std::array<double, kTokens> oracle{};
  for (int t : truth.important_tokens) oracle[t] = 1.0;
  const AttributionProvider provider = [&oracle](int64_t) { return oracle; };

  FidelityConfig cfg;
  cfg.direction = FidelityDirection::Plus;
  cfg.fractions = {0.01, 0.02, 0.04, 0.08};
  cfg.draws = 20;
  cfg.seed = 23;
  const FidelityReport report = run_fidelity(scorer, cohort, provider, "toy", "oracle", cfg);

  int inversions = 0;
  for (size_t r = 1; r < report.rungs.size(); ++r)
    if (std::abs(report.rungs[r].prob_point.delta) <
        std::abs(report.rungs[r - 1].prob_point.delta) - 1e-12)
      ++inversions;
  CHECK(inversions <= 1);
}

TEST_CASE("fidelity: ground-truth attribution is more plus-asymmetric than minus") {
  auto [cohort, truth] = synth_generate({.n = 40, .positive_fraction = 0.5, .seed = 29});
  const BatchScorer scorer = planted_mean_scorer(truth.important_tokens);
  std::array<double, kTokens> oracle{};
  for (int t : truth.important_tokens) oracle[t] = 1.0;
  const AttributionProvider provider = [&oracle](int64_t) { return oracle; };

  FidelityConfig cfg;
  cfg.fractions = {0.1};
  cfg.draws = 10;
  cfg.seed = 31;
  cfg.direction = FidelityDirection::Plus;
  const FidelityReport plus = run_fidelity(scorer, cohort, provider, "toy", "oracle", cfg);
  cfg.direction = FidelityDirection::Minus;
  const FidelityReport minus = run_fidelity(scorer, cohort, provider, "toy", "oracle", cfg);
  CHECK(std::abs(plus.rungs[0].auroc_point.delta) > std::abs(minus.rungs[0].auroc_point.delta));
}

TEST_CASE("fidelity: permutation substitution draws values from other records") {
  auto [cohort, truth] = synth_generate({.n = 20, .positive_fraction = 0.5, .seed = 37});
  const BatchScorer scorer = planted_mean_scorer(truth.important_tokens);
  std::array<double, kTokens> oracle{};
  for (int t : truth.important_tokens) oracle[t] = 1.0;
  const AttributionProvider provider = [&oracle](int64_t) { return oracle; };

  FidelityConfig cfg;
  cfg.direction = FidelityDirection::Plus;
  cfg.fractions = {0.05};
  cfg.draws = 3;
  cfg.seed = 41;
  cfg.substitution = SubstitutionMode::Permutation;
  const FidelityReport report = run_fidelity(scorer, cohort, provider, "toy", "oracle", cfg);
  CHECK(std::isfinite(report.rungs[0].auroc_point.delta));
  CHECK(report.substitution == SubstitutionMode::Permutation);
}

TEST_CASE("fidelity: configuration errors") {
  auto [cohort, truth] = synth_generate({.n = 12, .positive_fraction = 0.5, .seed = 43});
  const BatchScorer scorer = planted_mean_scorer({5});
  const AttributionProvider provider = [](int64_t) { return std::array<double, kTokens>{}; };
  FidelityConfig cfg;
  cfg.fractions = {1.5};
  CHECK_THROWS_AS(run_fidelity(scorer, cohort, provider, "m", "x", cfg), ConfigError);
  cfg.fractions = {0.1};
  cfg.draws = 0;
  CHECK_THROWS_AS(run_fidelity(scorer, cohort, provider, "m", "x", cfg), ConfigError);
}

TEST_CASE("fidelity tables: layout, signs, and zero rendering") {
  FidelityReport plus;
  plus.model_tag = "attention";
  plus.method_tag = "atten";
  plus.direction = FidelityDirection::Plus;
  FidelityRung rung;
  rung.fraction = 0.1;
  rung.k = 37;
  rung.auroc_point = {"auroc", 0.9, 0.54, -0.36};
  rung.auprc_point = {"auprc", 0.9, 0.81, -0.09};
  rung.prob_point = {"mean_prob", 0.8, 0.55, -0.25};
  plus.rungs.push_back(rung);

  FidelityReport minus = plus;
  minus.direction = FidelityDirection::Minus;
  minus.rungs[0].auroc_point = {"auroc", 0.9, 0.9, 0.0};
  minus.rungs[0].auprc_point = {"auprc", 0.9, 0.9, 0.0};
  minus.rungs[0].prob_point = {"mean_prob", 0.8, 0.8, 0.0};

  const std::string table = render_fidelity_table({plus, minus});
  CHECK(table.find("attention/atten") != std::string::npos);
  CHECK(table.find("Fidelity+") != std::string::npos);
  CHECK(table.find("Fidelity-") != std::string::npos);
  CHECK(table.find("-0.36") != std::string::npos);  // drop renders with a leading minus
  CHECK(table.find("0.00") != std::string::npos);

  const std::string csv = render_fidelity_csv({plus, minus});
  CHECK(csv.find("direction,metric,attention/atten") != std::string::npos);
  CHECK(csv.find("fidelity_plus,auroc,-0.36") != std::string::npos);
  CHECK(csv.find("fidelity_minus,auroc,0.00") != std::string::npos);
}
