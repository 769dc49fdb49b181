#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "common/errors.hpp"
#include "data/synth.hpp"
#include "explain/attribution.hpp"
#include "explain/shap.hpp"
#include "model/baselines.hpp"
#include "model/mortality.hpp"

using namespace vitalattn;

namespace {

std::array<double, kTokens> zeros364() { return {}; }

BatchScorer linear_scorer(const std::array<double, kTokens>& w, double bias) {
  return [w, bias](const std::vector<std::array<double, kTokens>>& inputs) {
    std::vector<double> out;
    out.reserve(inputs.size());
    for (const auto& x : inputs) {
      double acc = bias;
      for (int t = 0; t < kTokens; ++t) acc += w[t] * x[t];
      out.push_back(acc);
    }
    return out;
  };
}

Cohort small_cohort(int n, uint64_t seed) {
  auto [cohort, truth] = synth_generate({.n = 16, .positive_fraction = 0.5, .seed = seed});
  cohort.records.resize(n);
  return cohort;
}

void zero_param(ParamSet& params, const std::string& name) {
  for (auto& [pname, tensor] :
       const_cast<std::vector<std::pair<std::string, Tensor>>&>(params.entries()))
    if (pname == name) std::fill(tensor.values_mut().begin(), tensor.values_mut().end(), 0.0);
}

}  // namespace

TEST_CASE("attention importance: symmetric keys give uniform 1/364 scores") {
  MortalityConfig cfg;
  cfg.encoder = {.dim = 8, .blocks = 1, .heads = 2, .ffn_mult = 2};
  MortalityModel model(cfg, 3);
  zero_param(model.head_params(), "fusion.wk");
  zero_param(model.head_params(), "fusion.bk");
  const Cohort cohort = small_cohort(2, 5);
  const Attribution a = attention_importance(model, cohort.records[0]);
  for (double s : a.scores) CHECK(s == doctest::Approx(1.0 / kTokens).epsilon(1e-12));
}

TEST_CASE("attention importance: scores are a distribution and deterministic") {
  MortalityConfig cfg;
  cfg.encoder = {.dim = 8, .blocks = 1, .heads = 4, .ffn_mult = 2};
  MortalityModel model(cfg, 7);
  const Cohort cohort = small_cohort(4, 9);
  for (const auto& rec : cohort.records) {
    const Attribution a = attention_importance(model, rec);
    double total = 0.0;
    for (double s : a.scores) {
      CHECK(s >= 0.0);
      total += s;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);

    const Attribution b = attention_importance(model, rec);
    CHECK(std::memcmp(a.scores.data(), b.scores.data(), sizeof(a.scores)) == 0);
  }
  CHECK(attention_importance(model, cohort.records[0]).method == "attention");
}

TEST_CASE("kernel shap: linear scorers are recovered to 1e-6 with sampled coalitions") {
  Rng rng(11);
  std::array<double, kTokens> w{}, record{}, background{};
  for (int t = 0; t < kTokens; ++t) {
    w[t] = rng.uniform(-1, 1);
    record[t] = rng.uniform(0, 1);
    background[t] = rng.uniform(0, 1);
  }
  ShapConfig cfg;
  cfg.n_samples = 4096;
  cfg.seed = 13;
  const ShapResult result = kernel_shap(linear_scorer(w, 0.3), record, background, cfg);
  CHECK_FALSE(result.enumerated);
  double worst = 0.0;
  for (int t = 0; t < kTokens; ++t)
    worst = std::max(worst, std::abs(result.values[t] - w[t] * (record[t] - background[t])));
  CHECK(worst < 1e-6);

  // efficiency: attributions sum to f(record) - f(background) within 1e-9
  double total = 0.0;
  for (double v : result.values) total += v;
  CHECK(std::abs(total - (result.full_value - result.base_value)) < 1e-9);
}

TEST_CASE("kernel shap: record equal to background zeroes every attribution") {
  Rng rng(17);
  std::array<double, kTokens> w{}, record{};
  for (int t = 0; t < kTokens; ++t) {
    w[t] = rng.uniform(-1, 1);
    record[t] = rng.uniform(0, 1);
  }
  ShapConfig cfg;
  cfg.n_samples = 1024;
  cfg.seed = 19;
  cfg.active_tokens = {4, 9, 100, 363};
  const ShapResult result = kernel_shap(linear_scorer(w, 0.0), record, record, cfg);
  for (double v : result.values) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("kernel shap: the two-player product game splits the payoff evenly") {
  auto scorer = [](const std::vector<std::array<double, kTokens>>& inputs) {
    std::vector<double> out;
    for (const auto& x : inputs) out.push_back(x[0] * x[1]);
    return out;
  };
  std::array<double, kTokens> record = zeros364(), background = zeros364();
  record[0] = 1.0;
  record[1] = 1.0;
  ShapConfig cfg;
  cfg.n_samples = 1024;
  cfg.active_tokens = {0, 1};
  const ShapResult result = kernel_shap(scorer, record, background, cfg);
  CHECK(result.enumerated);
  CHECK(result.values[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(result.values[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("kernel shap agrees with exact Shapley on random restricted scorers") {
  Rng rng(23);
  for (int trial = 0; trial < 4; ++trial) {
    const int m = 6 + trial;  // 6..9 active tokens
    std::vector<int> active;
    while (static_cast<int>(active.size()) < m) {
      const int t = static_cast<int>(rng.below(kTokens));
      if (std::find(active.begin(), active.end(), t) == active.end()) active.push_back(t);
    }
    // random quadratic scorer over the active tokens
    std::vector<double> lin(m), quad(m * m);
    for (auto& v : lin) v = rng.uniform(-1, 1);
    for (auto& v : quad) v = rng.uniform(-0.5, 0.5);
    auto scorer = [&active, &lin, &quad,
                   m](const std::vector<std::array<double, kTokens>>& inputs) {
      std::vector<double> out;
      for (const auto& x : inputs) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
          acc += lin[i] * x[active[i]];
          for (int j = 0; j < m; ++j) acc += quad[i * m + j] * x[active[i]] * x[active[j]];
        }
        out.push_back(acc);
      }
      return out;
    };
    std::array<double, kTokens> record{}, background{};
    for (int t = 0; t < kTokens; ++t) {
      record[t] = rng.uniform(0, 1);
      background[t] = rng.uniform(0, 1);
    }
    ShapConfig cfg;
    cfg.n_samples = 1 << m;
    cfg.seed = 29 + trial;
    cfg.active_tokens = active;
    const ShapResult kernel = kernel_shap(scorer, record, background, cfg);
    CHECK(kernel.enumerated);
    const std::vector<double> exact = exact_shapley(scorer, record, background, active);
    for (int i = 0; i < m; ++i)
      CHECK(std::abs(kernel.values[active[i]] - exact[i]) < 1e-3);
  }
}

TEST_CASE("exact shapley: additivity, dummy, symmetry, and the size cap") {
  std::vector<int> active = {10, 20, 30, 40};
  std::array<double, kTokens> record = zeros364(), background = zeros364();
  for (int t : active) record[t] = 1.0;

  // additive scorer: each token contributes its own weight
  auto additive = [](const std::vector<std::array<double, kTokens>>& inputs) {
    std::vector<double> out;
    for (const auto& x : inputs) out.push_back(2 * x[10] + 3 * x[20] - 1 * x[30] + 0 * x[40]);
    return out;
  };
  const auto phi = exact_shapley(additive, record, background, active);
  CHECK(phi[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(phi[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(phi[2] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(phi[3]) < 1e-12);  // dummy token

  // symmetry: interchangeable tokens receive equal values
  auto symmetric = [](const std::vector<std::array<double, kTokens>>& inputs) {
    std::vector<double> out;
    for (const auto& x : inputs) out.push_back(x[10] * x[20] + x[10] + x[20]);
    return out;
  };
  const auto phi_sym = exact_shapley(symmetric, record, background, {10, 20});
  CHECK(std::abs(phi_sym[0] - phi_sym[1]) < 1e-6);

  std::vector<int> too_many(13);
  for (int i = 0; i < 13; ++i) too_many[i] = i;
  CHECK_THROWS_AS(exact_shapley(additive, record, background, too_many), ContractError);
}

TEST_CASE("kernel shap: sample budget precondition") {
  ShapConfig cfg;
  cfg.n_samples = 10;  // far below 2*364+2
  CHECK_THROWS_AS(kernel_shap(linear_scorer({}, 0.0), zeros364(), zeros364(), cfg),
                  ContractError);
}

TEST_CASE("logistic weight importance: absolute values, global, rank-stable under scaling") {
  LogisticModel model(31);
  auto& entries =
      const_cast<std::vector<std::pair<std::string, Tensor>>&>(model.params().entries());
  for (auto& [name, tensor] : entries)
    if (name == "logistic.w") {
      std::fill(tensor.values_mut().begin(), tensor.values_mut().end(), 0.0);
      tensor.values_mut()[0] = 3.0;
      tensor.values_mut()[1] = -4.0;
    }
  Attribution a = logistic_weight_importance(model);
  CHECK(a.method == "weight");
  CHECK(a.stay_id.empty());  // global
  CHECK(a.scores[0] == 3.0);
  CHECK(a.scores[1] == 4.0);
  CHECK(a.scores[2] == 0.0);

  const auto rank_before = ranking_desc(a.scores);
  for (auto& [name, tensor] : entries)
    if (name == "logistic.w")
      for (auto& v : tensor.values_mut()) v *= 2.0;
  Attribution b = logistic_weight_importance(model);
  CHECK(b.scores[0] == 6.0);
  CHECK(ranking_desc(b.scores) == rank_before);
}

TEST_CASE("attribution json: method, scores, and the 364-entry token registry") {
  LogisticModel model(37);
  const Cohort cohort = small_cohort(2, 39);
  const Attribution a = logistic_weight_importance(model);
  const nlohmann::json j = attribution_to_json(a, cohort);
  CHECK(j.at("method") == "weight");
  CHECK(j.at("scores").size() == kTokens);
  CHECK(j.at("token_registry").size() == kTokens);
  CHECK(j.at("token_registry")[0].at("kind") == "vital");
  CHECK(j.at("token_registry")[kVitalTokens].at("kind") == "aggregated");
  CHECK_FALSE(j.contains("stay_id"));
}
