// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line with the measured values. Budgets target a 2-core laptop.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cli/case_study.hpp"
#include "cli/config.hpp"
#include "cli/experiment.hpp"
#include "common/errors.hpp"
#include "data/preprocess.hpp"
#include "data/synth.hpp"
#include "eval/fidelity.hpp"
#include "eval/metrics.hpp"
#include "explain/attribution.hpp"
#include "explain/shap.hpp"
#include "model/baselines.hpp"
#include "model/mortality.hpp"
#include "test_util.hpp"
#include "train/kfold.hpp"
#include "train/pretrain.hpp"
#include "train/trainer.hpp"

using namespace vitalattn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void verdict(int criterion, const char* what, bool pass, const std::string& detail) {
  std::printf("[criterion %d] %s: %s (%s)\n", criterion, pass ? "PASS" : "FAIL", what,
              detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, what, ": ", detail);
}

// ---- shared desk-scale experiment configuration ---------------------------

constexpr uint64_t kCohortSeed = 20240807;
constexpr int64_t kCohortSize = 600;

EncoderConfig acceptance_encoder() { return {.dim = 16, .blocks = 1, .heads = 4, .ffn_mult = 2}; }

PretrainConfig acceptance_pretrain(uint64_t seed) {
  PretrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-3;
  cfg.seed = seed;
  return cfg;
}

// Utility protocol (criterion 5): the default stage-two mode, encoder
// fine-tuned end to end.
TrainConfig acceptance_stage2_cv(uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  cfg.seed = seed;
  return cfg;
}

// Explanation protocol (criteria 6 and 7): the pretrained encoder stays
// frozen. Reconstruction keeps each token's embedding local to its own cell,
// so fusion attention has to read the informative inputs directly and the
// attention ranking aligns with input positions.
TrainConfig acceptance_stage2_explain(uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  cfg.seed = seed;
  cfg.fine_tune_encoder = false;
  return cfg;
}

struct World {
  Cohort raw;          // planted-signal cohort, 300/300
  GroundTruth truth;
  Cohort processed;    // globally imputed + scaled
  std::unique_ptr<MortalityModel> model;  // trained on `processed`
};

const World& world() {
  static World w = [] {
    World out;
    auto [cohort, truth] = synth_generate(
        {.n = kCohortSize, .positive_fraction = 0.5, .seed = kCohortSeed});
    out.raw = std::move(cohort);
    out.truth = std::move(truth);

    MiceImputer imputer(10);
    MinMaxScaler scaler;
    out.processed = scaler.fit_transform(imputer.fit_transform(out.raw));

    const auto windows = make_windows(out.processed);
    VitalEncoder encoder(acceptance_encoder(), 11);
    VitalDecoder decoder(acceptance_encoder().dim, 12);
    pretrain_stage1(encoder, decoder, windows, acceptance_pretrain(13));

    MortalityConfig cfg;
    cfg.encoder = acceptance_encoder();
    out.model = std::make_unique<MortalityModel>(cfg, 14);
    out.model->encoder().params().load_values(encoder.params().entries());
    train_stage2(*out.model, out.processed, acceptance_stage2_explain(15));
    return out;
  }();
  return w;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("criterion 1: gradient fidelity across ops and the tiny end-to-end model") {
  using testutil::max_grad_rel_err;
  using testutil::random_tensor;
  const auto t0 = std::chrono::steady_clock::now();

  double worst_op = 0.0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed * 977 + 3);
    const auto dim = [&](int lo, int hi) {
      return static_cast<int64_t>(lo + rng.below(hi - lo + 1));
    };
    const int64_t m = dim(1, 4), k = dim(1, 4), n = dim(1, 4), b = dim(1, 3);

    Tensor a2 = random_tensor({m, k}, rng);
    Tensor b2 = random_tensor({k, n}, rng);
    Tensor w2 = random_tensor({m, n}, rng, -1, 1, false);
    worst_op = std::max(
        worst_op, max_grad_rel_err([&] { return sum(mul(matmul(a2, b2), w2)); }, {a2, b2}, rng));

    Tensor a3 = random_tensor({b, m, k}, rng);
    Tensor b3 = random_tensor({b, k, n}, rng);
    worst_op = std::max(worst_op,
                        max_grad_rel_err([&] { return sum(bmm(a3, b3)); }, {a3, b3}, rng));
    Tensor c3 = random_tensor({b, n, k}, rng);
    worst_op = std::max(worst_op,
                        max_grad_rel_err([&] { return sum(bmm_nt(a3, c3)); }, {a3, c3}, rng));

    Tensor x = random_tensor({m, k}, rng, -2, 2);
    Tensor y = random_tensor({m, k}, rng, -2, 2);
    Tensor row = random_tensor({k}, rng, -1, 1);
    worst_op = std::max(worst_op, max_grad_rel_err([&] { return sum(mul(add(x, row), y)); },
                                                   {x, y, row}, rng));
    worst_op = std::max(worst_op, max_grad_rel_err([&] { return sum(mul(sub(x, y), x)); },
                                                   {x, y}, rng));
    worst_op = std::max(
        worst_op, max_grad_rel_err([&] { return sum(mul_scalar(add_scalar(x, 0.7), -1.3)); },
                                   {x}, rng));
    worst_op = std::max(worst_op,
                        max_grad_rel_err([&] { return sum(reshape(x, {k, m})); }, {x}, rng));
    worst_op = std::max(
        worst_op,
        max_grad_rel_err([&] { return sum(mul(permute(x, {1, 0}), permute(y, {1, 0}))); },
                         {x, y}, rng));

    Tensor g = random_tensor({m + 2, k}, rng);
    std::vector<int64_t> idx = {0, m + 1, 0, dim(0, m + 1)};
    worst_op = std::max(worst_op, max_grad_rel_err(
                                      [&] {
                                        Tensor picked = gather_rows(g, idx);
                                        return sum(mul(picked, picked));
                                      },
                                      {g}, rng));
    worst_op = std::max(worst_op,
                        max_grad_rel_err([&] { return sum(slice_cols(g, 0, k)); }, {g}, rng));
    worst_op = std::max(
        worst_op, max_grad_rel_err([&] { return sum(mul(concat({x, y}, 0), concat({y, x}, 0))); },
                                   {x, y}, rng));

    const int64_t axis = rng.below(2);
    Tensor sm = random_tensor({m + 1, k + 1}, rng, -3, 3);
    Tensor sw = random_tensor({m + 1, k + 1}, rng, -1, 1, false);
    worst_op = std::max(
        worst_op, max_grad_rel_err([&] { return sum(mul(softmax(sm, axis), sw)); }, {sm}, rng));

    Tensor act = random_tensor({m, n}, rng, -2, 2);
    worst_op = std::max(worst_op, max_grad_rel_err([&] { return sum(sigmoid(act)); }, {act}, rng));
    worst_op = std::max(worst_op, max_grad_rel_err([&] { return sum(tanh(act)); }, {act}, rng));
    worst_op = std::max(worst_op,
                        max_grad_rel_err([&] { return mean(leaky_relu(act)); }, {act}, rng));

    Tensor lx = random_tensor({m, 4}, rng, -2, 2);
    Tensor gamma = random_tensor({4}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({4}, rng, -0.5, 0.5);
    Tensor lw = random_tensor({m, 4}, rng, -1, 1, false);
    worst_op = std::max(
        worst_op, max_grad_rel_err([&] { return sum(mul(layer_norm(lx, gamma, beta), lw)); },
                                   {lx, gamma, beta}, rng));

    Tensor p = random_tensor({m, k}, rng, 0.05, 0.95);
    Tensor labels = random_tensor({m, k}, rng, 0, 1, false);
    worst_op = std::max(worst_op, max_grad_rel_err([&] { return bce_loss(p, labels); }, {p}, rng));

    Tensor pr = random_tensor({m, k}, rng);
    Tensor tg = random_tensor({m, k}, rng, -1, 1, false);
    std::vector<double> mask_values(m * k);
    for (auto& v : mask_values) v = rng.below(2) ? 1.0 : 0.0;
    mask_values[0] = 1.0;
    Tensor mk = Tensor::from_values({m, k}, std::move(mask_values));
    worst_op = std::max(worst_op, max_grad_rel_err([&] { return mse_loss(pr, tg, mk); }, {pr}, rng));
  }
  const bool op_ok = worst_op <= 1e-4;

  // end-to-end: tiny mortality model, 50 seeds, sampled coordinates
  double worst_model = 0.0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed * 1409 + 7);
    MortalityConfig cfg;
    cfg.encoder = {.dim = 4, .blocks = 1, .heads = 1, .ffn_mult = 2};
    MortalityModel model(cfg, seed + 100);
    auto [cohort, truth] = synth_generate({.n = 10, .positive_fraction = 0.5, .seed = seed});
    cohort.records.resize(2);
    std::vector<const PatientRecord*> batch = {&cohort.records[0], &cohort.records[1]};
    Tensor vitals = batch_vitals_tensor(batch);
    Tensor agg = batch_agg_tensor(batch);
    Tensor labels = Tensor::from_values({2}, {1.0, 0.0});
    // h = 1e-6: small enough that no LeakyReLU kink is straddled, still far
    // above the cancellation floor for these loss magnitudes
    worst_model = std::max(
        worst_model,
        testutil::max_grad_rel_err(
            [&] { return bce_loss(model.forward_values(vitals, agg).prob, labels); },
            model.trainable_params(true), rng, 1e-6, 1));
  }
  const bool model_ok = worst_model <= 1e-3;

  const double elapsed = seconds_since(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "op max rel err %.2e (<=1e-4), end-to-end %.2e (<=1e-3), %.1fs (<60s)", worst_op,
                worst_model, elapsed);
  verdict(1, "gradient fidelity", op_ok && model_ok && elapsed < 60.0, detail);
}

TEST_CASE("criterion 2: metric oracles") {
  const auto t0 = std::chrono::steady_clock::now();

  const auto auroc_oracle = [](const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0.0;
    int64_t pairs = 0;
    for (size_t i = 0; i < s.size(); ++i) {
      if (y[i] != 1) continue;
      for (size_t j = 0; j < s.size(); ++j) {
        if (y[j] != 0) continue;
        ++pairs;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
    }
    return num / static_cast<double>(pairs);
  };
  const auto auprc_oracle = [](const std::vector<double>& s, const std::vector<int>& y) {
    std::vector<int64_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int64_t a, int64_t b) { return s[a] > s[b]; });
    int64_t n_pos = 0;
    for (int v : y) n_pos += v == 1;
    double ap = 0.0;
    for (size_t k = 0; k < order.size(); ++k) {
      if (y[order[k]] != 1) continue;
      int64_t tp = 0;
      for (size_t r = 0; r <= k; ++r) tp += y[order[r]] == 1;
      ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
    return ap / static_cast<double>(n_pos);
  };

  bool ok = auroc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}) == 0.75;
  ok = ok && std::abs(auprc({0.9, 0.8, 0.7}, {1, 0, 1}) - 5.0 / 6.0) < 1e-12;

  Rng rng(4242);
  int exact_auroc = 0, exact_auprc = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t n = 2 + static_cast<int64_t>(rng.below(49));
    std::vector<double> scores;
    std::vector<int> labels;
    for (int64_t i = 0; i < n; ++i) {
      scores.push_back(static_cast<double>(rng.below(8)) / 8.0);
      labels.push_back(rng.below(2) ? 1 : 0);
    }
    labels[0] = 1;
    labels[n - 1] = 0;
    exact_auroc += auroc(scores, labels) == auroc_oracle(scores, labels) ? 1 : 0;
    exact_auprc += auprc(scores, labels) == auprc_oracle(scores, labels) ? 1 : 0;
  }
  ok = ok && exact_auroc == 200 && exact_auprc == 200;

  const double elapsed = seconds_since(t0);
  char detail[120];
  std::snprintf(detail, sizeof(detail), "auroc exact %d/200, auprc exact %d/200, %.1fs (<10s)",
                exact_auroc, exact_auprc, elapsed);
  verdict(2, "metric oracles", ok && elapsed < 10.0, detail);
}

TEST_CASE("criterion 3: shapley correctness") {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(777);

  // 20 random restricted scorers, kernel vs exact
  double worst_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 4 + static_cast<int>(rng.below(7));  // 4..10 active tokens
    std::vector<int> active;
    while (static_cast<int>(active.size()) < m) {
      const int t = static_cast<int>(rng.below(kTokens));
      if (std::find(active.begin(), active.end(), t) == active.end()) active.push_back(t);
    }
    std::vector<double> lin(m), quad(m * m);
    for (auto& v : lin) v = rng.uniform(-1, 1);
    for (auto& v : quad) v = rng.uniform(-0.5, 0.5);
    const auto scorer = [&active, &lin, &quad,
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
    cfg.n_samples = 1 << m;  // full enumeration
    cfg.seed = 1000 + trial;
    cfg.active_tokens = active;
    const ShapResult kernel = kernel_shap(scorer, record, background, cfg);
    const std::vector<double> exact = exact_shapley(scorer, record, background, active);
    for (int i = 0; i < m; ++i)
      worst_gap = std::max(worst_gap, std::abs(kernel.values[active[i]] - exact[i]));
  }
  const bool enumeration_ok = worst_gap < 1e-3;

  // closed-form linear case over all 364 tokens with sampled coalitions
  std::array<double, kTokens> w{}, record{}, background{};
  for (int t = 0; t < kTokens; ++t) {
    w[t] = rng.uniform(-1, 1);
    record[t] = rng.uniform(0, 1);
    background[t] = rng.uniform(0, 1);
  }
  const auto linear = [&w](const std::vector<std::array<double, kTokens>>& inputs) {
    std::vector<double> out;
    for (const auto& x : inputs) {
      double acc = 0.25;
      for (int t = 0; t < kTokens; ++t) acc += w[t] * x[t];
      out.push_back(acc);
    }
    return out;
  };
  ShapConfig cfg;
  cfg.n_samples = 4096;
  cfg.seed = 31337;
  const ShapResult linear_result = kernel_shap(linear, record, background, cfg);
  double worst_linear = 0.0, total = 0.0;
  for (int t = 0; t < kTokens; ++t) {
    worst_linear =
        std::max(worst_linear, std::abs(linear_result.values[t] - w[t] * (record[t] - background[t])));
    total += linear_result.values[t];
  }
  const double efficiency_gap =
      std::abs(total - (linear_result.full_value - linear_result.base_value));
  const bool linear_ok = worst_linear < 1e-6 && efficiency_gap < 1e-9;

  const double elapsed = seconds_since(t0);
  char detail[180];
  std::snprintf(detail, sizeof(detail),
                "kernel-vs-exact max %.2e (<1e-3), linear max %.2e (<1e-6), efficiency %.2e "
                "(<1e-9), %.1fs (<120s)",
                worst_gap, worst_linear, efficiency_gap, elapsed);
  verdict(3, "shapley correctness", enumeration_ok && linear_ok && elapsed < 120.0, detail);
}

TEST_CASE("criterion 4: preprocessing pipeline analogue") {
  const auto t0 = std::chrono::steady_clock::now();
  auto [cohort, truth] =
      synth_generate({.n = 2089, .positive_fraction = 307.0 / 2089.0, .seed = 4711});
  const Cohort balanced = undersample_balance(cohort, 4712);
  const bool balance_ok = balanced.records.size() == 614 && balanced.count_label(0) == 307 &&
                          balanced.count_label(1) == 307;

  Cohort normalized = balanced;
  normalized.stage = CohortStage::Normalized;  // synth output is complete and in [0,1]
  const auto windows = make_windows(normalized);
  bool windows_ok = windows.size() == balanced.records.size() * 35;
  int starts_seen[6] = {};
  for (const auto& w : windows) {
    windows_ok = windows_ok && w.start_hour >= 1 && w.start_hour <= 5;
    ++starts_seen[w.start_hour];
  }
  for (int s = 1; s <= 5; ++s)
    windows_ok = windows_ok && starts_seen[s] == static_cast<int>(balanced.records.size()) * 7;

  const double elapsed = seconds_since(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "2089 -> %zu records (307/307: %s), %zu windows (= 35/record: %s), %.1fs (<10s)",
                balanced.records.size(), balance_ok ? "yes" : "no", windows.size(),
                windows_ok ? "yes" : "no", elapsed);
  verdict(4, "pipeline analogue", balance_ok && windows_ok && elapsed < 10.0, detail);
}

TEST_CASE("criterion 5: model ordering under 10-fold cross-validation") {
  auto [cohort, truth] = synth_generate(
      {.n = kCohortSize, .positive_fraction = 0.5, .seed = kCohortSeed});
  const auto t0 = std::chrono::steady_clock::now();

  CvOptions opts;
  opts.seed = 5150;
  opts.attention_model.encoder = acceptance_encoder();
  opts.pretrain = acceptance_pretrain(0);
  opts.pretrain.epochs = 3;
  opts.stage2 = acceptance_stage2_cv(0);
  opts.stage2.folds = 10;

  const CvResult attention = run_cv(cohort, ModelKind::Attention, opts);
  const CvResult logistic = run_cv(cohort, ModelKind::Logistic, opts);

  const bool absolute_ok = attention.auroc_mean >= 0.85;
  const bool relative_ok = attention.auroc_mean >= logistic.auroc_mean - 0.02;
  const double elapsed = seconds_since(t0);
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "attention AUROC %.4f +/- %.4f (>=0.85), logistic %.4f +/- %.4f (margin %.4f >= "
                "-0.02), %.0fs (<1200s)",
                attention.auroc_mean, attention.auroc_std, logistic.auroc_mean,
                logistic.auroc_std, attention.auroc_mean - logistic.auroc_mean, elapsed);
  verdict(5, "model ordering", absolute_ok && relative_ok && elapsed < 1200.0, detail);
}

TEST_CASE("criterion 6: fidelity directionality") {
  const auto t0 = std::chrono::steady_clock::now();
  const World& w = world();
  const BatchScorer scorer = make_token_scorer(*w.model);
  const int64_t n = static_cast<int64_t>(w.processed.records.size());

  std::vector<std::array<double, kTokens>> attention_scores;
  attention_scores.reserve(n);
  for (const auto& rec : w.processed.records)
    attention_scores.push_back(attention_importance(*w.model, rec).scores);
  const AttributionProvider attention_provider = [&](int64_t i) { return attention_scores[i]; };

  std::vector<std::array<double, kTokens>> random_scores(n);
  for (int64_t i = 0; i < n; ++i) {
    Rng rng(Rng::mix(99, static_cast<uint64_t>(i)));
    for (auto& s : random_scores[i]) s = rng.uniform();
  }
  const AttributionProvider random_provider = [&](int64_t i) { return random_scores[i]; };

  FidelityConfig cfg;
  cfg.fractions = {0.10};
  cfg.draws = 10;
  cfg.seed = 616;

  const auto run_dir = [&](const AttributionProvider& provider, FidelityDirection dir,
                           const char* method) {
    FidelityConfig c = cfg;
    c.direction = dir;
    return run_fidelity(scorer, w.processed, provider, "attention", method, c);
  };

  const double attn_plus =
      run_dir(attention_provider, FidelityDirection::Plus, "atten").rungs[0].auroc_point.delta;
  const double attn_minus =
      run_dir(attention_provider, FidelityDirection::Minus, "atten").rungs[0].auroc_point.delta;
  const double rand_plus =
      run_dir(random_provider, FidelityDirection::Plus, "random").rungs[0].auroc_point.delta;
  const double rand_minus =
      run_dir(random_provider, FidelityDirection::Minus, "random").rungs[0].auroc_point.delta;

  const bool attn_plus_ok = attn_plus <= -0.10;
  const bool attn_minus_ok = attn_minus >= -0.02;
  const bool random_violates = rand_plus > -0.10 || rand_minus < -0.02;

  const double elapsed = seconds_since(t0);
  char detail[220];
  std::snprintf(detail, sizeof(detail),
                "attention plus %.4f (<=-0.10) minus %.4f (>=-0.02); random plus %.4f minus %.4f "
                "(violates a bound: %s), %.0fs (<600s)",
                attn_plus, attn_minus, rand_plus, rand_minus, random_violates ? "yes" : "no",
                elapsed);
  verdict(6, "fidelity directionality", attn_plus_ok && attn_minus_ok && random_violates &&
                                            elapsed < 600.0,
          detail);
}

TEST_CASE("criterion 7: case studies flag late-hour vitals") {
  const auto t0 = std::chrono::steady_clock::now();
  const World& w = world();

  int exported = 0, flagged_late = 0;
  for (const auto& rec : w.processed.records) {
    if (rec.label != 1) continue;
    if (exported == 10) break;
    ++exported;
    const CaseStudyExport e = build_case_study(*w.model, w.processed, rec.stay_id, 20);
    bool late = false;
    for (const auto& t : e.top_tokens) {
      if (t.token_id >= kVitalTokens) continue;
      const int hour = t.token_id % kHours + 1;
      late = late || (hour >= 16 && hour <= 24);
    }
    flagged_late += late ? 1 : 0;
  }

  const double elapsed = seconds_since(t0);
  char detail[140];
  std::snprintf(detail, sizeof(detail),
                "%d of %d positive case studies flag a vital token in hours 16-24 (>=8), %.0fs "
                "(<120s)",
                flagged_late, exported, elapsed);
  verdict(7, "late-hour case studies", exported == 10 && flagged_late >= 8 && elapsed < 120.0,
          detail);
}

TEST_CASE("criterion 8: byte-identical artifacts across reruns") {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path work = fs::temp_directory_path() / "vitalattn_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  json cfg;
  cfg["data"] = {{"source", "synth"}, {"n", 60}, {"positive_fraction", 0.5}, {"seed", 808}};
  cfg["model"] = {{"dim", 4}, {"blocks", 1}, {"heads", 1}};
  cfg["pretrain"] = {{"epochs", 1}, {"batch_size", 64}};
  cfg["train"] = {{"epochs", 2}, {"folds", 2}};
  cfg["logistic_train"] = {{"epochs", 60}};
  cfg["fidelity"] = {{"fractions", {0.1}}, {"draws", 2}};
  cfg["seed"] = 808;
  const std::string config_path = (work / "exp.json").string();
  std::ofstream(config_path) << cfg.dump(2) << "\n";

  const std::string cmd_base = std::string(VITALATTN_BIN) + " run --config " + config_path;
  const int rc1 =
      WEXITSTATUS(std::system((cmd_base + " --out " + (work / "r1").string() + " >/dev/null 2>&1").c_str()));
  const int rc2 =
      WEXITSTATUS(std::system((cmd_base + " --out " + (work / "r2").string() + " >/dev/null 2>&1").c_str()));

  const bool runs_ok = rc1 == 0 && rc2 == 0;
  const bool metrics_same = slurp(work / "r1" / "metrics.json") == slurp(work / "r2" / "metrics.json");
  const bool fidelity_same =
      slurp(work / "r1" / "fidelity.json") == slurp(work / "r2" / "fidelity.json");

  const double elapsed = seconds_since(t0);
  char detail[140];
  std::snprintf(detail, sizeof(detail),
                "exit codes %d/%d, metrics byte-identical: %s, fidelity byte-identical: %s, %.0fs",
                rc1, rc2, metrics_same ? "yes" : "no", fidelity_same ? "yes" : "no", elapsed);
  verdict(8, "determinism", runs_ok && metrics_same && fidelity_same, detail);
}
