#include "data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/errors.hpp"
#include "core/kernels.hpp"
#include "core/linalg.hpp"
#include "core/rng.hpp"

namespace vitalattn {

namespace {

constexpr int kAug = kTokens + 1;  // intercept column + 364 data columns

// Cholesky with an escalating relative ridge; chained regressions routinely
// see collinear or constant predictors.
std::vector<double> solve_ridge_ladder(const std::vector<double>& a, const std::vector<double>& b,
                                       int64_t n) {
  double diag_mean = 0.0;
  for (int64_t i = 0; i < n; ++i) diag_mean += a[i * n + i];
  diag_mean = diag_mean > 0.0 ? diag_mean / static_cast<double>(n) : 1.0;
  for (double rel : {1e-9, 1e-7, 1e-5, 1e-3}) {
    std::vector<double> factor = a;
    for (int64_t i = 0; i < n; ++i) factor[i * n + i] += rel * diag_mean;
    if (linalg::cholesky_factor(factor, n)) {
      std::vector<double> x = b;
      linalg::cholesky_backsolve(factor, n, x);
      return x;
    }
  }
  throw ContractError("imputation regression system is singular beyond ridge repair");
}

std::vector<std::vector<int64_t>> missing_rows_per_column(const Cohort& cohort) {
  std::vector<std::vector<int64_t>> missing(kTokens);
  for (int64_t r = 0; r < static_cast<int64_t>(cohort.records.size()); ++r)
    for (int j = 0; j < kTokens; ++j)
      if (is_missing(cohort.records[r].token(j))) missing[j].push_back(r);
  return missing;
}

}  // namespace

MiceImputer::MiceImputer(int rounds) : rounds_(rounds) {
  if (rounds < 1) throw ContractError("imputation needs at least one round");
}

Cohort MiceImputer::fit_transform(const Cohort& cohort) {
  if (cohort.stage != CohortStage::Raw)
    throw StateError("imputation must run first in the pipeline (cohort is not raw)");
  if (cohort.records.empty()) throw DataError("cannot impute an empty cohort");

  const int64_t n = static_cast<int64_t>(cohort.records.size());
  const auto missing = missing_rows_per_column(cohort);

  bool any_missing = false;
  bool any_complete_column = false;
  for (int j = 0; j < kTokens; ++j) {
    if (missing[j].empty())
      any_complete_column = true;
    else if (static_cast<int64_t>(missing[j].size()) == n)
      throw ContractError("column " + cohort.token_name(j) + " is entirely missing; cannot impute");
    if (!missing[j].empty()) any_missing = true;
  }
  if (!any_complete_column)
    throw ContractError("imputation needs at least one fully observed column");

  // observed-value means, the initial fill
  for (int j = 0; j < kTokens; ++j) {
    double acc = 0.0;
    int64_t cnt = 0;
    for (const auto& rec : cohort.records) {
      const double v = rec.token(j);
      if (!is_missing(v)) {
        acc += v;
        ++cnt;
      }
    }
    column_means_[j] = acc / static_cast<double>(cnt);
  }

  round_models_.clear();
  round_deltas_.clear();
  fitted_ = true;

  Cohort out = cohort;
  out.stage = CohortStage::Imputed;
  if (!any_missing) return out;  // identity on complete cohorts

  // working matrix with intercept column
  std::vector<double> x(n * kAug, 1.0);
  for (int64_t r = 0; r < n; ++r)
    for (int j = 0; j < kTokens; ++j) {
      const double v = cohort.records[r].token(j);
      x[r * kAug + 1 + j] = is_missing(v) ? column_means_[j] : v;
    }

  std::vector<int> incomplete;
  for (int j = 0; j < kTokens; ++j)
    if (!missing[j].empty()) incomplete.push_back(j);

  std::vector<double> gram(static_cast<size_t>(kAug) * kAug);
  std::vector<double> reduced_a(static_cast<size_t>(kTokens) * kTokens);
  std::vector<double> reduced_b(kTokens);

  for (int round = 0; round < rounds_; ++round) {
    kernels::matmul_tn(x.data(), x.data(), gram.data(), kAug, n, kAug);
    std::vector<ColumnModel> models;
    models.reserve(incomplete.size());
    double max_delta = 0.0;

    for (int j : incomplete) {
      const int col = j + 1;
      // normal equations restricted to rows where column j is observed:
      // start from the full Gram and subtract the missing rows' contribution
      for (int a = 0, ra = 0; a < kAug; ++a) {
        if (a == col) continue;
        for (int b = 0, rb = 0; b < kAug; ++b) {
          if (b == col) continue;
          reduced_a[ra * kTokens + rb] = gram[a * kAug + b];
          ++rb;
        }
        reduced_b[ra] = gram[a * kAug + col];
        ++ra;
      }
      for (int64_t r : missing[j]) {
        const double* row = x.data() + r * kAug;
        const double y = row[col];
        for (int a = 0, ra = 0; a < kAug; ++a) {
          if (a == col) continue;
          for (int b = 0, rb = 0; b < kAug; ++b) {
            if (b == col) continue;
            reduced_a[ra * kTokens + rb] -= row[a] * row[b];
            ++rb;
          }
          reduced_b[ra] -= row[a] * y;
          ++ra;
        }
      }
      std::vector<double> beta = solve_ridge_ladder(reduced_a, reduced_b, kTokens);

      // overwrite this column's missing entries with fitted values and keep
      // the Gram in sync so later columns in this round see fresh values
      for (int64_t r : missing[j]) {
        double* row = x.data() + r * kAug;
        double fitted = 0.0;
        for (int a = 0, ra = 0; a < kAug; ++a) {
          if (a == col) continue;
          fitted += beta[ra++] * row[a];
        }
        const double old = row[col];
        max_delta = std::max(max_delta, std::abs(fitted - old));
        for (int b = 0; b < kAug; ++b) {
          if (b == col) continue;
          const double d = (fitted - old) * row[b];
          gram[col * kAug + b] += d;
          gram[b * kAug + col] += d;
        }
        gram[col * kAug + col] += fitted * fitted - old * old;
        row[col] = fitted;
      }
      models.push_back({j, std::move(beta)});
    }
    round_models_.push_back(std::move(models));
    round_deltas_.push_back(max_delta);
  }

  for (int64_t r = 0; r < n; ++r)
    for (int j = 0; j < kTokens; ++j)
      if (is_missing(out.records[r].token(j))) out.records[r].set_token(j, x[r * kAug + 1 + j]);
  return out;
}

Cohort MiceImputer::transform(const Cohort& cohort) const {
  if (!fitted_) throw StateError("imputer is not fitted");
  if (cohort.stage != CohortStage::Raw)
    throw StateError("imputation must run first in the pipeline (cohort is not raw)");

  const int64_t n = static_cast<int64_t>(cohort.records.size());
  const auto missing = missing_rows_per_column(cohort);

  std::vector<double> x(n * kAug, 1.0);
  for (int64_t r = 0; r < n; ++r)
    for (int j = 0; j < kTokens; ++j) {
      const double v = cohort.records[r].token(j);
      x[r * kAug + 1 + j] = is_missing(v) ? column_means_[j] : v;
    }

  for (const auto& round : round_models_) {
    for (const auto& model : round) {
      const int col = model.column + 1;
      for (int64_t r : missing[model.column]) {
        double* row = x.data() + r * kAug;
        double fitted = 0.0;
        for (int a = 0, ra = 0; a < kAug; ++a) {
          if (a == col) continue;
          fitted += model.beta[ra++] * row[a];
        }
        row[col] = fitted;
      }
    }
  }

  Cohort out = cohort;
  out.stage = CohortStage::Imputed;
  for (int64_t r = 0; r < n; ++r)
    for (int j = 0; j < kTokens; ++j)
      if (is_missing(out.records[r].token(j))) out.records[r].set_token(j, x[r * kAug + 1 + j]);
  return out;
}

Cohort mice_impute(const Cohort& cohort, int rounds) {
  MiceImputer imputer(rounds);
  return imputer.fit_transform(cohort);
}

void MinMaxScaler::fit(const Cohort& cohort) {
  if (cohort.stage == CohortStage::Raw)
    throw StateError("min-max scaling requires an imputed cohort (run imputation first)");
  if (cohort.stage == CohortStage::Normalized)
    throw StateError("cohort is already normalized");
  if (cohort.records.empty()) throw DataError("cannot fit scaler on an empty cohort");

  registry_ = ScalerRegistry{};
  for (int f = 0; f < kAggFeatures; ++f) {
    double lo = cohort.records[0].aggregated[f], hi = lo;
    for (const auto& rec : cohort.records) {
      lo = std::min(lo, rec.aggregated[f]);
      hi = std::max(hi, rec.aggregated[f]);
    }
    registry_.agg_min[f] = lo;
    registry_.agg_max[f] = hi;
    if (lo == hi)
      registry_.warnings.push_back("column " + cohort.feature_names[f] +
                                   " is constant; scaled to 0");
  }
  for (int ch = 0; ch < kChannels; ++ch) {
    double lo = cohort.records[0].vitals[ch * kHours], hi = lo;
    for (const auto& rec : cohort.records)
      for (int h = 0; h < kHours; ++h) {
        const double v = rec.vitals[ch * kHours + h];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    registry_.chan_min[ch] = lo;
    registry_.chan_max[ch] = hi;
    if (lo == hi)
      registry_.warnings.push_back("vital channel " + cohort.channel_names[ch] +
                                   " is constant; scaled to 0");
  }
  fitted_ = true;
}

Cohort MinMaxScaler::transform(const Cohort& cohort) const {
  if (!fitted_) throw StateError("scaler is not fitted");
  if (cohort.stage == CohortStage::Raw)
    throw StateError("min-max scaling requires an imputed cohort (run imputation first)");
  if (cohort.stage == CohortStage::Normalized)
    throw StateError("cohort is already normalized");

  const auto scale = [](double v, double lo, double hi) {
    if (lo == hi) return 0.0;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  };
  Cohort out = cohort;
  for (auto& rec : out.records) {
    for (int f = 0; f < kAggFeatures; ++f)
      rec.aggregated[f] = scale(rec.aggregated[f], registry_.agg_min[f], registry_.agg_max[f]);
    for (int ch = 0; ch < kChannels; ++ch)
      for (int h = 0; h < kHours; ++h)
        rec.vitals[ch * kHours + h] =
            scale(rec.vitals[ch * kHours + h], registry_.chan_min[ch], registry_.chan_max[ch]);
  }
  out.stage = CohortStage::Normalized;
  return out;
}

Cohort MinMaxScaler::fit_transform(const Cohort& cohort) {
  fit(cohort);
  return transform(cohort);
}

double MinMaxScaler::inverse_agg(int feature, double scaled) const {
  const double lo = registry_.agg_min[feature], hi = registry_.agg_max[feature];
  return lo == hi ? lo : lo + scaled * (hi - lo);
}

double MinMaxScaler::inverse_vital(int channel, double scaled) const {
  const double lo = registry_.chan_min[channel], hi = registry_.chan_max[channel];
  return lo == hi ? lo : lo + scaled * (hi - lo);
}

Cohort undersample_balance(const Cohort& cohort, uint64_t seed) {
  const int64_t n_pos = cohort.count_label(1);
  const int64_t n_neg = cohort.count_label(0);
  if (n_pos == 0) throw ContractError("cannot balance: no positive records");
  if (n_neg == 0) throw ContractError("cannot balance: no negative records");

  const int majority = n_neg >= n_pos ? 0 : 1;
  const int64_t keep = std::min(n_pos, n_neg);

  std::vector<int64_t> majority_idx;
  for (int64_t i = 0; i < static_cast<int64_t>(cohort.records.size()); ++i)
    if (cohort.records[i].label == majority) majority_idx.push_back(i);

  Rng rng(seed);
  rng.shuffle(majority_idx);
  majority_idx.resize(keep);
  std::sort(majority_idx.begin(), majority_idx.end());

  std::vector<bool> selected(cohort.records.size(), false);
  for (int64_t i : majority_idx) selected[i] = true;

  Cohort out = cohort;
  out.records.clear();
  for (int64_t i = 0; i < static_cast<int64_t>(cohort.records.size()); ++i)
    if (cohort.records[i].label != majority || selected[i]) out.records.push_back(cohort.records[i]);
  out.balanced = true;
  return out;
}

std::vector<WindowSample> make_windows(const Cohort& cohort) {
  if (cohort.stage != CohortStage::Normalized)
    throw StateError("window construction requires a normalized cohort");
  std::vector<WindowSample> windows;
  windows.reserve(cohort.records.size() * kChannels * 5);
  for (const auto& rec : cohort.records) {
    for (int ch = 0; ch < kChannels; ++ch) {
      for (int start = 1; start <= 5; ++start) {
        WindowSample w;
        w.stay_id = rec.stay_id;
        w.channel = ch;
        w.start_hour = start;
        for (int i = 0; i < 12; ++i) w.past[i] = rec.vital(ch, start + i);
        for (int i = 0; i < 8; ++i) w.future[i] = rec.vital(ch, start + 12 + i);
        windows.push_back(std::move(w));
      }
    }
  }
  return windows;
}

}  // namespace vitalattn
