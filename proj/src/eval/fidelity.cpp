#include "eval/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "common/errors.hpp"
#include "core/rng.hpp"
#include "eval/metrics.hpp"
#include "explain/attribution.hpp"

namespace vitalattn {

namespace {

struct CohortMetrics {
  double auroc_v, auprc_v, prob_v;
};

CohortMetrics cohort_metrics(const std::vector<double>& probs, const std::vector<int>& labels) {
  return {auroc(probs, labels), auprc(probs, labels),
          mean_true_label_probability(probs, labels)};
}

std::string direction_name(FidelityDirection d) {
  return d == FidelityDirection::Plus ? "plus" : "minus";
}

std::string substitution_name(SubstitutionMode m) {
  return m == SubstitutionMode::Uniform ? "uniform" : "permutation";
}

}  // namespace

FidelityReport run_fidelity(const BatchScorer& scorer, const Cohort& cohort,
                            const AttributionProvider& provider, const std::string& model_tag,
                            const std::string& method_tag, const FidelityConfig& cfg) {
  for (double f : cfg.fractions)
    if (!(f > 0.0 && f <= 1.0))
      throw ConfigError("fidelity fraction must lie in (0,1], got " + std::to_string(f));
  if (cfg.fractions.empty()) throw ConfigError("fidelity needs at least one fraction");
  if (cfg.draws < 1) throw ConfigError("fidelity needs at least one substitution draw");
  if (cohort.records.empty()) throw ContractError("fidelity needs a non-empty cohort");

  const int64_t n = static_cast<int64_t>(cohort.records.size());
  std::vector<int> labels(n);
  std::vector<std::array<double, kTokens>> baseline_inputs(n);
  for (int64_t i = 0; i < n; ++i) {
    labels[i] = cohort.records[i].label;
    baseline_inputs[i] = record_tokens(cohort.records[i]);
  }
  const std::vector<double> baseline_probs = scorer(baseline_inputs);
  const CohortMetrics baseline = cohort_metrics(baseline_probs, labels);

  std::vector<std::vector<int>> rankings(n);
  for (int64_t i = 0; i < n; ++i) rankings[i] = ranking_desc(provider(i));

  FidelityReport report;
  report.model_tag = model_tag;
  report.method_tag = method_tag;
  report.direction = cfg.direction;
  report.draws = cfg.draws;
  report.seed = cfg.seed;
  report.substitution = cfg.substitution;

  for (size_t rung_idx = 0; rung_idx < cfg.fractions.size(); ++rung_idx) {
    const double fraction = cfg.fractions[rung_idx];
    const int k = static_cast<int>(std::ceil(fraction * kTokens));

    double acc_auroc = 0.0, acc_auprc = 0.0, acc_prob = 0.0;
    for (int draw = 0; draw < cfg.draws; ++draw) {
      std::vector<std::array<double, kTokens>> perturbed = baseline_inputs;
      for (int64_t i = 0; i < n; ++i) {
        Rng rng(Rng::mix(cfg.seed, rung_idx, static_cast<uint64_t>(draw),
                         static_cast<uint64_t>(i)));
        const auto& ranking = rankings[i];
        for (int j = 0; j < k; ++j) {
          const int token = cfg.direction == FidelityDirection::Plus
                                ? ranking[j]
                                : ranking[kTokens - 1 - j];
          if (cfg.substitution == SubstitutionMode::Uniform) {
            perturbed[i][token] = rng.uniform();
          } else {
            const int64_t other = static_cast<int64_t>(rng.below(n));
            perturbed[i][token] = baseline_inputs[other][token];
          }
        }
      }
      const std::vector<double> probs = scorer(perturbed);
      const CohortMetrics m = cohort_metrics(probs, labels);
      acc_auroc += m.auroc_v;
      acc_auprc += m.auprc_v;
      acc_prob += m.prob_v;
    }
    const double r = static_cast<double>(cfg.draws);

    FidelityRung rung;
    rung.fraction = fraction;
    rung.k = k;
    rung.auroc_point = {"auroc", baseline.auroc_v, acc_auroc / r, acc_auroc / r - baseline.auroc_v};
    rung.auprc_point = {"auprc", baseline.auprc_v, acc_auprc / r, acc_auprc / r - baseline.auprc_v};
    rung.prob_point = {"mean_prob", baseline.prob_v, acc_prob / r, acc_prob / r - baseline.prob_v};
    report.rungs.push_back(std::move(rung));
  }
  return report;
}

nlohmann::json fidelity_report_to_json(const FidelityReport& report) {
  nlohmann::json j;
  j["model"] = report.model_tag;
  j["method"] = report.method_tag;
  j["direction"] = direction_name(report.direction);
  j["draws"] = report.draws;
  j["seed"] = report.seed;
  j["substitution"] = substitution_name(report.substitution);
  j["rungs"] = nlohmann::json::array();
  for (const auto& rung : report.rungs) {
    nlohmann::json r;
    r["fraction"] = rung.fraction;
    r["k"] = rung.k;
    for (const MetricPoint* p : {&rung.auroc_point, &rung.auprc_point, &rung.prob_point}) {
      nlohmann::json mp;
      mp["baseline"] = p->baseline;
      mp["perturbed"] = p->perturbed;
      mp["delta"] = p->delta;
      r[p->metric] = std::move(mp);
    }
    j["rungs"].push_back(std::move(r));
  }
  return j;
}

namespace {

const FidelityRung* headline_rung(const FidelityReport& report, double fraction) {
  const FidelityRung* best = nullptr;
  for (const auto& rung : report.rungs)
    if (!best || std::abs(rung.fraction - fraction) < std::abs(best->fraction - fraction))
      best = &rung;
  return best;
}

struct TableColumn {
  std::string model, method;
  const FidelityReport* plus = nullptr;
  const FidelityReport* minus = nullptr;
};

std::vector<TableColumn> collect_columns(const std::vector<FidelityReport>& reports) {
  std::vector<TableColumn> columns;
  for (const auto& report : reports) {
    TableColumn* col = nullptr;
    for (auto& c : columns)
      if (c.model == report.model_tag && c.method == report.method_tag) col = &c;
    if (!col) {
      columns.push_back({report.model_tag, report.method_tag, nullptr, nullptr});
      col = &columns.back();
    }
    (report.direction == FidelityDirection::Plus ? col->plus : col->minus) = &report;
  }
  return columns;
}

std::string fmt_delta(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

double delta_for(const FidelityReport* report, const std::string& metric, double fraction) {
  if (!report) return std::nan("");
  const FidelityRung* rung = headline_rung(*report, fraction);
  if (metric == "auroc") return rung->auroc_point.delta;
  if (metric == "auprc") return rung->auprc_point.delta;
  return rung->prob_point.delta;
}

}  // namespace

std::string render_fidelity_table(const std::vector<FidelityReport>& reports,
                                  double headline_fraction) {
  if (reports.empty()) throw ContractError("no fidelity reports to render");
  const auto columns = collect_columns(reports);

  std::ostringstream os;
  os << std::string(22, ' ');
  for (const auto& col : columns) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-18s", (col.model + "/" + col.method).c_str());
    os << buf;
  }
  os << '\n';

  const struct {
    const char* row_label;
    FidelityDirection direction;
  } groups[] = {{"Fidelity+", FidelityDirection::Plus}, {"Fidelity-", FidelityDirection::Minus}};
  const struct {
    const char* label;
    const char* metric;
  } metrics[] = {{"AUROC", "auroc"}, {"AUPRC", "auprc"}, {"Prob.", "mean_prob"}};

  for (const auto& group : groups) {
    bool first = true;
    for (const auto& metric : metrics) {
      char head[32];
      std::snprintf(head, sizeof(head), "%-12s%-10s", first ? group.row_label : "", metric.label);
      os << head;
      for (const auto& col : columns) {
        const FidelityReport* report =
            group.direction == FidelityDirection::Plus ? col.plus : col.minus;
        const double delta = delta_for(report, metric.metric, headline_fraction);
        char cell[64];
        if (std::isnan(delta))
          std::snprintf(cell, sizeof(cell), "%-18s", "-");
        else
          std::snprintf(cell, sizeof(cell), "%-18s", fmt_delta(delta).c_str());
        os << cell;
      }
      os << '\n';
      first = false;
    }
  }
  return os.str();
}

std::string render_fidelity_csv(const std::vector<FidelityReport>& reports,
                                double headline_fraction) {
  if (reports.empty()) throw ContractError("no fidelity reports to render");
  const auto columns = collect_columns(reports);

  std::ostringstream os;
  os << "direction,metric";
  for (const auto& col : columns) os << ',' << col.model << '/' << col.method;
  os << '\n';
  const struct {
    const char* direction;
    FidelityDirection dir;
  } groups[] = {{"fidelity_plus", FidelityDirection::Plus},
                {"fidelity_minus", FidelityDirection::Minus}};
  for (const auto& group : groups) {
    for (const char* metric : {"auroc", "auprc", "mean_prob"}) {
      os << group.direction << ',' << metric;
      for (const auto& col : columns) {
        const FidelityReport* report =
            group.dir == FidelityDirection::Plus ? col.plus : col.minus;
        const double delta = delta_for(report, metric, headline_fraction);
        os << ',';
        if (!std::isnan(delta)) os << fmt_delta(delta);
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace vitalattn
