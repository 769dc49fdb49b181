#pragma once

#include <vector>

namespace vitalattn {

// Mann-Whitney AUROC: fraction of (positive, negative) pairs ranked correctly,
// ties counted 1/2. Throws ContractError when only one class is present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Average precision with a deterministic descending sort (ties broken by
// index). Throws ContractError when there are no positives.
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

// Mean probability assigned to each record's true label.
double mean_true_label_probability(const std::vector<double>& probs,
                                   const std::vector<int>& labels);

double mean_of(const std::vector<double>& xs);
double sample_std(const std::vector<double>& xs);  // n-1 denominator, 0 for n < 2

}  // namespace vitalattn
