#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moje/corpus.hpp"

namespace moje {

class MojeModel;

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  double accuracy() const;
  double precision() const;  // 0 when tp+fp == 0
  double recall() const;     // 0 when tp+fn == 0
  double true_positive_rate() const { return recall(); }
  double false_positive_rate() const;
  bool operator==(const ConfusionCounts&) const = default;
};

/// (1+b^2) * p * r / (b^2 * p + r); 0 when p = r = 0. Throws
/// PreconditionError when beta <= 0.
double f_beta(double precision, double recall, double beta);

/// Jailbreak is the positive class; score >= threshold predicts positive.
ConfusionCounts confusion(std::span<const double> scores, std::span<const Label> labels,
                          double threshold);

/// Mann-Whitney AUC: P(random positive outranks random negative), ties
/// credited 1/2. O(n log n). Throws PreconditionError on single-class input.
double auc(std::span<const double> scores, std::span<const Label> labels);

struct MetricReport {
  std::optional<double> auc;
  double accuracy = 0.0;
  double f_beta = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  ConfusionCounts counts;
};

MetricReport evaluate_scores(std::span<const double> scores, std::span<const Label> labels,
                             double threshold, double beta = 0.5);

MetricReport evaluate(const MojeModel& model, const Dataset& ds, double beta = 0.5);

enum class RateKind : std::uint8_t { tpr, fpr };

struct DatasetRate {
  RateKind kind = RateKind::tpr;
  double rate = 0.0;
  std::uint64_t flagged = 0;
  std::uint64_t total = 0;
};

/// TPr for all-jailbreak datasets, FPr for all-benign ones, at the model's
/// tau. Throws PreconditionError on a mixed or empty dataset.
std::map<std::string, DatasetRate> per_dataset_rates(const MojeModel& model,
                                                      const std::map<std::string, Dataset>& datasets);

/// Header plus one row, columns in the order AUC, ACC, F_beta, F1, Recall,
/// Precision. Missing AUC is written as an empty field.
std::string report_csv(const MetricReport& report, const std::string& name = "all");
std::string report_table(const MetricReport& report);
std::string rates_csv(const std::map<std::string, DatasetRate>& rates);

}  // namespace moje
