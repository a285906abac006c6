#include "moje/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "moje/error.hpp"
#include "moje/moje.hpp"

namespace moje {
namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt_metric(double v) { return fmt::format("{:.4f}", v); }

}  // namespace

double ConfusionCounts::accuracy() const { return ratio(tp + tn, total()); }
double ConfusionCounts::precision() const { return ratio(tp, tp + fp); }
double ConfusionCounts::recall() const { return ratio(tp, tp + fn); }
double ConfusionCounts::false_positive_rate() const { return ratio(fp, fp + tn); }

double f_beta(double precision, double recall, double beta) {
  if (!(beta > 0.0)) throw PreconditionError("beta must be positive");
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  if (den == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / den;
}

ConfusionCounts confusion(std::span<const double> scores, std::span<const Label> labels,
                          double threshold) {
  if (scores.size() != labels.size()) throw PreconditionError("score and label counts differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == Label::jailbreak)
      predicted ? ++c.tp : ++c.fn;
    else
      predicted ? ++c.fp : ++c.tn;
  }
  return c;
}

double auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw PreconditionError("score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Sum of positive ranks with mid-ranks for ties, kept doubled so every
  // quantity stays an exact integer.
  std::uint64_t positives = 0, negatives = 0, rank_sum_x2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t mid_x2 = (i + 1) + j;  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == Label::jailbreak) {
        ++positives;
        rank_sum_x2 += mid_x2;
      } else {
        ++negatives;
      }
    }
    i = j;
  }
  if (positives == 0 || negatives == 0) throw PreconditionError("AUC needs both classes");
  // U = R - P(P+1)/2; AUC = U / (P N). Doubled: (2R - P(P+1)) / (2 P N).
  const std::uint64_t u_x2 = rank_sum_x2 - positives * (positives + 1);
  return static_cast<double>(u_x2) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

MetricReport evaluate_scores(std::span<const double> scores, std::span<const Label> labels,
                             double threshold, double beta) {
  MetricReport r;
  r.counts = confusion(scores, labels, threshold);
  r.accuracy = r.counts.accuracy();
  r.precision = r.counts.precision();
  r.recall = r.counts.recall();
  r.f_beta = f_beta(r.precision, r.recall, beta);
  r.f1 = f_beta(r.precision, r.recall, 1.0);
  if (r.counts.tp + r.counts.fn > 0 && r.counts.fp + r.counts.tn > 0) r.auc = auc(scores, labels);
  return r;
}

MetricReport evaluate(const MojeModel& model, const Dataset& ds, double beta) {
  std::vector<std::string> texts;
  texts.reserve(ds.size());
  for (const auto& e : ds.examples) texts.push_back(e.text);
  const auto verdicts = infer_batch(model, texts);
  std::vector<double> scores;
  scores.reserve(verdicts.size());
  for (const auto& v : verdicts) scores.push_back(v.score);
  return evaluate_scores(scores, labels_of(ds), model.tau(), beta);
}

std::map<std::string, DatasetRate> per_dataset_rates(const MojeModel& model,
                                                      const std::map<std::string, Dataset>& datasets) {
  std::map<std::string, DatasetRate> out;
  for (const auto& [name, ds] : datasets) {
    if (ds.empty()) throw PreconditionError(fmt::format("dataset '{}' is empty", name));
    const auto jailbreaks = ds.count(Label::jailbreak);
    if (jailbreaks != 0 && jailbreaks != ds.size())
      throw PreconditionError(fmt::format(
          "dataset '{}' mixes labels ({} jailbreak, {} benign); per-dataset rates need a "
          "homogeneous dataset",
          name, jailbreaks, ds.size() - jailbreaks));
    std::vector<std::string> texts;
    for (const auto& e : ds.examples) texts.push_back(e.text);
    DatasetRate rate;
    rate.kind = jailbreaks ? RateKind::tpr : RateKind::fpr;
    rate.total = ds.size();
    for (const auto& v : infer_batch(model, texts))
      if (v.label == Label::jailbreak) ++rate.flagged;
    rate.rate = ratio(rate.flagged, rate.total);
    out.emplace(name, rate);
  }
  return out;
}

std::string report_csv(const MetricReport& report, const std::string& name) {
  return fmt::format("dataset,auc,accuracy,f_beta,f1,recall,precision,tp,fp,tn,fn\n"
                     "{},{},{},{},{},{},{},{},{},{},{}\n",
                     name, report.auc ? fmt::format("{}", *report.auc) : std::string(),
                     report.accuracy, report.f_beta, report.f1, report.recall, report.precision,
                     report.counts.tp, report.counts.fp, report.counts.tn, report.counts.fn);
}

std::string report_table(const MetricReport& report) {
  const auto auc_text = report.auc ? fmt_metric(*report.auc) : std::string("-");
  return fmt::format("{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
                     "AUC", "ACC", "F_b=0.5", "F1", "Recall", "Precis.", auc_text,
                     fmt_metric(report.accuracy), fmt_metric(report.f_beta), fmt_metric(report.f1),
                     fmt_metric(report.recall), fmt_metric(report.precision));
}

std::string rates_csv(const std::map<std::string, DatasetRate>& rates) {
  std::string out = "dataset,metric,rate,flagged,total\n";
  for (const auto& [name, r] : rates)
    out += fmt::format("{},{},{},{},{}\n", name, r.kind == RateKind::tpr ? "tpr" : "fpr", r.rate,
                       r.flagged, r.total);
  return out;
}

}  // namespace moje
