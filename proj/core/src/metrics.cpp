#include "behaviorkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bk {

namespace {

int true_class(const PredictionRecord& p) {
  int cls = -1;
  for (std::size_t c = 0; c < p.ground_truth.size(); ++c) {
    if (p.ground_truth[c] == 1) {
      if (cls >= 0) throw std::invalid_argument("single-label record with multiple positives");
      cls = static_cast<int>(c);
    }
  }
  if (cls < 0) throw std::invalid_argument("single-label record without a positive");
  return cls;
}

int argmax_lowest(const std::vector<double>& scores) {
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

}  // namespace

double top1_accuracy(const std::vector<PredictionRecord>& preds) {
  if (preds.empty()) throw std::invalid_argument("top1_accuracy: empty prediction list");
  std::size_t correct = 0;
  for (const auto& p : preds) correct += argmax_lowest(p.scores) == true_class(p);
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double class_average_accuracy(const std::vector<PredictionRecord>& preds) {
  if (preds.empty()) throw std::invalid_argument("class_average_accuracy: empty prediction list");
  std::map<int, std::pair<int64_t, int64_t>> per_class;  // class -> (correct, total)
  for (const auto& p : preds) {
    const int truth = true_class(p);
    auto& [correct, total] = per_class[truth];
    correct += argmax_lowest(p.scores) == truth;
    total += 1;
  }
  double sum = 0.0;
  for (const auto& [cls, stats] : per_class)
    sum += static_cast<double>(stats.first) / static_cast<double>(stats.second);
  return sum / static_cast<double>(per_class.size());
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels,
                         const std::vector<std::string>& sample_ids) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("average_precision: scores/labels length mismatch");
  const std::size_t n = scores.size();
  const int64_t positives = std::accumulate(labels.begin(), labels.end(), int64_t{0});
  if (positives < 1) throw std::invalid_argument("average_precision: no positive labels");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (!sample_ids.empty()) return sample_ids[a] < sample_ids[b];
    return false;  // stable sort keeps input order on full ties
  });

  // Raw precision at each rank, then the monotone (max-to-the-right)
  // envelope, averaged over positive ranks.
  std::vector<double> precision(n);
  int64_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    hits += labels[order[k]];
    precision[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  for (std::size_t k = n - 1; k-- > 0;) precision[k] = std::max(precision[k], precision[k + 1]);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (labels[order[k]] == 1) sum += precision[k];
  return sum / static_cast<double>(positives);
}

MetricsReport ava_map(const std::vector<PredictionRecord>& preds,
                      const std::vector<std::string>& class_names,
                      const std::map<std::string, std::string>& group_of_class) {
  if (preds.empty()) throw std::invalid_argument("ava_map: empty prediction list");
  const std::size_t num_classes = class_names.size();
  for (const auto& p : preds)
    if (p.scores.size() != num_classes || p.ground_truth.size() != num_classes)
      throw std::invalid_argument("ava_map: record width does not match class list");

  MetricsReport report;
  report.per_class.assign(num_classes, -1.0);
  std::map<std::string, std::pair<double, int>> group_acc;
  double ap_sum = 0.0;
  int ap_count = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<double> scores(preds.size());
    std::vector<int> labels(preds.size());
    std::vector<std::string> ids(preds.size());
    bool any_positive = false;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      scores[i] = preds[i].scores[c];
      labels[i] = preds[i].ground_truth[c];
      ids[i] = preds[i].sample_id;
      any_positive |= labels[i] == 1;
    }
    if (!any_positive) {
      report.skipped_classes.push_back(class_names[c]);
      continue;
    }
    const double ap = average_precision(scores, labels, ids);
    report.per_class[c] = ap;
    ap_sum += ap;
    ++ap_count;
    auto it = group_of_class.find(class_names[c]);
    if (it != group_of_class.end()) {
      auto& [sum, count] = group_acc[it->second];
      sum += ap;
      count += 1;
    }
  }
  if (ap_count == 0) throw std::invalid_argument("ava_map: no class has a positive label");
  report.mAP = ap_sum / ap_count;
  for (const auto& [group, acc] : group_acc)
    report.group_mAP[group] = acc.first / acc.second;
  return report;
}

MetricsReport accuracy_report(const std::vector<PredictionRecord>& preds, int num_classes) {
  MetricsReport report;
  report.top1 = top1_accuracy(preds);
  report.class_avg = class_average_accuracy(preds);
  report.per_class.assign(static_cast<std::size_t>(num_classes), -1.0);
  std::map<int, std::pair<int64_t, int64_t>> per_class;
  for (const auto& p : preds) {
    const int truth = true_class(p);
    auto& [correct, total] = per_class[truth];
    correct += argmax_lowest(p.scores) == truth;
    total += 1;
  }
  for (const auto& [cls, stats] : per_class)
    report.per_class[static_cast<std::size_t>(cls)] =
        static_cast<double>(stats.first) / static_cast<double>(stats.second);
  return report;
}

}  // namespace bk
