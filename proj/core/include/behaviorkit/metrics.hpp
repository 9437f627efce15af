#pragma once

#include <map>
#include <string>
#include <vector>

namespace bk {

// One scored sample. `ground_truth` is one-hot for the single-label
// protocol, multi-hot for the multi-label one.
struct PredictionRecord {
  std::string sample_id;
  std::vector<double> scores;
  std::vector<int> ground_truth;
};

struct MetricsReport {
  double top1 = -1.0;
  double class_avg = -1.0;
  std::vector<double> per_class;  // accuracy (single) or AP (multi)
  double mAP = -1.0;
  std::map<std::string, double> group_mAP;
  std::vector<std::string> skipped_classes;  // zero positives in ground truth
};

// Fraction of samples whose argmax matches the true class; argmax ties go to
// the lowest class index.
double top1_accuracy(const std::vector<PredictionRecord>& preds);

// Unweighted mean of per-class accuracies over classes that appear in the
// ground truth.
double class_average_accuracy(const std::vector<PredictionRecord>& preds);

// AVA-style average precision for one class: descending-score sweep with
// monotone precision interpolation, averaged over positives. Ties are broken
// by a stable sort on sample id.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels,
                         const std::vector<std::string>& sample_ids = {});

// Mean AP over classes with at least one positive; group mAPs average only
// the classes mapped to that group.
MetricsReport ava_map(const std::vector<PredictionRecord>& preds,
                      const std::vector<std::string>& class_names,
                      const std::map<std::string, std::string>& group_of_class);

// Single-label protocol report: Top-1 plus class-average accuracy.
MetricsReport accuracy_report(const std::vector<PredictionRecord>& preds, int num_classes);

}  // namespace bk
