#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "behaviorkit/common.hpp"
#include "behaviorkit/metrics.hpp"

using namespace bk;

namespace {

PredictionRecord rec(const std::string& id, std::vector<double> scores, int true_class,
                     int classes) {
  PredictionRecord r;
  r.sample_id = id;
  r.scores = std::move(scores);
  r.ground_truth.assign(static_cast<std::size_t>(classes), 0);
  r.ground_truth[static_cast<std::size_t>(true_class)] = 1;
  return r;
}

// Independent AP oracle: build the full PR curve, apply the Pascal/AVA
// max-to-the-right precision envelope explicitly, then integrate
// sum p_interp * delta_recall. Algebraically equal to averaging the
// interpolated precision over positives, computed via a different route.
double ap_oracle(std::vector<double> scores, std::vector<int> labels,
                 std::vector<std::string> ids) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  const double positives = static_cast<double>(
      std::count(labels.begin(), labels.end(), 1));
  std::vector<double> precision, recall;
  double tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += labels[order[k]];
    precision.push_back(tp / static_cast<double>(k + 1));
    recall.push_back(tp / positives);
  }
  // envelope
  for (std::size_t k = n - 1; k-- > 0;)
    precision[k] = std::max(precision[k], precision[k + 1]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ap += precision[k] * (recall[k] - prev_recall);
    prev_recall = recall[k];
  }
  return ap;
}

}  // namespace

TEST_CASE("top1 accuracy examples and tie rule") {
  std::vector<PredictionRecord> preds{
      rec("a", {0.9, 0.1}, 0, 2),
      rec("b", {0.2, 0.8}, 1, 2),
      rec("c", {0.6, 0.4}, 0, 2),
      rec("d", {0.7, 0.3}, 1, 2),  // wrong
  };
  CHECK(top1_accuracy(preds) == doctest::Approx(0.75));

  std::vector<PredictionRecord> all_right{rec("a", {1, 0}, 0, 2), rec("b", {0, 1}, 1, 2)};
  CHECK(top1_accuracy(all_right) == 1.0);

  // equal scores: argmax tie goes to the lowest class index
  std::vector<PredictionRecord> tie{rec("t", {0.5, 0.5, 0.5}, 0, 3)};
  CHECK(top1_accuracy(tie) == 1.0);
  std::vector<PredictionRecord> tie_wrong{rec("t", {0.5, 0.5, 0.5}, 2, 3)};
  CHECK(top1_accuracy(tie_wrong) == 0.0);

  CHECK_THROWS_AS(top1_accuracy({}), std::invalid_argument);
}

TEST_CASE("class-average accuracy examples") {
  // class A: 2/2, class B: 1/2 -> (1.0 + 0.5)/2
  std::vector<PredictionRecord> preds{
      rec("a1", {0.9, 0.1}, 0, 2),
      rec("a2", {0.8, 0.2}, 0, 2),
      rec("b1", {0.1, 0.9}, 1, 2),
      rec("b2", {0.9, 0.1}, 1, 2),
  };
  CHECK(class_average_accuracy(preds) == doctest::Approx(0.75));

  // one class only: equals top-1
  std::vector<PredictionRecord> one{rec("a", {0.9, 0.1}, 0, 2), rec("b", {0.2, 0.8}, 0, 2)};
  CHECK(class_average_accuracy(one) == doctest::Approx(top1_accuracy(one)));

  // classes absent from the ground truth are excluded from the mean
  std::vector<PredictionRecord> absent{rec("a", {0.9, 0.05, 0.05}, 0, 3),
                                       rec("b", {0.1, 0.8, 0.1}, 1, 3)};
  CHECK(class_average_accuracy(absent) == doctest::Approx(1.0));
}

TEST_CASE("top1 and class-average agree on class-balanced sets") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    // mirrored outcomes: class 1 repeats class 0's correctness pattern, so
    // per-class accuracies are equal and both metrics must coincide
    std::vector<PredictionRecord> preds;
    const int per_class = 6;
    for (int i = 0; i < per_class; ++i) {
      const bool right = rng.uniform() < 0.6;
      preds.push_back(rec("a" + std::to_string(i),
                          {right ? 0.9 : 0.1, right ? 0.1 : 0.9}, 0, 2));
      preds.push_back(rec("b" + std::to_string(i),
                          {right ? 0.1 : 0.9, right ? 0.9 : 0.1}, 1, 2));
    }
    CHECK(top1_accuracy(preds) == doctest::Approx(class_average_accuracy(preds)));
  }
}

TEST_CASE("average precision: hand-derived fixtures") {
  // (1/1 + 2/3)/2 = 0.8333...
  CHECK(average_precision({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}, {"a", "b", "c", "d"}) ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-12));

  // perfect ranking of 2 positives above 2 negatives
  CHECK(average_precision({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));

  // reversed perfect ranking, single positive at rank 4 -> 0.25
  CHECK(average_precision({0.1, 0.5, 0.6, 0.7}, {1, 0, 0, 0}) == doctest::Approx(0.25));

  CHECK_THROWS_AS(average_precision({0.5, 0.5}, {0, 0}), std::invalid_argument);
}

TEST_CASE("average precision equals the brute-force PR-curve oracle") {
  Rng rng(2025);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(49));
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<std::string> ids;
    int positives = 0;
    for (int i = 0; i < n; ++i) {
      // coarse scores so ties happen often
      scores.push_back(std::round(rng.uniform() * 8.0) / 8.0);
      labels.push_back(rng.uniform() < 0.4 ? 1 : 0);
      ids.push_back("s" + std::to_string(i));
      positives += labels.back();
    }
    if (positives == 0) {
      labels[0] = 1;
    }
    const double got = average_precision(scores, labels, ids);
    const double expect = ap_oracle(scores, labels, ids);
    CHECK(std::abs(got - expect) < 1e-9);
  }
}

TEST_CASE("AP is invariant under strictly monotone score transforms") {
  Rng rng(10);
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) {
    scores.push_back(rng.uniform(-2, 2));
    labels.push_back(rng.uniform() < 0.5 ? 1 : 0);
    ids.push_back("m" + std::to_string(i));
  }
  labels[3] = 1;
  const double base = average_precision(scores, labels, ids);
  std::vector<double> warped = scores;
  for (auto& s : warped) s = std::exp(2.0 * s) + 5.0;
  CHECK(average_precision(warped, labels, ids) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("removing a correctly-ranked bottom negative never decreases AP") {
  Rng rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<std::string> ids;
    for (int i = 0; i < 12; ++i) {
      scores.push_back(rng.uniform(0.1, 0.9));
      labels.push_back(rng.uniform() < 0.5 ? 1 : 0);
      ids.push_back("r" + std::to_string(i));
    }
    labels[0] = 1;
    // append one negative ranked strictly below everything
    std::vector<double> with_neg = scores;
    std::vector<int> labels_neg = labels;
    std::vector<std::string> ids_neg = ids;
    with_neg.push_back(0.01);
    labels_neg.push_back(0);
    ids_neg.push_back("bottom");
    CHECK(average_precision(scores, labels, ids) >=
          average_precision(with_neg, labels_neg, ids_neg) - 1e-12);
  }
}

TEST_CASE("ava_map: examples, groups, skipping and per-class score rescaling") {
  // records over 4 classes; class 3 has no positives and is skipped
  std::vector<PredictionRecord> preds;
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    PredictionRecord r;
    r.sample_id = "v" + std::to_string(i);
    for (int c = 0; c < 4; ++c) r.scores.push_back(rng.uniform());
    r.ground_truth = {rng.uniform() < 0.4, rng.uniform() < 0.3, rng.uniform() < 0.5, 0};
    preds.push_back(std::move(r));
  }
  preds[0].ground_truth = {1, 1, 1, 0};
  const std::vector<std::string> names{"walk", "hang", "groom", "never"};
  const std::map<std::string, std::string> groups{{"walk", "Locomotion"},
                                                  {"hang", "Locomotion"},
                                                  {"groom", "Social"},
                                                  {"never", "Other"}};
  const MetricsReport report = ava_map(preds, names, groups);
  REQUIRE(report.skipped_classes == std::vector<std::string>{"never"});
  // mAP is the unweighted mean of the three computed APs
  const double expect =
      (report.per_class[0] + report.per_class[1] + report.per_class[2]) / 3.0;
  CHECK(report.mAP == doctest::Approx(expect).epsilon(1e-12));
  // group with a single class equals that class AP
  CHECK(report.group_mAP.at("Social") == doctest::Approx(report.per_class[2]).epsilon(1e-12));
  CHECK(report.group_mAP.at("Locomotion") ==
        doctest::Approx((report.per_class[0] + report.per_class[1]) / 2.0).epsilon(1e-12));
  CHECK(report.group_mAP.count("Other") == 0);

  // per-class rescaling leaves mAP unchanged (classes rank independently)
  std::vector<PredictionRecord> scaled = preds;
  for (auto& r : scaled) {
    r.scores[0] = r.scores[0] * 7.0 + 3.0;
    r.scores[2] = r.scores[2] * 0.01;
  }
  CHECK(ava_map(scaled, names, groups).mAP == doctest::Approx(report.mAP).epsilon(1e-12));

  // two classes with APs .6 and .8 -> .7 (constructed)
  std::vector<PredictionRecord> two;
  auto add = [&](const std::string& id, double s0, int y0, double s1, int y1) {
    PredictionRecord r;
    r.sample_id = id;
    r.scores = {s0, s1};
    r.ground_truth = {y0, y1};
    two.push_back(std::move(r));
  };
  // class 0: ranking pos,neg,pos,neg -> (1 + 2/3)/2 = 5/6
  // class 1: ranking pos,neg,neg,pos -> (1 + 1/2)/2 = 3/4
  add("a", 0.9, 1, 0.9, 1);
  add("b", 0.8, 0, 0.8, 0);
  add("c", 0.7, 1, 0.7, 0);
  add("d", 0.6, 0, 0.6, 1);
  const MetricsReport r2 = ava_map(two, {"x", "y"}, {});
  CHECK(r2.mAP == doctest::Approx((5.0 / 6.0 + 3.0 / 4.0) / 2.0).epsilon(1e-12));

  CHECK_THROWS_AS(ava_map({}, names, groups), std::invalid_argument);
}

TEST_CASE("metric computations are deterministic across repeated calls") {
  Rng rng(6);
  std::vector<PredictionRecord> preds;
  for (int i = 0; i < 25; ++i) {
    PredictionRecord r;
    r.sample_id = "d" + std::to_string(i);
    for (int c = 0; c < 3; ++c) r.scores.push_back(rng.uniform());
    r.ground_truth = {0, 0, 0};
    r.ground_truth[static_cast<std::size_t>(rng.uniform_int(3))] = 1;
    preds.push_back(std::move(r));
  }
  CHECK(top1_accuracy(preds) == top1_accuracy(preds));
  CHECK(class_average_accuracy(preds) == class_average_accuracy(preds));
  const MetricsReport a = ava_map(preds, {"p", "q", "r"}, {});
  const MetricsReport b = ava_map(preds, {"p", "q", "r"}, {});
  CHECK(a.mAP == b.mAP);
  CHECK(a.per_class == b.per_class);
}
