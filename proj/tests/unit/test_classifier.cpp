#include <doctest.h>

#include <cmath>
#include <cstring>

#include "behaviorkit/classifier.hpp"

using namespace bk;

namespace {

EncoderConfig tiny_config() { return EncoderConfig{8, 32, {2, 8, 8}, 64, 4, 4, 2, 32}; }

nn::Mat random_tokens(int n, int d, uint64_t seed) {
  nn::Mat h(n, d);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
  return h;
}

std::vector<EmbeddedSample> separable_samples(int count, int n, int d, int classes,
                                              uint64_t seed) {
  // Class c shifts a fixed random direction; easily separable.
  std::vector<nn::Mat> directions;
  for (int c = 0; c < classes; ++c) directions.push_back(random_tokens(1, d, 1000 + c));
  std::vector<EmbeddedSample> out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const int cls = i % classes;
    EmbeddedSample s;
    s.sample_id = "s" + std::to_string(i);
    s.tokens = random_tokens(n, d, seed + 7 * i);
    s.tokens.rowwise() += 2.5 * directions[static_cast<std::size_t>(cls)].row(0);
    s.label.assign(static_cast<std::size_t>(classes), 0);
    s.label[static_cast<std::size_t>(cls)] = 1;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("classify softmax normalizes and zero head weights give uniform output") {
  Rng rng(3);
  ClassifierParams p = make_classifier(HeadVariant::kAttentionOnly, 64, 4, 9, rng);
  const nn::Mat h = random_tokens(16, 64, 5);
  const nn::Vec probs = classify(p, h, TaskKind::kSingle);
  CHECK(probs.size() == 9);
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-6));

  p.head.W.setZero();
  p.head.b.setZero();
  const nn::Vec uniform = classify(p, h, TaskKind::kSingle);
  for (int c = 0; c < 9; ++c) CHECK(uniform(c) == doctest::Approx(1.0 / 9).epsilon(1e-12));

  const nn::Vec sig = classify(p, h, TaskKind::kMulti);
  for (int c = 0; c < 9; ++c) {
    CHECK(sig(c) > 0.0);
    CHECK(sig(c) < 1.0);
  }
}

TEST_CASE("single-token attention reduces to the value path (hand oracle)") {
  // One token: the softmax over a single key is forced to 1, so
  // z = Wo (Wv h0 + bv) + bo regardless of q and Wk.
  const int d = 4;
  Rng rng(9);
  ClassifierParams p = make_classifier(HeadVariant::kAttentionOnly, d, 2, 3, rng);
  const nn::Mat h = random_tokens(1, d, 14);

  const nn::Vec v0 = (p.wv.W * h.row(0).transpose() + p.wv.b.col(0));
  const nn::Vec expect_z = p.wo.W * v0 + p.wo.b.col(0);
  const nn::Vec expect_logits = p.head.W * expect_z + p.head.b.col(0);

  const nn::Vec got = classifier_logits(p, h);
  for (int c = 0; c < 3; ++c) CHECK(got(c) == doctest::Approx(expect_logits(c)).epsilon(1e-12));
}

TEST_CASE("classify is invariant under token order permutation") {
  Rng rng(21);
  for (HeadVariant variant : {HeadVariant::kAttentionOnly, HeadVariant::kFullBlock}) {
    ClassifierParams p = make_classifier(variant, 32, 4, 5, rng);
    const nn::Mat h = random_tokens(12, 32, 77);
    nn::Mat shuffled(12, 32);
    const int perm[12] = {7, 3, 11, 0, 5, 9, 1, 10, 2, 8, 4, 6};
    for (int r = 0; r < 12; ++r) shuffled.row(r) = h.row(perm[r]);
    const nn::Vec a = classify(p, h, TaskKind::kSingle);
    const nn::Vec b = classify(p, shuffled, TaskKind::kSingle);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("softmax head is shift-invariant in the logits") {
  Rng rng(13);
  ClassifierParams p = make_classifier(HeadVariant::kAttentionOnly, 32, 4, 4, rng);
  const nn::Mat h = random_tokens(6, 32, 3);
  const nn::Vec base = classify(p, h, TaskKind::kSingle);
  ClassifierParams shifted = p;
  shifted.head.b.array() += 3.7;  // adds the same constant to every logit
  const nn::Vec moved = classify(shifted, h, TaskKind::kSingle);
  CHECK((base - moved).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("loss_single examples") {
  nn::Vec exact(3);
  exact << 1.0, 0.0, 0.0;
  CHECK(loss_single(exact, {1, 0, 0}) == doctest::Approx(0.0).epsilon(1e-6));

  nn::Vec uniform9 = nn::Vec::Constant(9, 1.0 / 9);
  CHECK(loss_single(uniform9, {0, 0, 0, 1, 0, 0, 0, 0, 0}) ==
        doctest::Approx(std::log(9.0)).epsilon(1e-12));

  nn::Vec p(3);
  p << 0.7, 0.2, 0.1;
  CHECK(loss_single(p, {1, 0, 0}) == doctest::Approx(-std::log(0.7)).epsilon(1e-12));
  CHECK_THROWS_AS(loss_single(p, {1, 1, 0}), std::invalid_argument);
}

TEST_CASE("loss_multi examples and per-class decomposition") {
  nn::Vec half = nn::Vec::Constant(2, 0.5);
  CHECK(loss_multi(half, {1, 0}) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  nn::Vec exact(2);
  exact << 1.0, 0.0;
  CHECK(loss_multi(exact, {1, 0}) <= 2 * 1.1e-7);

  nn::Vec p(2);
  p << 0.9, 0.1;
  CHECK(loss_multi(p, {1, 0}) == doctest::Approx(-2.0 * std::log(0.9)).epsilon(1e-12));

  // decomposition: equals the sum of C independent binary cross entropies
  Rng rng(5);
  nn::Vec q(6);
  std::vector<int> y(6);
  for (int c = 0; c < 6; ++c) {
    q(c) = rng.uniform(0.05, 0.95);
    y[static_cast<std::size_t>(c)] = rng.uniform() < 0.5 ? 0 : 1;
  }
  double sum = 0.0;
  for (int c = 0; c < 6; ++c) {
    nn::Vec qc(1);
    qc << q(c);
    sum += loss_multi(qc, {y[static_cast<std::size_t>(c)]});
  }
  CHECK(loss_multi(q, y) == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("head gradient matches central finite differences") {
  Rng rng(70);
  const int d = 16, n = 5;
  for (HeadVariant variant : {HeadVariant::kAttentionOnly, HeadVariant::kFullBlock}) {
    for (TaskKind task : {TaskKind::kSingle, TaskKind::kMulti}) {
      ClassifierParams p = make_classifier(variant, d, 2, 3, rng);
      const nn::Mat h = random_tokens(n, d, 31);
      const std::vector<int> label = task == TaskKind::kSingle ? std::vector<int>{0, 1, 0}
                                                               : std::vector<int>{1, 0, 1};

      ClassifierParams grad = p;
      visit_params(grad, "", [](const std::string&, nn::Mat& m) { m.setZero(); });
      classifier_loss_grad(p, h, label, task, grad);

      auto loss_of = [&]() {
        const nn::Vec probs = classify(p, h, task);
        return task == TaskKind::kSingle ? loss_single(probs, label)
                                         : loss_multi(probs, label);
      };

      std::vector<nn::Mat*> params_flat;
      std::vector<const nn::Mat*> grads_flat;
      visit_params(p, "", [&](const std::string&, nn::Mat& m) { params_flat.push_back(&m); });
      visit_params(grad, "",
                   [&](const std::string&, const nn::Mat& m) { grads_flat.push_back(&m); });

      const double eps = 1e-4;
      Rng pick(91);
      int checked = 0;
      while (checked < 10) {
        const auto e = static_cast<std::size_t>(
            pick.uniform_int(static_cast<int64_t>(params_flat.size())));
        nn::Mat& mat = *params_flat[e];
        if (mat.size() == 0) continue;
        const auto k = static_cast<Eigen::Index>(pick.uniform_int(mat.size()));
        const double analytic = grads_flat[e]->data()[k];
        const double saved = mat.data()[k];
        mat.data()[k] = saved + eps;
        const double up = loss_of();
        mat.data()[k] = saved - eps;
        const double down = loss_of();
        mat.data()[k] = saved;
        const double numeric = (up - down) / (2 * eps);
        // entries this small are cancellation noise at 64-bit, not signal
        if (std::abs(analytic) < 1e-6 && std::abs(numeric) < 1e-6) continue;
        const double rel = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric), 1e-9});
        CHECK(rel < 1e-3);
        ++checked;
      }
    }
  }
}

TEST_CASE("train_probe learns separable data, early-stops, returns best params") {
  const auto train = separable_samples(60, 8, 16, 3, 11);
  const auto val = separable_samples(30, 8, 16, 3, 222);
  ProbeConfig cfg;
  cfg.epochs = 20;
  cfg.patience = 4;
  cfg.batch_size = 16;
  cfg.lr = 5e-3;
  const ProbeResult result = train_probe(train, val, TaskKind::kSingle, 16, 2, 3, cfg, 5);

  CHECK(result.best_val_metric > 0.9);
  // returned params achieve the recorded best metric on the val split
  const auto preds = predict_probe(result.params, val, TaskKind::kSingle);
  CHECK(top1_accuracy(preds) == doctest::Approx(result.best_val_metric));
  // early stopping reports the max of the history
  double max_metric = -1.0;
  for (const auto& row : result.history) max_metric = std::max(max_metric, row.val_metric);
  CHECK(result.best_val_metric == doctest::Approx(max_metric));
  CHECK(result.best_epoch <= result.history.back().epoch);
}

TEST_CASE("head parameter counts at the published scale") {
  Rng rng(1);
  ClassifierParams attn = make_classifier(HeadVariant::kAttentionOnly, 1024, 16, 10, rng);
  ClassifierParams block = make_classifier(HeadVariant::kFullBlock, 1024, 16, 10, rng);
  const double attn_m = static_cast<double>(param_count(attn)) / 1e6;
  const double block_m = static_cast<double>(param_count(block)) / 1e6;
  CHECK(std::abs(attn_m - 4.0) < 0.5);    // ~4M
  CHECK(std::abs(block_m - 12.0) < 1.0);  // ~12M, a third of which is the attention head
  CHECK(block_m / attn_m > 2.5);
}

TEST_CASE("embedding cache round-trips") {
  const auto samples = separable_samples(10, 6, 16, 2, 77);
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "bk_test_embed_cache";
  std::filesystem::remove_all(dir);
  save_embedding_cache(dir, samples, 16);
  const auto loaded = load_embedding_cache(dir);
  REQUIRE(loaded.has_value());
  REQUIRE(loaded->size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK((*loaded)[i].sample_id == samples[i].sample_id);
    CHECK((*loaded)[i].label == samples[i].label);
    CHECK(std::memcmp((*loaded)[i].tokens.data(), samples[i].tokens.data(),
                      sizeof(double) * static_cast<std::size_t>(samples[i].tokens.size())) == 0);
  }
  std::filesystem::remove_all(dir);
  CHECK(!load_embedding_cache(dir).has_value());
}

TEST_CASE("adapters: geometry, shape contracts and error paths") {
  const EncoderConfig cfg = tiny_config();
  VideoModel model = VideoModel::init(cfg, 4);
  AdapterConfig adapter;
  adapter.pipeline.crop_size = cfg.image_size;
  adapter.pipeline.segment_frames = 16;
  adapter.pipeline.temporal_stride = 2;

  // Moving square: bright 48x48 video, 8 frames, square sliding right.
  VideoSnippet video = make_snippet(32, 48, 48, 8.0, "mv");
  std::vector<BoundingBox> boxes;
  for (int t = 0; t < 32; ++t) {
    const double cx = 8.0 + t * 1.0;
    const double cy = 24.0;
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x) {
        const bool inside = std::abs(x + 0.5 - cx) <= 4 && std::abs(y + 0.5 - cy) <= 4;
        for (int c = 0; c < 3; ++c) video.at(t, y, x, c) = inside ? 230 : 20;
      }
    boxes.push_back({cx - 4, cy - 4, cx + 4, cy + 4});
  }

  LabeledSample sample;
  sample.sample_id = "mv_s0";
  sample.source_id = "mv";
  sample.task = TaskKind::kSingle;
  sample.start_frame = 0;
  sample.boxes.assign(boxes.begin(), boxes.begin() + 8);
  sample.label = {1, 0};

  VideoSnippet snippet = video;
  snippet.frames = 8;
  snippet.data.resize(static_cast<std::size_t>(8) * video.frame_bytes());

  const TokenSequence h =
      embed_snippet_task(sample, snippet, cfg, model.target, model.pos_enc, adapter);
  CHECK(h.tokens.rows() == cfg.token_count());
  CHECK(h.tokens.cols() == cfg.dim);
  CHECK(h.tokens.allFinite());

  // union covers the motion extent: crop of the union box contains every
  // bright pixel of every frame
  const BoundingBox u = union_bboxes(sample.boxes);
  CHECK(u.x0 == doctest::Approx(4.0));
  CHECK(u.x1 == doctest::Approx(19.0));
  for (int t = 0; t < 8; ++t)
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x)
        if (snippet.at(t, y, x, 0) > 128) {
          CHECK(x + 0.5 >= u.x0);
          CHECK(x + 0.5 <= u.x1);
          CHECK(y + 0.5 >= u.y0);
          CHECK(y + 0.5 <= u.y1);
        }

  // identical boxes: the union equals the box itself
  LabeledSample still = sample;
  still.boxes.assign(8, BoundingBox{10, 10, 30, 30});
  CHECK(union_bboxes(still.boxes) == BoundingBox{10, 10, 30, 30});

  // error paths
  LabeledSample no_boxes = sample;
  no_boxes.boxes.clear();
  CHECK_THROWS_AS(
      embed_snippet_task(no_boxes, snippet, cfg, model.target, model.pos_enc, adapter),
      std::invalid_argument);
  CHECK_THROWS_AS(embed_snippet_task(sample, video, cfg, model.target, model.pos_enc, adapter),
                  std::invalid_argument);  // 32 frames != model frames

  // frame-wise adapter: shape contract and boundary shift via
  // centered_window
  LabeledSample frame_sample;
  frame_sample.sample_id = "mv_f0";
  frame_sample.source_id = "mv";
  frame_sample.task = TaskKind::kMulti;
  frame_sample.t = 0.1;  // near the start: window shifts inside
  frame_sample.boxes = {BoundingBox{6, 18, 22, 30}};
  frame_sample.label = {1, 0};
  Rng rng(12);
  const TokenSequence hf = embed_frame_task(frame_sample, video, cfg, model.target,
                                            model.pos_enc, adapter, rng);
  CHECK(hf.tokens.rows() == cfg.token_count());
  CHECK(hf.tokens.cols() == cfg.dim);

  LabeledSample bad_t = frame_sample;
  bad_t.t = 99.0;
  CHECK_THROWS_AS(
      embed_frame_task(bad_t, video, cfg, model.target, model.pos_enc, adapter, rng),
      std::invalid_argument);
}

TEST_CASE("probe training leaves the backbone untouched") {
  const EncoderConfig cfg = tiny_config();
  VideoModel model = VideoModel::init(cfg, 8);
  std::vector<double> before;
  visit_params(model.target, "", [&](const std::string&, const nn::Mat& m) {
    before.insert(before.end(), m.data(), m.data() + m.size());
  });

  // Embed a few samples through the frozen encoder, then train the head.
  AdapterConfig adapter;
  adapter.pipeline.crop_size = cfg.image_size;
  std::vector<EmbeddedSample> train, val;
  for (int i = 0; i < 12; ++i) {
    VideoTensor v;
    v.frames = cfg.frames;
    v.height = cfg.image_size;
    v.width = cfg.image_size;
    v.data.resize(static_cast<std::size_t>(cfg.frames) * cfg.image_size * cfg.image_size * 3);
    Rng rng(40 + i);
    for (auto& x : v.data) x = rng.normal() + (i % 2 ? 1.0 : -1.0);
    const TokenSequence h = encode_full(v, cfg, model.target, model.pos_enc);
    EmbeddedSample s{"p" + std::to_string(i), h.tokens, {i % 2, 1 - i % 2}};
    (i < 8 ? train : val).push_back(std::move(s));
  }
  ProbeConfig pc;
  pc.epochs = 3;
  train_probe(train, val, TaskKind::kSingle, cfg.dim, cfg.heads, 2, pc, 3);

  std::vector<double> after;
  visit_params(model.target, "", [&](const std::string&, const nn::Mat& m) {
    after.insert(after.end(), m.data(), m.data() + m.size());
  });
  CHECK(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);
}
