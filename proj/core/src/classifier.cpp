#include "behaviorkit/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "behaviorkit/metrics.hpp"
#include "json_util.hpp"

namespace bk {

namespace {
constexpr double kProbEps = 1e-7;  // clamp inside both losses, avoids log(0)
}

ClassifierParams make_classifier(HeadVariant variant, int dim, int heads, int num_classes,
                                 Rng& rng) {
  if (num_classes < 2) throw std::invalid_argument("make_classifier: need at least two classes");
  if (dim % heads != 0)
    throw std::invalid_argument("make_classifier: head count must divide dim");
  ClassifierParams p;
  p.variant = variant;
  p.heads = heads;
  p.query.resize(dim, 1);
  for (Eigen::Index i = 0; i < dim; ++i) p.query(i, 0) = rng.trunc_normal(0.02, 0.04);
  p.wq = nn::make_linear(dim, dim, rng);
  p.wk = nn::make_linear(dim, dim, rng);
  p.wv = nn::make_linear(dim, dim, rng);
  p.wo = nn::make_linear(dim, dim, rng);
  p.head = nn::make_linear(num_classes, dim, rng);
  if (variant == HeadVariant::kFullBlock) {
    p.ln_kv = nn::make_layernorm(dim);
    p.ln_mlp = nn::make_layernorm(dim);
    p.mlp.fc1 = nn::make_linear(4 * dim, dim, rng);
    p.mlp.fc2 = nn::make_linear(dim, 4 * dim, rng);
  }
  return p;
}

int64_t param_count(const ClassifierParams& p) {
  int64_t n = 0;
  visit_params(p, "", [&](const std::string&, const nn::Mat& m) { n += m.size(); });
  return n;
}

namespace {

struct HeadCache {
  nn::Mat kv_in;  // N x d (post-LN for the full block)
  nn::LnCache ln_kv;
  nn::Mat q, k, v;      // 1 x d, N x d, N x d
  nn::Mat attn;         // heads x N softmax rows
  nn::Mat ctx;          // 1 x d concatenated head outputs
  nn::Mat attn_out;     // 1 x d
  nn::Mat z1;           // post-residual (full block) or attn_out
  nn::LnCache ln_mlp;
  nn::Mat ln_mlp_out;
  nn::Mat fc1_out;
  nn::Mat act;
  nn::Mat z;  // final feature fed to the linear head
};

nn::Mat head_features(const ClassifierParams& p, const nn::Mat& h, HeadCache& cache) {
  const Eigen::Index d = p.query.rows();
  if (h.cols() != d)
    throw std::invalid_argument("classifier: token dim does not match parameters");
  if (h.rows() < 1) throw std::invalid_argument("classifier: empty token sequence");
  const int heads = p.heads;
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.kv_in = p.variant == HeadVariant::kFullBlock
                    ? nn::layernorm_fwd(p.ln_kv, h, cache.ln_kv)
                    : h;
  const nn::Mat qrow = p.query.col(0).transpose();
  cache.q = nn::linear_fwd(p.wq, qrow);
  cache.k = nn::linear_fwd(p.wk, cache.kv_in);
  cache.v = nn::linear_fwd(p.wv, cache.kv_in);

  cache.attn.resize(heads, h.rows());
  cache.ctx.resize(1, d);
  for (int hd = 0; hd < heads; ++hd) {
    nn::Mat s = cache.q.middleCols(hd * dh, dh) * cache.k.middleCols(hd * dh, dh).transpose();
    s *= scale;
    nn::softmax_rows(s);
    cache.attn.row(hd) = s.row(0);
    cache.ctx.middleCols(hd * dh, dh).noalias() =
        cache.attn.row(hd) * cache.v.middleCols(hd * dh, dh);
  }
  cache.attn_out = nn::linear_fwd(p.wo, cache.ctx);

  if (p.variant == HeadVariant::kAttentionOnly) {
    cache.z = cache.attn_out;
    return cache.z;
  }
  cache.z1 = qrow + cache.attn_out;
  cache.ln_mlp_out = nn::layernorm_fwd(p.ln_mlp, cache.z1, cache.ln_mlp);
  cache.fc1_out = nn::linear_fwd(p.mlp.fc1, cache.ln_mlp_out);
  cache.act = nn::gelu_fwd(cache.fc1_out);
  cache.z = cache.z1 + nn::linear_fwd(p.mlp.fc2, cache.act);
  return cache.z;
}

// Accumulates head-parameter gradients for one sample; embeddings are fixed
// inputs so no gradient flows back into h.
void head_bwd(const ClassifierParams& p, const HeadCache& cache, const nn::Mat& dlogits,
              ClassifierParams& grad) {
  const Eigen::Index d = p.query.rows();
  const int heads = p.heads;
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  nn::Mat dz = nn::linear_bwd(p.head, cache.z, dlogits, grad.head);
  nn::Mat dattn_out;
  nn::Mat dkv_in = nn::Mat::Zero(cache.kv_in.rows(), cache.kv_in.cols());
  if (p.variant == HeadVariant::kFullBlock) {
    const nn::Mat dact = nn::linear_bwd(p.mlp.fc2, cache.act, dz, grad.mlp.fc2);
    const nn::Mat dfc1 = nn::gelu_bwd(cache.fc1_out, dact);
    const nn::Mat dln = nn::linear_bwd(p.mlp.fc1, cache.ln_mlp_out, dfc1, grad.mlp.fc1);
    const nn::Mat dz1 = dz + nn::layernorm_bwd(p.ln_mlp, cache.ln_mlp, dln, grad.ln_mlp);
    dattn_out = dz1;
    grad.query.col(0).noalias() += dz1.row(0).transpose();  // residual path
  } else {
    dattn_out = dz;
  }

  const nn::Mat dctx = nn::linear_bwd(p.wo, cache.ctx, dattn_out, grad.wo);
  nn::Mat dq(1, d);
  for (int hd = 0; hd < heads; ++hd) {
    const auto kh = cache.k.middleCols(hd * dh, dh);
    const auto vh = cache.v.middleCols(hd * dh, dh);
    const nn::Mat a = cache.attn.row(hd);
    const auto dctx_h = dctx.middleCols(hd * dh, dh);
    nn::Mat da = dctx_h * vh.transpose();          // 1 x N
    const nn::Mat dv = a.transpose() * dctx_h;     // N x dh
    const double dot = (da.array() * a.array()).sum();
    nn::Mat ds = (a.array() * (da.array() - dot)).matrix();
    ds *= scale;
    dq.middleCols(hd * dh, dh).noalias() = ds * kh;
    const nn::Mat dk = ds.transpose() * cache.q.middleCols(hd * dh, dh);
    dkv_in += dk * p.wk.W.middleRows(hd * dh, dh);
    dkv_in += dv * p.wv.W.middleRows(hd * dh, dh);
    grad.wk.W.middleRows(hd * dh, dh).noalias() += dk.transpose() * cache.kv_in;
    grad.wk.b.col(0).segment(hd * dh, dh).noalias() += dk.colwise().sum().transpose();
    grad.wv.W.middleRows(hd * dh, dh).noalias() += dv.transpose() * cache.kv_in;
    grad.wv.b.col(0).segment(hd * dh, dh).noalias() += dv.colwise().sum().transpose();
  }
  const nn::Mat dqrow = nn::linear_bwd(p.wq, p.query.col(0).transpose(), dq, grad.wq);
  grad.query.col(0).noalias() += dqrow.row(0).transpose();
  if (p.variant == HeadVariant::kFullBlock)
    nn::layernorm_bwd(p.ln_kv, cache.ln_kv, dkv_in, grad.ln_kv);
}

nn::Vec softmax_vec(const nn::Mat& logits) {
  nn::Vec z = logits.row(0).transpose();
  const double mx = z.maxCoeff();
  z = (z.array() - mx).exp().matrix();
  return z / z.sum();
}

nn::Vec sigmoid_vec(const nn::Mat& logits) {
  return (1.0 / (1.0 + (-logits.row(0).transpose().array()).exp())).matrix();
}

}  // namespace

nn::Vec classifier_logits(const ClassifierParams& p, const nn::Mat& h) {
  HeadCache cache;
  const nn::Mat z = head_features(p, h, cache);
  return nn::linear_fwd(p.head, z).row(0).transpose();
}

nn::Vec classify(const ClassifierParams& p, const nn::Mat& h, TaskKind task) {
  HeadCache cache;
  const nn::Mat z = head_features(p, h, cache);
  const nn::Mat logits = nn::linear_fwd(p.head, z);
  return task == TaskKind::kSingle ? softmax_vec(logits) : sigmoid_vec(logits);
}

double loss_single(const nn::Vec& probs, const std::vector<int>& onehot) {
  if (static_cast<std::size_t>(probs.size()) != onehot.size())
    throw std::invalid_argument("loss_single: width mismatch");
  int ones = 0;
  double loss = 0.0;
  for (std::size_t c = 0; c < onehot.size(); ++c) {
    if (onehot[c] == 1) {
      ++ones;
      loss -= std::log(std::clamp(probs(static_cast<Eigen::Index>(c)), kProbEps, 1.0 - kProbEps));
    }
  }
  if (ones != 1) throw std::invalid_argument("loss_single: label must be one-hot");
  return loss;
}

double loss_multi(const nn::Vec& probs, const std::vector<int>& multihot) {
  if (static_cast<std::size_t>(probs.size()) != multihot.size())
    throw std::invalid_argument("loss_multi: width mismatch");
  double loss = 0.0;
  for (std::size_t c = 0; c < multihot.size(); ++c) {
    const double p = std::clamp(probs(static_cast<Eigen::Index>(c)), kProbEps, 1.0 - kProbEps);
    loss -= multihot[c] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

double classifier_loss_grad(const ClassifierParams& p, const nn::Mat& h,
                            const std::vector<int>& label, TaskKind task,
                            ClassifierParams& grad, double scale) {
  HeadCache cache;
  const nn::Mat z = head_features(p, h, cache);
  const nn::Mat logits = nn::linear_fwd(p.head, z);
  const auto classes = static_cast<int>(label.size());
  if (logits.cols() != classes)
    throw std::invalid_argument("classifier_loss_grad: label width mismatch");
  nn::Vec probs;
  double loss;
  if (task == TaskKind::kSingle) {
    probs = softmax_vec(logits);
    loss = loss_single(probs, label);
  } else {
    probs = sigmoid_vec(logits);
    loss = loss_multi(probs, label);
  }
  // Fused gradient (probs - y); exact wherever the clamp is inactive.
  nn::Mat dlogits(1, classes);
  for (int c = 0; c < classes; ++c)
    dlogits(0, c) =
        scale * (probs(c) - static_cast<double>(label[static_cast<std::size_t>(c)]));
  head_bwd(p, cache, dlogits, grad);
  return loss;
}

// ---------------------------------------------------------------------------
// Adapters
// ---------------------------------------------------------------------------

TokenSequence embed_snippet_task(const LabeledSample& sample, const VideoSnippet& snippet,
                                 const EncoderConfig& cfg, const EncoderParams& frozen,
                                 const nn::Mat& pos, const AdapterConfig& adapter) {
  if (sample.boxes.empty())
    throw std::invalid_argument("embed_snippet_task: sample has no boxes");
  if (snippet.frames != cfg.frames)
    throw std::invalid_argument(
        "embed_snippet_task: snippet length must equal the model input length");
  if (sample.boxes.size() != 1 &&
      sample.boxes.size() != static_cast<std::size_t>(snippet.frames))
    throw std::invalid_argument("embed_snippet_task: need one box or one per frame");
  const BoundingBox b = union_bboxes(sample.boxes);
  const VideoSnippet cropped = crop_resize(snippet, b, cfg.image_size);
  return encode_full(normalize(cropped, adapter.pipeline.norm), cfg, frozen, pos);
}

TokenSequence embed_frame_task(const LabeledSample& sample, const VideoSnippet& video,
                               const EncoderConfig& cfg, const EncoderParams& frozen,
                               const nn::Mat& pos, const AdapterConfig& adapter, Rng& rng) {
  if (sample.boxes.empty())
    throw std::invalid_argument("embed_frame_task: sample has no box");
  const VideoSnippet window = centered_window(video, sample.t, adapter.window_seconds);
  BoundingBox b = sample.boxes.front();
  if (adapter.expand_frame_box) b = expand_bbox(b, adapter.pipeline.bbox_expand_factor);
  const VideoSnippet cropped = crop_resize(window, b, cfg.image_size);
  const VideoSnippet strided = sample_frames(cropped, adapter.pipeline.segment_frames,
                                             adapter.pipeline.temporal_stride, rng);
  if (strided.frames != cfg.frames)
    throw std::invalid_argument(
        "embed_frame_task: segment/stride does not produce the model input length");
  return encode_full(normalize(strided, adapter.pipeline.norm), cfg, frozen, pos);
}

// ---------------------------------------------------------------------------
// Probe training
// ---------------------------------------------------------------------------

namespace {

double validation_metric(const std::vector<PredictionRecord>& preds, TaskKind task) {
  if (task == TaskKind::kSingle) return top1_accuracy(preds);
  // mAP over classes with positives, computed directly from the records.
  const std::size_t num_classes = preds.front().scores.size();
  double sum = 0.0;
  int counted = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<double> scores(preds.size());
    std::vector<int> labels(preds.size());
    std::vector<std::string> ids(preds.size());
    bool any = false;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      scores[i] = preds[i].scores[c];
      labels[i] = preds[i].ground_truth[c];
      ids[i] = preds[i].sample_id;
      any |= labels[i] == 1;
    }
    if (!any) continue;
    sum += average_precision(scores, labels, ids);
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / counted;
}

}  // namespace

ProbeResult train_probe(const std::vector<EmbeddedSample>& train,
                        const std::vector<EmbeddedSample>& val, TaskKind task, int dim,
                        int model_heads, int num_classes, const ProbeConfig& cfg,
                        uint64_t seed) {
  if (train.empty() || val.empty())
    throw std::invalid_argument("train_probe: empty train or validation split");
  {
    // All-one-class training data still trains, with a warning.
    std::vector<int> first = train.front().label;
    bool all_same = true;
    for (const auto& s : train) all_same &= s.label == first;
    if (all_same)
      std::fprintf(stderr, "warning: probe training set contains a single label pattern\n");
  }

  Rng init_rng(hash_mix(seed, hash_str("probe-init")));
  ClassifierParams params =
      make_classifier(cfg.variant, dim, model_heads, num_classes, init_rng);
  AdamW opt(cfg.adam);

  std::vector<std::pair<std::string, nn::Mat*>> plist;
  visit_params(params, "", [&](const std::string& n, nn::Mat& m) { plist.emplace_back(n, &m); });

  const int batches_per_epoch =
      static_cast<int>((train.size() + cfg.batch_size - 1) / cfg.batch_size);
  const int64_t total_steps = static_cast<int64_t>(cfg.epochs) * batches_per_epoch;
  int64_t step = 0;

  ProbeResult result;
  result.best_val_metric = -1.0;
  int epochs_since_best = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng(hash_mix(seed, hash_mix(hash_str("probe-epoch"),
                                          static_cast<uint64_t>(epoch))));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(epoch_rng.uniform_int(
                                  static_cast<int64_t>(i)))]);

    double epoch_loss = 0.0;
    double last_lr = 0.0;
    for (int b = 0; b < batches_per_epoch; ++b) {
      const std::size_t lo = static_cast<std::size_t>(b) * cfg.batch_size;
      const std::size_t hi = std::min(train.size(), lo + cfg.batch_size);
      ClassifierParams grad = params;
      visit_params(grad, "", [](const std::string&, nn::Mat& m) { m.setZero(); });
      double batch_loss = 0.0;
      const double inv = 1.0 / static_cast<double>(hi - lo);
      for (std::size_t k = lo; k < hi; ++k) {
        const EmbeddedSample& s = train[order[k]];
        batch_loss += classifier_loss_grad(params, s.tokens, s.label, task, grad, inv);
      }
      const double lr =
          cfg.lr * 0.5 *
          (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step) /
                          static_cast<double>(total_steps)));
      last_lr = lr;
      std::vector<std::pair<std::string, const nn::Mat*>> glist;
      visit_params(grad, "",
                   [&](const std::string& n, const nn::Mat& m) { glist.emplace_back(n, &m); });
      opt.step(plist, glist, lr, cfg.weight_decay);
      ++step;
      epoch_loss += batch_loss * inv;
    }

    const auto val_preds = predict_probe(params, val, task);
    const double metric = validation_metric(val_preds, task);
    result.history.push_back(
        {epoch, epoch_loss / batches_per_epoch, metric, last_lr});
    if (metric > result.best_val_metric) {
      result.best_val_metric = metric;
      result.best_epoch = epoch;
      result.params = params;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

std::vector<PredictionRecord> predict_probe(const ClassifierParams& params,
                                            const std::vector<EmbeddedSample>& samples,
                                            TaskKind task) {
  std::vector<PredictionRecord> records;
  records.reserve(samples.size());
  for (const auto& s : samples) {
    const nn::Vec probs = classify(params, s.tokens, task);
    PredictionRecord r;
    r.sample_id = s.sample_id;
    r.scores.assign(probs.data(), probs.data() + probs.size());
    r.ground_truth = s.label;
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Embedding cache
// ---------------------------------------------------------------------------

namespace fs = std::filesystem;

void save_embedding_cache(const fs::path& dir, const std::vector<EmbeddedSample>& samples,
                          int dim) {
  const fs::path tmp = dir.parent_path() / (".tmp_" + dir.filename().string());
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  json meta;
  meta["format"] = "behaviorkit/embeddings";
  meta["version"] = 1;
  meta["dim"] = dim;
  json list = json::array();
  for (const auto& s : samples) {
    const std::string file = s.sample_id + ".bin";
    std::ofstream os(tmp / file, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write embedding blob: " + (tmp / file).string());
    os.write(reinterpret_cast<const char*>(s.tokens.data()),
             static_cast<std::streamsize>(sizeof(double) * s.tokens.size()));
    list.push_back(json{{"sample_id", s.sample_id},
                        {"rows", s.tokens.rows()},
                        {"label", s.label},
                        {"file", file}});
  }
  meta["samples"] = std::move(list);
  std::ofstream os(tmp / "meta.json", std::ios::trunc);
  os << meta.dump(2) << "\n";
  os.close();
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

std::optional<std::vector<EmbeddedSample>> load_embedding_cache(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) return std::nullopt;
  std::ifstream is(meta_path);
  if (!is) throw DataError("cannot read embedding cache: " + meta_path.string());
  json meta;
  try {
    is >> meta;
  } catch (const json::exception& e) {
    throw DataError("corrupt embedding cache " + meta_path.string() + ": " + e.what());
  }
  if (meta.value("format", "") != "behaviorkit/embeddings")
    throw DataError("not an embedding cache: " + meta_path.string());
  const int dim = meta.at("dim").get<int>();
  std::vector<EmbeddedSample> samples;
  for (const auto& item : meta.at("samples")) {
    EmbeddedSample s;
    s.sample_id = item.at("sample_id").get<std::string>();
    s.label = item.at("label").get<std::vector<int>>();
    const auto rows = item.at("rows").get<int64_t>();
    const fs::path blob = dir / item.at("file").get<std::string>();
    std::ifstream bs(blob, std::ios::binary);
    if (!bs) throw DataError("missing embedding blob: " + blob.string());
    s.tokens.resize(rows, dim);
    if (!bs.read(reinterpret_cast<char*>(s.tokens.data()),
                 static_cast<std::streamsize>(sizeof(double) * s.tokens.size())))
      throw DataError("truncated embedding blob: " + blob.string());
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace bk
