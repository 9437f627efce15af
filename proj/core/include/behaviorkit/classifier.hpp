#pragma once

#include <filesystem>
#include <optional>

#include "behaviorkit/manifest.hpp"
#include "behaviorkit/model.hpp"
#include "behaviorkit/optimizer.hpp"
#include "behaviorkit/pipeline.hpp"

namespace bk {

// Two head variants behind one flag: the attention-only head (cross
// attention + linear) and the full transformer-block head (pre-attention
// norm, residuals, 4x MLP).
enum class HeadVariant { kAttentionOnly, kFullBlock };

struct ClassifierParams {
  HeadVariant variant = HeadVariant::kAttentionOnly;
  int heads = 1;
  nn::Mat query;  // d x 1
  nn::Linear wq, wk, wv, wo;
  nn::Linear head;  // d -> C
  // Full-block extras.
  nn::LayerNorm ln_kv;
  nn::LayerNorm ln_mlp;
  nn::MlpParams mlp;
};

template <class P, class F>
void visit_params(P& p, const std::string& prefix, F&& f)
  requires std::is_same_v<std::remove_const_t<P>, ClassifierParams>
{
  f(prefix + "query", p.query);
  nn::visit(p.wq, prefix + "wq", f);
  nn::visit(p.wk, prefix + "wk", f);
  nn::visit(p.wv, prefix + "wv", f);
  nn::visit(p.wo, prefix + "wo", f);
  nn::visit(p.head, prefix + "head", f);
  if (p.variant == HeadVariant::kFullBlock) {
    nn::visit(p.ln_kv, prefix + "ln_kv", f);
    nn::visit(p.ln_mlp, prefix + "ln_mlp", f);
    nn::visit(p.mlp.fc1, prefix + "mlp.fc1", f);
    nn::visit(p.mlp.fc2, prefix + "mlp.fc2", f);
  }
}

ClassifierParams make_classifier(HeadVariant variant, int dim, int heads, int num_classes,
                                 Rng& rng);
int64_t param_count(const ClassifierParams& p);

// Pre-sigmoid/softmax scores for one token matrix (N x d).
nn::Vec classifier_logits(const ClassifierParams& p, const nn::Mat& h);

// Class probabilities: softmax for single-label, sigmoid for multi-label.
nn::Vec classify(const ClassifierParams& p, const nn::Mat& h, TaskKind task);

// -sum_c y_c log(p_c), probabilities clamped to [eps, 1-eps].
double loss_single(const nn::Vec& probs, const std::vector<int>& onehot);

// -sum_c [y_c log p_c + (1-y_c) log(1-p_c)], clamped likewise.
double loss_multi(const nn::Vec& probs, const std::vector<int>& multihot);

// One fused forward/backward pass: accumulates scale * d(loss)/d(params)
// into grad and returns the sample loss. Embeddings are fixed inputs.
double classifier_loss_grad(const ClassifierParams& p, const nn::Mat& h,
                            const std::vector<int>& label, TaskKind task,
                            ClassifierParams& grad, double scale = 1.0);

// ---------------------------------------------------------------------------
// Task adapters: labeled sample -> frozen-encoder token sequence.
// ---------------------------------------------------------------------------

struct AdapterConfig {
  PipelineConfig pipeline;
  // Frame-wise task only: window length and whether the annotated box gets
  // the same 1.25x expansion as pretraining crops.
  double window_seconds = 2.0;
  bool expand_frame_box = true;
};

// Snippet-wise protocol: crop to the union of the per-frame boxes, no
// temporal stride; the snippet length must equal the model's input length.
TokenSequence embed_snippet_task(const LabeledSample& sample, const VideoSnippet& snippet,
                                 const EncoderConfig& cfg, const EncoderParams& frozen,
                                 const nn::Mat& pos, const AdapterConfig& adapter);

// Frame-wise protocol: centered window at t, single annotated box, strided
// temporal sampling as in pretraining.
TokenSequence embed_frame_task(const LabeledSample& sample, const VideoSnippet& video,
                               const EncoderConfig& cfg, const EncoderParams& frozen,
                               const nn::Mat& pos, const AdapterConfig& adapter, Rng& rng);

// ---------------------------------------------------------------------------
// Probe training over a precomputed embedding cache.
// ---------------------------------------------------------------------------

struct ProbeConfig {
  HeadVariant variant = HeadVariant::kAttentionOnly;
  int epochs = 30;
  int patience = 5;  // early stopping on the validation metric
  int batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 0.01;
  AdamConfig adam;
};

struct EmbeddedSample {
  std::string sample_id;
  nn::Mat tokens;  // N x d
  std::vector<int> label;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double lr = 0.0;
};

struct ProbeResult {
  ClassifierParams params;  // best-on-validation
  int best_epoch = 0;
  double best_val_metric = 0.0;
  std::vector<EpochStats> history;
};

// Optimizes only the head; the backbone embeddings are fixed inputs. Early
// stops on validation Top-1 (single-label) or mAP (multi-label) and returns
// the parameters from the best epoch.
ProbeResult train_probe(const std::vector<EmbeddedSample>& train,
                        const std::vector<EmbeddedSample>& val, TaskKind task, int dim,
                        int model_heads, int num_classes, const ProbeConfig& cfg, uint64_t seed);

// Scores for a set of embedded samples.
std::vector<PredictionRecord> predict_probe(const ClassifierParams& params,
                                            const std::vector<EmbeddedSample>& samples,
                                            TaskKind task);

// ---------------------------------------------------------------------------
// Embedding cache: one blob per sample id in the checkpoint blob format, so
// probe retraining never re-runs the backbone.
// ---------------------------------------------------------------------------

void save_embedding_cache(const std::filesystem::path& dir,
                          const std::vector<EmbeddedSample>& samples, int dim);
std::optional<std::vector<EmbeddedSample>> load_embedding_cache(
    const std::filesystem::path& dir);

}  // namespace bk
