#pragma once

#include <span>

#include "behaviorkit/nn.hpp"
#include "behaviorkit/video.hpp"

namespace bk {

struct TubeletShape {
  int t = 2;
  int h = 16;
  int w = 16;
  bool operator==(const TubeletShape&) const = default;
};

struct TokenGrid {
  int t = 0;
  int h = 0;
  int w = 0;
  int count() const { return t * h * w; }
  bool operator==(const TokenGrid&) const = default;
};

struct EncoderConfig {
  int frames = 16;
  int image_size = 224;
  TubeletShape tubelet;
  int dim = 1024;
  int depth = 24;
  int heads = 16;
  int predictor_depth = 12;
  int predictor_dim = 384;

  bool operator==(const EncoderConfig&) const = default;
  void validate() const;
  TokenGrid grid() const {
    return {frames / tubelet.t, image_size / tubelet.h, image_size / tubelet.w};
  }
  int token_count() const { return grid().count(); }
  int patch_dim() const { return tubelet.t * tubelet.h * tubelet.w * 3; }
};

// Latent token array with its grid shape attached. Full sequences only:
// count == grid.count().
struct TokenSequence {
  nn::Mat tokens;  // N x d
  TokenGrid grid;
  void validate() const;
};

struct EncoderParams {
  nn::Linear embed;  // patch_dim -> dim
  nn::TrunkParams trunk;
};

struct PredictorParams {
  nn::Linear embed;    // dim -> predictor_dim
  nn::Mat mask_token;  // predictor_dim x 1
  nn::TrunkParams trunk;
  nn::Linear out;  // predictor_dim -> dim
};

template <class P, class F>
void visit_params(P& p, const std::string& prefix, F&& f)
  requires std::is_same_v<std::remove_const_t<P>, EncoderParams>
{
  nn::visit(p.embed, prefix + "embed", f);
  nn::visit(p.trunk, prefix + "trunk", f);
}

template <class P, class F>
void visit_params(P& p, const std::string& prefix, F&& f)
  requires std::is_same_v<std::remove_const_t<P>, PredictorParams>
{
  nn::visit(p.embed, prefix + "embed", f);
  f(prefix + "mask_token", p.mask_token);
  nn::visit(p.trunk, prefix + "trunk", f);
  nn::visit(p.out, prefix + "out", f);
}

EncoderParams make_encoder(const EncoderConfig& cfg, Rng& rng);
EncoderParams make_encoder_zeros(const EncoderConfig& cfg);
PredictorParams make_predictor(const EncoderConfig& cfg, Rng& rng);
PredictorParams make_predictor_zeros(const EncoderConfig& cfg);

// Fixed separable sine-cosine table over (T, H, W); per-axis widths fill
// `dim` exactly, no projection needed.
nn::Mat sincos_posembed(const TokenGrid& grid, int dim);

// Rearranges a normalized video into the N x patch_dim tubelet matrix.
// Token order: t-major, then rows, then columns.
nn::Mat extract_patches(const VideoTensor& video, const EncoderConfig& cfg);

// Tokenize + add positional embeddings.
TokenSequence patchify(const VideoTensor& video, const EncoderConfig& cfg,
                       const EncoderParams& params, const nn::Mat& pos);

// Transformer over the kept subset only (ascending token index; presentation
// order of `keep` is irrelevant). Returns |keep| x d.
nn::Mat encode(const EncoderParams& params, const EncoderConfig& cfg,
               const TokenSequence& tokens, std::span<const int> keep);

// Latent predictions at `target_idx` given encoded context tokens.
nn::Mat predict(const PredictorParams& params, const EncoderConfig& cfg,
                const nn::Mat& context_out, std::span<const int> context_idx,
                std::span<const int> target_idx, const nn::Mat& pos_pred);

// Whole-sequence inference: patchify + encode every token.
TokenSequence encode_full(const VideoTensor& video, const EncoderConfig& cfg,
                          const EncoderParams& params, const nn::Mat& pos);

// target <- m * target + (1 - m) * online, elementwise over matching names.
void ema_update(EncoderParams& target, const EncoderParams& online, double momentum);

int64_t param_count(const EncoderParams& p);
int64_t param_count(const PredictorParams& p);

// Trainable bundle: context encoder, EMA target encoder, predictor, plus the
// fixed positional tables. Fresh initialization gives context and target
// identical weights.
struct VideoModel {
  EncoderConfig cfg;
  EncoderParams online;
  EncoderParams target;
  PredictorParams predictor;
  nn::Mat pos_enc;   // N x dim
  nn::Mat pos_pred;  // N x predictor_dim

  static VideoModel init(const EncoderConfig& cfg, uint64_t seed);
};

// Sorted, deduplicated, range-checked copy of an index set.
std::vector<int> normalize_index_set(std::span<const int> idx, int n, const char* what);

}  // namespace bk
