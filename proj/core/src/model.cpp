#include "behaviorkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace bk {

void EncoderConfig::validate() const {
  if (frames < 1 || image_size < 1) throw std::invalid_argument("EncoderConfig: empty input");
  if (tubelet.t < 1 || tubelet.h < 1 || tubelet.w < 1)
    throw std::invalid_argument("EncoderConfig: tubelet sides must be positive");
  if (frames % tubelet.t != 0)
    throw std::invalid_argument("EncoderConfig: frames not divisible by tubelet.t");
  if (image_size % tubelet.h != 0 || image_size % tubelet.w != 0)
    throw std::invalid_argument("EncoderConfig: image_size not divisible by tubelet sides");
  if (dim < 1 || depth < 1 || heads < 1 || predictor_depth < 1 || predictor_dim < 1)
    throw std::invalid_argument("EncoderConfig: sizes must be positive");
  if (dim % heads != 0) throw std::invalid_argument("EncoderConfig: dim not divisible by heads");
  if (dim % 2 != 0 || predictor_dim % 2 != 0)
    throw std::invalid_argument("EncoderConfig: dims must be even for sine-cosine tables");
  if (predictor_dim % heads != 0)
    throw std::invalid_argument("EncoderConfig: predictor_dim not divisible by heads");
}

void TokenSequence::validate() const {
  if (tokens.rows() != grid.count())
    throw std::invalid_argument("TokenSequence: token count does not match grid");
  if (!tokens.allFinite()) throw std::invalid_argument("TokenSequence: non-finite entries");
}

EncoderParams make_encoder(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderParams p;
  p.embed = nn::make_linear(cfg.dim, cfg.patch_dim(), rng);
  p.trunk = nn::make_trunk(cfg.depth, cfg.dim, rng);
  return p;
}

EncoderParams make_encoder_zeros(const EncoderConfig& cfg) {
  cfg.validate();
  EncoderParams p;
  p.embed = nn::make_linear_zeros(cfg.dim, cfg.patch_dim());
  p.trunk = nn::make_trunk_zeros(cfg.depth, cfg.dim);
  return p;
}

PredictorParams make_predictor(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  PredictorParams p;
  p.embed = nn::make_linear(cfg.predictor_dim, cfg.dim, rng);
  p.mask_token.resize(cfg.predictor_dim, 1);
  for (Eigen::Index i = 0; i < p.mask_token.size(); ++i)
    p.mask_token.data()[i] = rng.trunc_normal(0.02, 0.04);
  p.trunk = nn::make_trunk(cfg.predictor_depth, cfg.predictor_dim, rng);
  p.out = nn::make_linear(cfg.dim, cfg.predictor_dim, rng);
  return p;
}

PredictorParams make_predictor_zeros(const EncoderConfig& cfg) {
  cfg.validate();
  PredictorParams p;
  p.embed = nn::make_linear_zeros(cfg.predictor_dim, cfg.dim);
  p.mask_token = nn::Mat::Zero(cfg.predictor_dim, 1);
  p.trunk = nn::make_trunk_zeros(cfg.predictor_depth, cfg.predictor_dim);
  p.out = nn::make_linear_zeros(cfg.dim, cfg.predictor_dim);
  return p;
}

namespace {

// 1-D table: [sin(pos * w_0..w_{d/2-1}), cos(...)] with w_i = 10000^(-2i/d).
void fill_axis_embed(nn::Mat& out, int col0, int d_axis, const std::vector<int>& pos_of_row) {
  const int half = d_axis / 2;
  std::vector<double> omega(half);
  for (int i = 0; i < half; ++i)
    omega[i] = std::pow(10000.0, -2.0 * i / static_cast<double>(d_axis));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double pos = static_cast<double>(pos_of_row[static_cast<std::size_t>(r)]);
    for (int i = 0; i < half; ++i) {
      out(r, col0 + i) = std::sin(pos * omega[i]);
      out(r, col0 + half + i) = std::cos(pos * omega[i]);
    }
  }
}

}  // namespace

nn::Mat sincos_posembed(const TokenGrid& grid, int dim) {
  if (dim % 2 != 0) throw std::invalid_argument("sincos_posembed: dim must be even");
  const int n = grid.count();
  // Per-axis widths sum to dim exactly: even split of dim/3, remainder to
  // the spatial axes.
  int d_t = (dim / 3) & ~1;
  int d_h = ((dim - d_t) / 2) & ~1;
  int d_w = dim - d_t - d_h;
  nn::Mat pos = nn::Mat::Zero(n, dim);
  std::vector<int> ts(n), ys(n), xs(n);
  for (int t = 0, r = 0; t < grid.t; ++t)
    for (int y = 0; y < grid.h; ++y)
      for (int x = 0; x < grid.w; ++x, ++r) {
        ts[r] = t;
        ys[r] = y;
        xs[r] = x;
      }
  fill_axis_embed(pos, 0, d_t, ts);
  fill_axis_embed(pos, d_t, d_h, ys);
  fill_axis_embed(pos, d_t + d_h, d_w, xs);
  return pos;
}

nn::Mat extract_patches(const VideoTensor& video, const EncoderConfig& cfg) {
  if (video.frames != cfg.frames || video.height != cfg.image_size ||
      video.width != cfg.image_size)
    throw std::invalid_argument("extract_patches: video shape does not match config");
  const TokenGrid g = cfg.grid();
  nn::Mat patches(g.count(), cfg.patch_dim());
  int row = 0;
  for (int gt = 0; gt < g.t; ++gt) {
    for (int gy = 0; gy < g.h; ++gy) {
      for (int gx = 0; gx < g.w; ++gx, ++row) {
        int col = 0;
        for (int dt = 0; dt < cfg.tubelet.t; ++dt)
          for (int dy = 0; dy < cfg.tubelet.h; ++dy)
            for (int dx = 0; dx < cfg.tubelet.w; ++dx)
              for (int c = 0; c < 3; ++c, ++col)
                patches(row, col) = video.at(gt * cfg.tubelet.t + dt, gy * cfg.tubelet.h + dy,
                                             gx * cfg.tubelet.w + dx, c);
      }
    }
  }
  return patches;
}

TokenSequence patchify(const VideoTensor& video, const EncoderConfig& cfg,
                       const EncoderParams& params, const nn::Mat& pos) {
  TokenSequence seq;
  seq.grid = cfg.grid();
  seq.tokens = nn::linear_fwd(params.embed, extract_patches(video, cfg)) + pos;
  return seq;
}

std::vector<int> normalize_index_set(std::span<const int> idx, int n, const char* what) {
  std::vector<int> out(idx.begin(), idx.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end())
    throw std::invalid_argument(std::string(what) + ": duplicate indices");
  if (!out.empty() && (out.front() < 0 || out.back() >= n))
    throw std::invalid_argument(std::string(what) + ": index out of range");
  return out;
}

namespace {
nn::Mat gather_rows(const nn::Mat& m, std::span<const int> rows) {
  nn::Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}
}  // namespace

nn::Mat encode(const EncoderParams& params, const EncoderConfig& cfg,
               const TokenSequence& tokens, std::span<const int> keep) {
  const auto idx = normalize_index_set(keep, static_cast<int>(tokens.tokens.rows()), "encode");
  if (idx.empty()) throw std::invalid_argument("encode: empty keep set");
  return nn::trunk_fwd(params.trunk, cfg.heads, gather_rows(tokens.tokens, idx));
}

nn::Mat predict(const PredictorParams& params, const EncoderConfig& cfg,
                const nn::Mat& context_out, std::span<const int> context_idx,
                std::span<const int> target_idx, const nn::Mat& pos_pred) {
  const int n = static_cast<int>(pos_pred.rows());
  const auto ctx = normalize_index_set(context_idx, n, "predict context");
  const auto tgt = normalize_index_set(target_idx, n, "predict target");
  if (static_cast<Eigen::Index>(ctx.size()) != context_out.rows())
    throw std::invalid_argument("predict: context size mismatch");
  std::vector<int> overlap;
  std::set_intersection(ctx.begin(), ctx.end(), tgt.begin(), tgt.end(),
                        std::back_inserter(overlap));
  if (!overlap.empty())
    throw std::invalid_argument("predict: context and target indices overlap");
  if (tgt.empty()) return nn::Mat(0, cfg.dim);

  const auto nc = static_cast<Eigen::Index>(ctx.size());
  const auto nt = static_cast<Eigen::Index>(tgt.size());
  nn::Mat x(nc + nt, cfg.predictor_dim);
  x.topRows(nc) = nn::linear_fwd(params.embed, context_out) + gather_rows(pos_pred, ctx);
  x.bottomRows(nt) = gather_rows(pos_pred, tgt);
  x.bottomRows(nt).rowwise() += params.mask_token.col(0).transpose();
  const nn::Mat y = nn::trunk_fwd(params.trunk, cfg.heads, x);
  return nn::linear_fwd(params.out, y.bottomRows(nt));
}

TokenSequence encode_full(const VideoTensor& video, const EncoderConfig& cfg,
                          const EncoderParams& params, const nn::Mat& pos) {
  TokenSequence seq = patchify(video, cfg, params, pos);
  TokenSequence out;
  out.grid = seq.grid;
  out.tokens = nn::trunk_fwd(params.trunk, cfg.heads, seq.tokens);
  return out;
}

void ema_update(EncoderParams& target, const EncoderParams& online, double momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0))
    throw std::invalid_argument("ema_update: momentum must be in [0, 1]");
  std::vector<std::pair<std::string, nn::Mat*>> tgt;
  std::vector<std::pair<std::string, const nn::Mat*>> src;
  visit_params(target, "", [&](const std::string& n, nn::Mat& m) { tgt.emplace_back(n, &m); });
  visit_params(online, "",
               [&](const std::string& n, const nn::Mat& m) { src.emplace_back(n, &m); });
  if (tgt.size() != src.size()) throw std::invalid_argument("ema_update: parameter set mismatch");
  for (std::size_t i = 0; i < tgt.size(); ++i) {
    if (tgt[i].first != src[i].first)
      throw std::invalid_argument("ema_update: parameter name mismatch at " + tgt[i].first);
    nn::Mat& t = *tgt[i].second;
    const nn::Mat& o = *src[i].second;
    if (t.rows() != o.rows() || t.cols() != o.cols())
      throw std::invalid_argument("ema_update: shape mismatch at " + tgt[i].first);
    t = momentum * t + (1.0 - momentum) * o;
  }
}

int64_t param_count(const EncoderParams& p) {
  int64_t n = 0;
  visit_params(p, "", [&](const std::string&, const nn::Mat& m) { n += m.size(); });
  return n;
}

int64_t param_count(const PredictorParams& p) {
  int64_t n = 0;
  visit_params(p, "", [&](const std::string&, const nn::Mat& m) { n += m.size(); });
  return n;
}

VideoModel VideoModel::init(const EncoderConfig& cfg, uint64_t seed) {
  cfg.validate();
  VideoModel m;
  m.cfg = cfg;
  Rng enc_rng(hash_mix(seed, hash_str("encoder")));
  m.online = make_encoder(cfg, enc_rng);
  m.target = m.online;  // teacher and student start from the same weights
  Rng pred_rng(hash_mix(seed, hash_str("predictor")));
  m.predictor = make_predictor(cfg, pred_rng);
  m.pos_enc = sincos_posembed(cfg.grid(), cfg.dim);
  m.pos_pred = sincos_posembed(cfg.grid(), cfg.predictor_dim);
  return m;
}

}  // namespace bk
