#include "behaviorkit/nn.hpp"

#include <cmath>

namespace bk::nn {

namespace {
constexpr double kLnEps = 1e-6;
constexpr double kInitStd = 0.02;
}  // namespace

Linear make_linear(int out, int in, Rng& rng) {
  Linear l;
  l.W.resize(out, in);
  for (Eigen::Index i = 0; i < l.W.size(); ++i)
    l.W.data()[i] = rng.trunc_normal(kInitStd, 2.0 * kInitStd);
  l.b = Mat::Zero(out, 1);
  return l;
}

Linear make_linear_zeros(int out, int in) {
  return Linear{Mat::Zero(out, in), Mat::Zero(out, 1)};
}

LayerNorm make_layernorm(int dim) {
  return LayerNorm{Mat::Ones(dim, 1), Mat::Zero(dim, 1)};
}

TrunkParams make_trunk(int depth, int dim, Rng& rng) {
  TrunkParams t;
  t.blocks.reserve(depth);
  for (int i = 0; i < depth; ++i) {
    BlockParams b;
    b.ln1 = make_layernorm(dim);
    b.attn.qkv = make_linear(3 * dim, dim, rng);
    b.attn.proj = make_linear(dim, dim, rng);
    b.ln2 = make_layernorm(dim);
    b.mlp.fc1 = make_linear(4 * dim, dim, rng);
    b.mlp.fc2 = make_linear(dim, 4 * dim, rng);
    t.blocks.push_back(std::move(b));
  }
  t.norm = make_layernorm(dim);
  return t;
}

TrunkParams make_trunk_zeros(int depth, int dim) {
  TrunkParams t;
  t.blocks.reserve(depth);
  for (int i = 0; i < depth; ++i) {
    BlockParams b;
    b.ln1 = make_layernorm(dim);
    b.attn.qkv = make_linear_zeros(3 * dim, dim);
    b.attn.proj = make_linear_zeros(dim, dim);
    b.ln2 = make_layernorm(dim);
    b.mlp.fc1 = make_linear_zeros(4 * dim, dim);
    b.mlp.fc2 = make_linear_zeros(dim, 4 * dim);
    t.blocks.push_back(std::move(b));
  }
  t.norm = make_layernorm(dim);
  return t;
}

Mat linear_fwd(const Linear& l, const Mat& x) {
  Mat y = x * l.W.transpose();
  y.rowwise() += l.b.col(0).transpose();
  return y;
}

Mat linear_bwd(const Linear& l, const Mat& x, const Mat& dy, Linear& grad) {
  grad.W.noalias() += dy.transpose() * x;
  grad.b.col(0).noalias() += dy.colwise().sum().transpose();
  return dy * l.W;
}

Mat layernorm_fwd(const LayerNorm& ln, const Mat& x, LnCache& cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  cache.xhat.resize(n, d);
  cache.inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().sum() / static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    cache.inv_std(i) = inv;
    cache.xhat.row(i) = ((x.row(i).array() - mu) * inv).matrix();
  }
  Mat y = (cache.xhat.array().rowwise() * ln.gamma.col(0).transpose().array()).matrix();
  y.rowwise() += ln.beta.col(0).transpose();
  return y;
}

Mat layernorm_bwd(const LayerNorm& ln, const LnCache& cache, const Mat& dy, LayerNorm& grad) {
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  grad.gamma.col(0).noalias() += (dy.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
  grad.beta.col(0).noalias() += dy.colwise().sum().transpose();
  Mat dxhat = (dy.array().rowwise() * ln.gamma.col(0).transpose().array()).matrix();
  Mat dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m1 = dxhat.row(i).mean();
    const double m2 = (dxhat.row(i).array() * cache.xhat.row(i).array()).mean();
    dx.row(i) =
        (cache.inv_std(i) * (dxhat.row(i).array() - m1 - cache.xhat.row(i).array() * m2))
            .matrix();
  }
  return dx;
}

Mat gelu_fwd(const Mat& x) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); });
}

Mat gelu_bwd(const Mat& x, const Mat& dy) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  const Mat slope = x.unaryExpr([](double v) {
    return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * std::exp(-0.5 * v * v) * inv_sqrt2pi;
  });
  return dy.cwiseProduct(slope);
}

void softmax_rows(Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp().matrix();
    m.row(i) /= m.row(i).sum();
  }
}

Mat attention_fwd(const AttnParams& p, int heads, const Mat& x, AttnCache& cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.x = x;
  cache.qkv = linear_fwd(p.qkv, x);
  cache.attn.assign(heads, Mat());
  cache.heads_out.resize(n, d);
  for (int h = 0; h < heads; ++h) {
    const auto q = cache.qkv.middleCols(h * dh, dh);
    const auto k = cache.qkv.middleCols(d + h * dh, dh);
    const auto v = cache.qkv.middleCols(2 * d + h * dh, dh);
    Mat& a = cache.attn[h];
    a.noalias() = q * k.transpose();
    a *= scale;
    softmax_rows(a);
    cache.heads_out.middleCols(h * dh, dh).noalias() = a * v;
  }
  return linear_fwd(p.proj, cache.heads_out);
}

Mat attention_bwd(const AttnParams& p, int heads, const AttnCache& cache, const Mat& dy,
                  AttnParams& grad) {
  const Eigen::Index d = cache.x.cols();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Mat dheads = linear_bwd(p.proj, cache.heads_out, dy, grad.proj);
  Mat dqkv = Mat::Zero(cache.qkv.rows(), cache.qkv.cols());
  for (int h = 0; h < heads; ++h) {
    const auto q = cache.qkv.middleCols(h * dh, dh);
    const auto k = cache.qkv.middleCols(d + h * dh, dh);
    const auto v = cache.qkv.middleCols(2 * d + h * dh, dh);
    const Mat& a = cache.attn[h];
    const auto dout = dheads.middleCols(h * dh, dh);
    Mat da = dout * v.transpose();
    dqkv.middleCols(2 * d + h * dh, dh).noalias() = a.transpose() * dout;
    // softmax backward: ds = a .* (da - rowsum(da .* a))
    const Vec row_dots = (da.array() * a.array()).rowwise().sum().matrix();
    Mat ds = (a.array() * (da.array().colwise() - row_dots.array())).matrix();
    ds *= scale;
    dqkv.middleCols(h * dh, dh).noalias() = ds * k;
    dqkv.middleCols(d + h * dh, dh).noalias() = ds.transpose() * q;
  }
  return linear_bwd(p.qkv, cache.x, dqkv, grad.qkv);
}

Mat block_fwd(const BlockParams& p, int heads, const Mat& x, BlockCache& cache) {
  const Mat ln1_out = layernorm_fwd(p.ln1, x, cache.ln1);
  cache.x_mid = x + attention_fwd(p.attn, heads, ln1_out, cache.attn);
  cache.ln2_out = layernorm_fwd(p.ln2, cache.x_mid, cache.ln2);
  cache.fc1_out = linear_fwd(p.mlp.fc1, cache.ln2_out);
  cache.act = gelu_fwd(cache.fc1_out);
  return cache.x_mid + linear_fwd(p.mlp.fc2, cache.act);
}

Mat block_bwd(const BlockParams& p, int heads, const BlockCache& cache, const Mat& dy,
              BlockParams& grad) {
  const Mat dact = linear_bwd(p.mlp.fc2, cache.act, dy, grad.mlp.fc2);
  const Mat dfc1 = gelu_bwd(cache.fc1_out, dact);
  const Mat dln2 = linear_bwd(p.mlp.fc1, cache.ln2_out, dfc1, grad.mlp.fc1);
  Mat dx_mid = dy + layernorm_bwd(p.ln2, cache.ln2, dln2, grad.ln2);
  const Mat dln1 = attention_bwd(p.attn, heads, cache.attn, dx_mid, grad.attn);
  return dx_mid + layernorm_bwd(p.ln1, cache.ln1, dln1, grad.ln1);
}

Mat trunk_fwd(const TrunkParams& p, int heads, const Mat& x, TrunkCache& cache) {
  cache.blocks.resize(p.blocks.size());
  Mat cur = x;
  for (std::size_t i = 0; i < p.blocks.size(); ++i)
    cur = block_fwd(p.blocks[i], heads, cur, cache.blocks[i]);
  return layernorm_fwd(p.norm, cur, cache.final_ln);
}

Mat trunk_fwd(const TrunkParams& p, int heads, const Mat& x) {
  TrunkCache scratch;
  return trunk_fwd(p, heads, x, scratch);
}

Mat trunk_bwd(const TrunkParams& p, int heads, const TrunkCache& cache, const Mat& dy,
              TrunkParams& grad) {
  Mat cur = layernorm_bwd(p.norm, cache.final_ln, dy, grad.norm);
  for (std::size_t i = p.blocks.size(); i-- > 0;)
    cur = block_bwd(p.blocks[i], heads, cache.blocks[i], cur, grad.blocks[i]);
  return cur;
}

}  // namespace bk::nn
