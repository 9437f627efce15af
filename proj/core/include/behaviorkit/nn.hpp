#pragma once

#include <Eigen/Core>
#include <string>
#include <type_traits>
#include <vector>

#include "behaviorkit/common.hpp"

namespace bk::nn {

// Token matrices are row-major (one token per row) so per-token vectors are
// contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Parameters. Every parameter is a Mat; vectors are stored as n x 1. The
// visit() overloads enumerate (name, tensor) pairs in a stable order and are
// the single source of truth for parameter naming.
// ---------------------------------------------------------------------------

struct Linear {
  Mat W;  // out x in
  Mat b;  // out x 1
};

struct LayerNorm {
  Mat gamma;  // dim x 1
  Mat beta;   // dim x 1
};

struct AttnParams {
  Linear qkv;   // dim -> 3*dim
  Linear proj;  // dim -> dim
};

struct MlpParams {
  Linear fc1;  // dim -> 4*dim
  Linear fc2;  // 4*dim -> dim
};

struct BlockParams {
  LayerNorm ln1;
  AttnParams attn;
  LayerNorm ln2;
  MlpParams mlp;
};

// Pre-norm transformer stack with a final LayerNorm.
struct TrunkParams {
  std::vector<BlockParams> blocks;
  LayerNorm norm;
};

Linear make_linear(int out, int in, Rng& rng);   // trunc-normal(0.02), zero bias
Linear make_linear_zeros(int out, int in);
LayerNorm make_layernorm(int dim);               // gamma 1, beta 0
TrunkParams make_trunk(int depth, int dim, Rng& rng);
TrunkParams make_trunk_zeros(int depth, int dim);

template <class L, class F>
void visit(L& l, const std::string& p, F&& f)
  requires std::is_same_v<std::remove_const_t<L>, Linear>
{
  f(p + ".w", l.W);
  f(p + ".b", l.b);
}

template <class L, class F>
void visit(L& l, const std::string& p, F&& f)
  requires std::is_same_v<std::remove_const_t<L>, LayerNorm>
{
  f(p + ".g", l.gamma);
  f(p + ".beta", l.beta);
}

template <class L, class F>
void visit(L& l, const std::string& p, F&& f)
  requires std::is_same_v<std::remove_const_t<L>, BlockParams>
{
  visit(l.ln1, p + ".ln1", f);
  visit(l.attn.qkv, p + ".attn.qkv", f);
  visit(l.attn.proj, p + ".attn.proj", f);
  visit(l.ln2, p + ".ln2", f);
  visit(l.mlp.fc1, p + ".mlp.fc1", f);
  visit(l.mlp.fc2, p + ".mlp.fc2", f);
}

template <class L, class F>
void visit(L& l, const std::string& p, F&& f)
  requires std::is_same_v<std::remove_const_t<L>, TrunkParams>
{
  for (std::size_t i = 0; i < l.blocks.size(); ++i)
    visit(l.blocks[i], p + ".blocks." + std::to_string(i), f);
  visit(l.norm, p + ".norm", f);
}

template <class P>
void set_zero(P& params) {
  visit(params, "", [](const std::string&, Mat& m) { m.setZero(); });
}

template <class P>
int64_t count_entries(const P& params) {
  int64_t n = 0;
  visit(params, "", [&](const std::string&, const Mat& m) { n += m.size(); });
  return n;
}

// ---------------------------------------------------------------------------
// Forward/backward kernels. backward() calls accumulate into a grad struct of
// the same shape as the parameters.
// ---------------------------------------------------------------------------

Mat linear_fwd(const Linear& l, const Mat& x);
// Returns dx; accumulates into grad.
Mat linear_bwd(const Linear& l, const Mat& x, const Mat& dy, Linear& grad);

struct LnCache {
  Mat xhat;     // n x d
  Vec inv_std;  // n
};
Mat layernorm_fwd(const LayerNorm& ln, const Mat& x, LnCache& cache);
Mat layernorm_bwd(const LayerNorm& ln, const LnCache& cache, const Mat& dy, LayerNorm& grad);

Mat gelu_fwd(const Mat& x);
Mat gelu_bwd(const Mat& x, const Mat& dy);

// In-place row-wise softmax with max subtraction.
void softmax_rows(Mat& m);

struct AttnCache {
  Mat x;                   // attention input (post-LN)
  Mat qkv;                 // n x 3d
  std::vector<Mat> attn;   // per head, n x n
  Mat heads_out;           // n x d, pre-projection
};
Mat attention_fwd(const AttnParams& p, int heads, const Mat& x, AttnCache& cache);
Mat attention_bwd(const AttnParams& p, int heads, const AttnCache& cache, const Mat& dy,
                  AttnParams& grad);

struct BlockCache {
  LnCache ln1;
  AttnCache attn;
  Mat x_mid;  // after attention residual
  LnCache ln2;
  Mat ln2_out;
  Mat fc1_out;
  Mat act;
};
Mat block_fwd(const BlockParams& p, int heads, const Mat& x, BlockCache& cache);
Mat block_bwd(const BlockParams& p, int heads, const BlockCache& cache, const Mat& dy,
              BlockParams& grad);

struct TrunkCache {
  std::vector<BlockCache> blocks;
  LnCache final_ln;
};
Mat trunk_fwd(const TrunkParams& p, int heads, const Mat& x, TrunkCache& cache);
Mat trunk_fwd(const TrunkParams& p, int heads, const Mat& x);  // inference
Mat trunk_bwd(const TrunkParams& p, int heads, const TrunkCache& cache, const Mat& dy,
              TrunkParams& grad);

}  // namespace bk::nn
