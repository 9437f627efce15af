#include "behaviorkit/pretrain.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "behaviorkit/parallel.hpp"

namespace bk {

namespace fs = std::filesystem;

ScheduleState make_schedule(const TrainConfig& cfg) {
  ScheduleState s;
  s.step = 0;
  s.total_steps = cfg.total_steps;
  s.warmup_steps = cfg.warmup_steps;
  s.base_lr = cfg.base_lr;
  s.initial_wd = cfg.initial_wd;
  s.final_wd = cfg.final_wd;
  s.momentum = cfg.ema_momentum;
  s.momentum_final = cfg.ema_momentum_final;
  s.validate();
  return s;
}

double jepa_loss(const nn::Mat& pred, const nn::Mat& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("jepa_loss: shape mismatch");
  if (pred.size() == 0) return 0.0;
  return (pred - target).cwiseAbs().sum() / static_cast<double>(pred.size());
}

namespace {

// Cached predictor forward mirroring predict(); kept here so the inference
// path in model.cpp stays allocation-light. Equality of the two paths is
// covered by tests.
struct PredictorCache {
  nn::Mat ctx_out;  // predictor input from the encoder
  nn::Mat x;        // stacked context+mask tokens
  nn::TrunkCache trunk;
  nn::Mat trunk_out;
};

nn::Mat gather_rows(const nn::Mat& m, std::span<const int> rows) {
  nn::Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

nn::Mat predictor_fwd(const PredictorParams& p, const EncoderConfig& cfg, const nn::Mat& ctx_out,
                      const MaskSpec& mask, const nn::Mat& pos_pred, PredictorCache& cache) {
  const auto nc = static_cast<Eigen::Index>(mask.context_idx.size());
  const auto nt = static_cast<Eigen::Index>(mask.target_idx.size());
  cache.ctx_out = ctx_out;
  cache.x.resize(nc + nt, cfg.predictor_dim);
  cache.x.topRows(nc) = nn::linear_fwd(p.embed, ctx_out) + gather_rows(pos_pred, mask.context_idx);
  cache.x.bottomRows(nt) = gather_rows(pos_pred, mask.target_idx);
  cache.x.bottomRows(nt).rowwise() += p.mask_token.col(0).transpose();
  cache.trunk_out = nn::trunk_fwd(p.trunk, cfg.heads, cache.x, cache.trunk);
  return nn::linear_fwd(p.out, cache.trunk_out.bottomRows(nt));
}

// Returns the gradient w.r.t. the encoder context output.
nn::Mat predictor_bwd(const PredictorParams& p, const EncoderConfig& cfg,
                      const PredictorCache& cache, const MaskSpec& mask, const nn::Mat& dpred,
                      PredictorParams& grad) {
  const auto nc = static_cast<Eigen::Index>(mask.context_idx.size());
  const auto nt = static_cast<Eigen::Index>(mask.target_idx.size());
  nn::Mat dtrunk_out = nn::Mat::Zero(cache.trunk_out.rows(), cache.trunk_out.cols());
  dtrunk_out.bottomRows(nt) =
      nn::linear_bwd(p.out, cache.trunk_out.bottomRows(nt), dpred, grad.out);
  const nn::Mat dx = nn::trunk_bwd(p.trunk, cfg.heads, cache.trunk, dtrunk_out, grad.trunk);
  grad.mask_token.col(0).noalias() += dx.bottomRows(nt).colwise().sum().transpose();
  return nn::linear_bwd(p.embed, cache.ctx_out, dx.topRows(nc), grad.embed);
}

struct SampleGrad {
  EncoderParams encoder;
  PredictorParams predictor;
};

struct SampleResult {
  SampleGrad grad;
  double loss = 0.0;
};

}  // namespace

StepStats pretrain_step(std::span<const VideoTensor> batch, PretrainState& state,
                        const MaskingConfig& masking, Rng& rng, int threads,
                        const std::string& batch_tag) {
  if (batch.empty()) throw std::invalid_argument("pretrain_step: empty batch");
  VideoModel& m = state.model;
  const EncoderConfig& cfg = m.cfg;
  // One mask per sample, drawn sequentially so the step stays deterministic.
  std::vector<MaskSpec> masks;
  masks.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    masks.push_back(make_mask(cfg.grid(), masking.ratio, masking.blocks, rng));
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  std::vector<SampleResult> results(batch.size());
  if (threads <= 0) threads = hardware_threads();
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    SampleResult& res = results[i];
    const MaskSpec& mask = masks[i];
    res.grad.encoder = make_encoder_zeros(cfg);
    res.grad.predictor = make_predictor_zeros(cfg);
    visit_params(res.grad.encoder, "", [](const std::string&, nn::Mat& g) { g.setZero(); });
    visit_params(res.grad.predictor, "", [](const std::string&, nn::Mat& g) { g.setZero(); });

    const nn::Mat patches = extract_patches(batch[i], cfg);
    // Context path through the online encoder, kept subset only.
    const nn::Mat patches_ctx = gather_rows(patches, mask.context_idx);
    nn::Mat tokens_ctx =
        nn::linear_fwd(m.online.embed, patches_ctx) + gather_rows(m.pos_enc, mask.context_idx);
    nn::TrunkCache enc_cache;
    const nn::Mat ctx_out = nn::trunk_fwd(m.online.trunk, cfg.heads, tokens_ctx, enc_cache);

    PredictorCache pred_cache;
    const nn::Mat pred =
        predictor_fwd(m.predictor, cfg, ctx_out, mask, m.pos_pred, pred_cache);

    // Regression targets: EMA encoder over the full sequence, restricted to
    // the masked positions afterwards.
    nn::Mat tokens_full = nn::linear_fwd(m.target.embed, patches) + m.pos_enc;
    const nn::Mat target_full = nn::trunk_fwd(m.target.trunk, cfg.heads, tokens_full);
    const nn::Mat target = gather_rows(target_full, mask.target_idx);

    res.loss = jepa_loss(pred, target);

    // d(mean |pred - target|)/dpred, scaled by the batch mean.
    nn::Mat dpred = (pred - target).array().sign().matrix() *
                    (inv_batch / static_cast<double>(pred.size()));
    const nn::Mat dctx_out =
        predictor_bwd(m.predictor, cfg, pred_cache, mask, dpred, res.grad.predictor);
    const nn::Mat dtokens =
        nn::trunk_bwd(m.online.trunk, cfg.heads, enc_cache, dctx_out, res.grad.encoder.trunk);
    nn::linear_bwd(m.online.embed, patches_ctx, dtokens, res.grad.encoder.embed);
  });

  // Fixed-order reduction keeps results independent of the thread count.
  SampleGrad total = std::move(results[0].grad);
  double loss = results[0].loss;
  for (std::size_t i = 1; i < results.size(); ++i) {
    loss += results[i].loss;
    auto add_into = [](auto& dst, const auto& src) {
      std::vector<nn::Mat*> d;
      std::vector<const nn::Mat*> s;
      visit_params(dst, "", [&](const std::string&, nn::Mat& m2) { d.push_back(&m2); });
      visit_params(src, "", [&](const std::string&, const nn::Mat& m2) { s.push_back(&m2); });
      for (std::size_t k = 0; k < d.size(); ++k) *d[k] += *s[k];
    };
    add_into(total.encoder, results[i].grad.encoder);
    add_into(total.predictor, results[i].grad.predictor);
  }
  loss *= inv_batch;

  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite pretraining loss";
    if (!batch_tag.empty()) msg << " (batch " << batch_tag << ")";
    msg << " at step " << state.schedule.step << "/" << state.schedule.total_steps
        << ", lr=" << lr_at(state.schedule) << ", wd=" << wd_at(state.schedule);
    throw NumericError(msg.str());
  }

  // AdamW on the context encoder and predictor only; the target encoder has
  // no gradient state anywhere.
  std::vector<std::pair<std::string, nn::Mat*>> params;
  std::vector<std::pair<std::string, const nn::Mat*>> grads;
  visit_params(m.online, "online.",
               [&](const std::string& n, nn::Mat& mat) { params.emplace_back(n, &mat); });
  visit_params(m.predictor, "predictor.",
               [&](const std::string& n, nn::Mat& mat) { params.emplace_back(n, &mat); });
  visit_params(total.encoder, "online.",
               [&](const std::string& n, const nn::Mat& mat) { grads.emplace_back(n, &mat); });
  visit_params(total.predictor, "predictor.",
               [&](const std::string& n, const nn::Mat& mat) { grads.emplace_back(n, &mat); });

  StepStats stats;
  stats.loss = loss;
  stats.lr = lr_at(state.schedule);
  stats.wd = wd_at(state.schedule);
  state.optimizer.step(params, grads, stats.lr, stats.wd);
  ema_update(m.target, m.online, momentum_at(state.schedule));
  state.schedule.step += 1;
  return stats;
}

namespace {

struct PreparedBatch {
  int64_t step = 0;
  std::vector<VideoTensor> tensors;
};

// Cut the [start, start+len) second window out of a stored video.
VideoSnippet cut_snippet(const VideoSnippet& video, double start, double len) {
  const int first = std::clamp(static_cast<int>(std::lround(start * video.fps)), 0,
                               video.frames - 1);
  const int count = std::clamp(static_cast<int>(std::lround(len * video.fps)), 1,
                               video.frames - first);
  VideoSnippet out;
  out.frames = count;
  out.height = video.height;
  out.width = video.width;
  out.fps = video.fps;
  out.source_id = video.source_id;
  out.start_time = start;
  const std::size_t fb = video.frame_bytes();
  out.data.assign(video.data.begin() + static_cast<std::ptrdiff_t>(first) * fb,
                  video.data.begin() + static_cast<std::ptrdiff_t>(first + count) * fb);
  return out;
}

}  // namespace

DapResult run_dap(std::span<const SnippetIndexEntry> index, const DetectionLookup& detections,
                  const VideoStore& videos, std::optional<CheckpointData> init,
                  const DapOptions& opts, const fs::path& run_dir, bool resume) {
  opts.model.validate();
  std::vector<const SnippetIndexEntry*> usable;
  for (const auto& e : index)
    if (e.has_detection) usable.push_back(&e);
  if (usable.empty())
    throw std::invalid_argument("run_dap: no snippets remain after the discard rule");

  fs::create_directories(run_dir / "checkpoints");

  PretrainState state{VideoModel::init(opts.model, opts.seed), AdamW(opts.train.adam),
                      make_schedule(opts.train)};
  int64_t discarded = 0;

  if (resume) {
    const auto latest = latest_checkpoint(run_dir);
    if (!latest)
      throw DataError("resume requested but no checkpoint under " +
                      (run_dir / "checkpoints").string());
    CheckpointData d = load_checkpoint(*latest);
    if (!opts.experiment_config_json.empty() && !d.experiment_config_json.empty() &&
        opts.experiment_config_json != d.experiment_config_json)
      throw DataError("config does not match checkpoint " + latest->string() +
                      "; refusing to resume");
    if (!(d.cfg == opts.model))
      throw DataError("model config does not match checkpoint " + latest->string());
    state.model.cfg = d.cfg;
    state.model.online = std::move(d.online);
    state.model.target = std::move(d.target);
    state.model.predictor = std::move(d.predictor);
    state.schedule = d.schedule;
    if (d.has_optimizer) state.optimizer.restore(d.optimizer_step, std::move(d.optimizer_slots));
  } else if (init) {
    // External initialization: adopt weights, keep a fresh schedule and
    // optimizer (DAP starts from the generic-pretraining weights).
    if (!(init->cfg == opts.model))
      throw DataError("init checkpoint encoder does not match the configured model");
    state.model.online = std::move(init->online);
    state.model.target = std::move(init->target);
    state.model.predictor = std::move(init->predictor);
  }

  // Loss curve: keep rows from before the resume point, drop later ones.
  const fs::path loss_path = run_dir / "losses.csv";
  std::vector<std::string> loss_rows;
  if (resume && fs::exists(loss_path)) {
    std::ifstream is(loss_path);
    std::string row;
    std::getline(is, row);  // header
    while (std::getline(is, row)) {
      if (row.empty()) continue;
      if (std::strtoll(row.c_str(), nullptr, 10) < state.schedule.step) loss_rows.push_back(row);
    }
  }

  const int threads = opts.threads > 0 ? opts.threads : hardware_threads();
  const int batch_size = opts.train.batch_size;

  // Deterministic sample assembly for one (step, slot) pair. Seeding mixes
  // the content key (source id, snippet start) with the visit step so
  // repeats of one snippet see fresh augmentations while resume stays exact.
  auto build_slot = [&](int64_t step, int slot) -> VideoTensor {
    Rng pick_rng(hash_mix(opts.seed, hash_mix(hash_str("dap-pick"),
                                              hash_mix(static_cast<uint64_t>(step),
                                                       static_cast<uint64_t>(slot)))));
    for (int attempt = 0; attempt < 100; ++attempt) {
      const auto& entry = *usable[static_cast<std::size_t>(
          pick_rng.uniform_int(static_cast<int64_t>(usable.size())))];
      const VideoSnippet& video = videos.get(entry.source_id);
      const VideoSnippet snip = cut_snippet(video, entry.snippet_start, entry.snippet_len);
      const int center_frame =
          static_cast<int>(std::lround((entry.snippet_start + 0.5 * entry.snippet_len) * video.fps));
      const DetectionRecord* rec = detections.nearest(entry.source_id, center_frame);
      DetectionRecord empty;
      Rng sample_rng(hash_mix(
          hash_mix(opts.seed, hash_str(entry.source_id)),
          hash_mix(hash_f64(entry.snippet_start),
                   hash_mix(static_cast<uint64_t>(step), static_cast<uint64_t>(slot)))));
      auto sample =
          build_pretrain_sample(snip, rec ? *rec : empty, sample_rng, opts.pipeline);
      if (sample) return normalize(*sample, opts.pipeline.norm);
      ++discarded;
    }
    throw DataError("run_dap: all candidate snippets discarded for step " +
                    std::to_string(step));
  };

  // Producer thread keeps a small batch backlog ahead of training.
  BoundedQueue<PreparedBatch> queue(4);
  const int64_t first_step = state.schedule.step;
  const int64_t total_steps = state.schedule.total_steps;
  std::exception_ptr producer_error;
  std::thread producer([&] {
    try {
      for (int64_t step = first_step; step < total_steps; ++step) {
        PreparedBatch batch;
        batch.step = step;
        batch.tensors.reserve(batch_size);
        for (int j = 0; j < batch_size; ++j) batch.tensors.push_back(build_slot(step, j));
        queue.push(std::move(batch));
      }
    } catch (...) {
      producer_error = std::current_exception();
    }
    queue.close();
  });

  DapResult result;
  double first_sum = 0.0, last_sum = 0.0;
  int64_t first_n = 0, last_n = 0;
  try {
    for (int64_t step = first_step; step < total_steps; ++step) {
      auto batch = queue.pop();
      if (!batch || batch->step != step) {
        producer.join();
        if (producer_error) std::rethrow_exception(producer_error);
        throw DataError("run_dap: sample producer stopped early");
      }
      Rng step_rng(hash_mix(opts.seed, hash_mix(hash_str("dap-step"),
                                                static_cast<uint64_t>(step))));
      const StepStats stats = pretrain_step(batch->tensors, state, opts.masking, step_rng,
                                            threads, "step-" + std::to_string(step));
      {
        std::ostringstream row;
        row << step << "," << stats.loss << "," << stats.lr << "," << stats.wd;
        loss_rows.push_back(row.str());
      }
      if (step < first_step + 100) {
        first_sum += stats.loss;
        ++first_n;
      }
      if (step >= total_steps - 100) {
        last_sum += stats.loss;
        ++last_n;
      }
      const bool at_interval =
          opts.train.checkpoint_interval > 0 && (step + 1) % opts.train.checkpoint_interval == 0;
      if (at_interval || step + 1 == total_steps) {
        CheckpointData d;
        d.cfg = state.model.cfg;
        d.online = state.model.online;
        d.target = state.model.target;
        d.predictor = state.model.predictor;
        d.schedule = state.schedule;
        d.seed = opts.seed;
        d.experiment_config_json = opts.experiment_config_json;
        d.has_optimizer = true;
        d.optimizer_step = state.optimizer.step_count();
        d.optimizer_slots = state.optimizer.slots();
        char name[32];
        std::snprintf(name, sizeof(name), "step_%08lld", static_cast<long long>(step + 1));
        const fs::path ckpt = run_dir / "checkpoints" / name;
        save_checkpoint(ckpt, d);
        result.final_checkpoint = ckpt;
      }
    }
  } catch (...) {
    queue.close();
    if (producer.joinable()) producer.join();
    throw;
  }
  queue.close();
  if (producer.joinable()) producer.join();
  if (producer_error) std::rethrow_exception(producer_error);

  {
    std::ofstream os(loss_path, std::ios::trunc);
    os << "step,loss,lr,wd\n";
    for (const auto& row : loss_rows) os << row << "\n";
  }
  result.mean_loss_first_100 = first_n ? first_sum / static_cast<double>(first_n) : 0.0;
  result.mean_loss_last_100 = last_n ? last_sum / static_cast<double>(last_n) : 0.0;
  result.discarded_snippets = discarded;
  return result;
}

}  // namespace bk
