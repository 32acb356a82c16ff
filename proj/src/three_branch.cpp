#include "dragwarp/three_branch.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "dragwarp/error.hpp"
#include "dragwarp/rng.hpp"

namespace dragwarp {
namespace {

Eigen::MatrixXd seeded_matrix(const CounterRng& rng, std::uint64_t& cursor, int rows, int cols,
                              double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal(cursor++);
  }
  return m;
}

FeatureGrid combine(const FeatureGrid& a, double sa, const FeatureGrid& b, double sb) {
  FeatureGrid out(a.height, a.width, a.depth_dim);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = sa * a.data[i] + sb * b.data[i];
  return out;
}

// eps_branch - eps_src + eps_cons
FeatureGrid combined_noise(const FeatureGrid& branch, const FeatureGrid& src, const FeatureGrid& cons) {
  FeatureGrid out(branch.height, branch.width, branch.depth_dim);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = branch.data[i] - src.data[i] + cons.data[i];
  }
  return out;
}

FeatureGrid guided_noise(const NoisePredictor& predictor, const FeatureGrid& h, int t,
                         const Eigen::VectorXd& cond, double scale) {
  return cfg_combine(predictor.predict(h, t, &cond), predictor.predict(h, t, nullptr), scale);
}

}  // namespace

ToyPredictor::ToyPredictor(int channels, std::uint64_t seed, int embed_dim) {
  if (channels <= 0 || embed_dim <= 0) {
    throw Error(ErrorCode::DimensionMismatch, "toy predictor needs positive widths");
  }
  const CounterRng rng(seed, stream_id(NoiseStream::ToyWeights, 2));
  std::uint64_t cursor = 0;
  a_ = seeded_matrix(rng, cursor, channels, channels, 0.2 / std::sqrt(static_cast<double>(channels)));
  b_ = seeded_matrix(rng, cursor, channels, embed_dim, 0.2 / std::sqrt(static_cast<double>(embed_dim)));
}

ToyPredictor::ToyPredictor(Eigen::MatrixXd a, Eigen::MatrixXd b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != a_.cols() || b_.rows() != a_.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "predictor matrices have inconsistent shapes");
  }
}

FeatureGrid ToyPredictor::predict(const FeatureGrid& z, int, const Eigen::VectorXd* cond) const {
  if (z.depth_dim != a_.rows() || (cond && cond->size() != b_.cols())) {
    throw Error(ErrorCode::DimensionMismatch, "predictor input does not match its matrices");
  }
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(a_.rows());
  if (cond) bias = b_ * (*cond);
  FeatureGrid out(z.height, z.width, z.depth_dim);
  const auto d = static_cast<Eigen::Index>(z.depth_dim);
  for (std::size_t i = 0; i < z.cell_count(); ++i) {
    const Eigen::Map<const Eigen::VectorXd> cell(z.data.data() + i * z.depth_dim, d);
    Eigen::Map<Eigen::VectorXd>(out.data.data() + i * z.depth_dim, d) = a_ * cell + bias;
  }
  return out;
}

FeatureGrid ZeroPredictor::predict(const FeatureGrid& z, int, const Eigen::VectorXd*) const {
  return FeatureGrid(z.height, z.width, z.depth_dim, 0.0);
}

Eigen::VectorXd pooled_embedding(const PromptTokens& prompt) {
  if (prompt.embeddings.rows() == 0) return Eigen::VectorXd::Zero(prompt.embeddings.cols());
  return prompt.embeddings.colwise().mean().transpose();
}

ThreeBranchResult run_three_branch(const ThreeBranchInputs& in, const SamplerConfig& config,
                                   const NoisePredictor& predictor, const StepObserver& observer,
                                   std::optional<int> max_steps) {
  validate_sampler_config(config);
  validate_grid(in.z0);
  validate_grid(in.z_tgt_start);
  if (!in.z0.same_shape(in.z_tgt_start) || in.mask.height != in.z0.height ||
      in.mask.width != in.z0.width) {
    throw Error(ErrorCode::ShapeMismatch, "source, target and mask shapes differ");
  }
  if (max_steps && *max_steps < 0) {
    throw Error(ErrorCode::InvalidArgument, "step limit must be non-negative");
  }

  const auto schedule = build_schedule(config.total_steps, config.beta_start, config.beta_end);
  const FeatureGrid shared = normal_like(in.z0, config.seed, stream_id(NoiseStream::Forward));
  const ToyAttention layer(in.z0.depth_dim, config.seed);
  const PromptTokens p_src = encode_prompt(in.prompt_src);
  const PromptTokens p_tgt = encode_prompt(in.prompt_tgt);
  const AlignmentMap align = align_tokens(p_src, p_tgt);
  const Eigen::VectorXd l_src = pooled_embedding(p_src);
  const Eigen::VectorXd l_tgt = pooled_embedding(p_tgt);

  auto noised_tgt = forward_noise(in.z_tgt_start, schedule, config.strength, shared);
  const int start = noised_tgt.start;
  ThreeBranchResult result;
  result.start = start;
  result.start_latent = noised_tgt.z;
  FeatureGrid z_tgt = std::move(noised_tgt.z);
  FeatureGrid z_ref = forward_noise(in.z0, schedule, config.strength, shared).z;

  const auto source_at = [&](int t) {
    const double ab = schedule.alpha_bar[static_cast<std::size_t>(t)];
    return combine(in.z0, std::sqrt(ab), shared, std::sqrt(1.0 - ab));
  };

  const int steps = max_steps ? std::min(start, *max_steps) : start;
  const int replace_gate = gate_timestep(start, config.t_c);
  const int route_gate = gate_timestep(start, config.t_s);

  for (int k = 1; k <= steps; ++k) {
    const int t = timestep_of_iteration(start, k);
    const double ab_t = schedule.alpha_bar[static_cast<std::size_t>(t)];
    const double ab_prev = schedule.alpha_bar[static_cast<std::size_t>(t) - 1];
    const double eta_tgt = eta_at(static_cast<double>(k - 1) / steps, config.eta);

    const FeatureGrid z_src = source_at(t);
    const BranchState src = layer.make_branch(z_src);
    const BranchState ref = layer.make_branch(z_ref);
    const BranchState tgt = layer.make_branch(z_tgt);
    const RoutedQkv routed = route_qkv(src, ref, tgt, t, route_gate);

    AttentionMap cross_src = layer.cross_map(z_src, p_src);
    AttentionMap cross_ref =
        replace_attention(cross_src, layer.cross_map(z_ref, p_tgt), align, t, replace_gate);
    AttentionMap cross_tgt = layer.cross_map(z_tgt, p_tgt);

    const FeatureGrid h_src = layer.apply(z_src, p_src, cross_src, routed.src);
    const FeatureGrid h_ref = layer.apply(z_ref, p_tgt, cross_ref, routed.ref);
    const FeatureGrid h_tgt = layer.apply(z_tgt, p_tgt, cross_tgt, routed.tgt);

    const FeatureGrid eps_src = guided_noise(predictor, h_src, t, l_src, config.cfg.src);
    const FeatureGrid eps_ref = guided_noise(predictor, h_ref, t, l_tgt, config.cfg.ref);
    const FeatureGrid eps_tgt = guided_noise(predictor, h_tgt, t, l_tgt, config.cfg.tgt);
    const FeatureGrid eps_cons = consistency_noise(z_src, in.z0, ab_t);

    const FeatureGrid noise_tgt =
        config.shared_noise ? shared
                            : normal_like(z_tgt, config.seed,
                                          stream_id(NoiseStream::Target, static_cast<std::uint64_t>(k)));
    const FeatureGrid noise_ref =
        config.shared_noise ? shared
                            : normal_like(z_ref, config.seed,
                                          stream_id(NoiseStream::Reference, static_cast<std::uint64_t>(k)));

    if (observer) {
      StepTrace trace;
      trace.iteration = k;
      trace.timestep = t;
      trace.replace_open = t >= replace_gate;
      trace.route_open = t >= route_gate;
      trace.fuse_open = k <= config.fuse_steps;
      trace.eta_target = eta_tgt;
      trace.own = RoutedQkv{src.qkv, ref.qkv, tgt.qkv};
      trace.routed = routed;
      trace.cross_src = std::move(cross_src);
      trace.cross_ref = std::move(cross_ref);
      trace.cross_tgt = std::move(cross_tgt);
      observer(trace);
    }

    FeatureGrid next_tgt =
        ddcm_step(z_tgt, combined_noise(eps_tgt, eps_src, eps_cons), ab_t, ab_prev, eta_tgt, noise_tgt);
    z_ref = ddcm_step(z_ref, combined_noise(eps_ref, eps_src, eps_cons), ab_t, ab_prev, 1.0, noise_ref);
    z_tgt = masked_fuse(next_tgt, z_ref, in.mask, k, config.fuse_steps);
  }

  result.steps_run = steps;
  result.z_tgt = std::move(z_tgt);
  result.z_ref = std::move(z_ref);
  result.z_src = source_at(start - steps);
  return result;
}

}  // namespace dragwarp
