#pragma once

// Three-branch denoising loop: source, reference and target trajectories
// advanced together under a noise predictor.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "dragwarp/attention.hpp"
#include "dragwarp/grid.hpp"
#include "dragwarp/sampler.hpp"

namespace dragwarp {

/// eps(z, t, l). `cond` is the pooled prompt embedding, or null for the
/// unconditional prediction.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual FeatureGrid predict(const FeatureGrid& z, int t, const Eigen::VectorXd* cond) const = 0;
};

/// eps = A z_cell + B mean(l) per cell, with A and B drawn from the seed.
class ToyPredictor final : public NoisePredictor {
 public:
  ToyPredictor(int channels, std::uint64_t seed, int embed_dim = kEmbeddingDim);
  ToyPredictor(Eigen::MatrixXd a, Eigen::MatrixXd b);

  FeatureGrid predict(const FeatureGrid& z, int t, const Eigen::VectorXd* cond) const override;

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::MatrixXd& b() const { return b_; }

 private:
  Eigen::MatrixXd a_;  // channels x channels
  Eigen::MatrixXd b_;  // channels x embed_dim
};

class ZeroPredictor final : public NoisePredictor {
 public:
  FeatureGrid predict(const FeatureGrid& z, int t, const Eigen::VectorXd* cond) const override;
};

/// Mean of the token embeddings; zero vector for an empty prompt.
Eigen::VectorXd pooled_embedding(const PromptTokens& prompt);

/// Gates are stated in denoising iterations (1-based, counted from the start
/// timestep); replace_attention and route_qkv take timesteps. Iteration k runs
/// at timestep start - k + 1, so a gate open for the first n iterations opens
/// at timesteps >= start - n + 1.
constexpr int timestep_of_iteration(int start, int iteration) { return start - iteration + 1; }
constexpr int gate_timestep(int start, int open_iterations) { return start - open_iterations + 1; }

struct ThreeBranchInputs {
  FeatureGrid z0;            // clean source latent
  FeatureGrid z_tgt_start;   // clean target latent (drag-warped z0)
  Mask mask;                 // fusion mask; all-true disables fusion
  std::string prompt_src;
  std::string prompt_tgt;
};

struct StepTrace {
  int iteration = 0;
  int timestep = 0;
  bool replace_open = false;
  bool route_open = false;
  bool fuse_open = false;
  double eta_target = 0.0;
  RoutedQkv own;     // each branch's own projections this step
  RoutedQkv routed;  // what each branch attended with
  AttentionMap cross_src;
  AttentionMap cross_ref;  // after row replacement
  AttentionMap cross_tgt;
};

using StepObserver = std::function<void(const StepTrace&)>;

struct ThreeBranchResult {
  FeatureGrid z_tgt;
  FeatureGrid z_src;
  FeatureGrid z_ref;
  FeatureGrid start_latent;  // noised target latent before the first step
  int start = 0;
  int steps_run = 0;
};

/// Runs the loop from the start timestep down to 0 (or for at most
/// `max_steps` iterations). Throws ShapeMismatch and any component error.
ThreeBranchResult run_three_branch(const ThreeBranchInputs& inputs, const SamplerConfig& config,
                                   const NoisePredictor& predictor,
                                   const StepObserver& observer = {},
                                   std::optional<int> max_steps = std::nullopt);

}  // namespace dragwarp
