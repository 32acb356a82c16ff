#pragma once

// Noise schedule and the target-focused DDCM update.
//
// alpha_bar holds cumulative products: alpha_bar[0] = 1, alpha_bar[t] =
// prod_{s<=t} (1 - beta_s). Timestep t counts down during denoising.

#include <cstdint>
#include <string>
#include <vector>

#include "dragwarp/grid.hpp"

namespace dragwarp {

struct NoiseSchedule {
  int total_steps = 0;
  std::vector<double> alpha_bar;  // total_steps + 1 entries
};

/// Linearly spaced betas from beta_start to beta_end (beta_start alone when
/// T = 1). Throws BadScheduleParams.
NoiseSchedule build_schedule(int total_steps, double beta_start = 1e-4, double beta_end = 0.02);

struct EtaSchedule {
  double lo = 0.5;
  double hi = 0.9;
  double ramp_start = 0.3;
  double ramp_end = 0.7;
};

void validate_eta_schedule(const EtaSchedule& sched);

/// lo before ramp_start, hi after ramp_end, linear in between.
double eta_at(double progress, const EtaSchedule& sched);

/// floor(T * strength), guarded against representation error (15 * 0.7 -> 10).
int effective_steps(int total_steps, double strength);

/// Tensor of standard normals shaped like `like`, element i drawn from
/// CounterRng(seed, stream).normal(i).
FeatureGrid normal_like(const FeatureGrid& like, std::uint64_t seed, std::uint64_t stream);

struct NoisedLatent {
  FeatureGrid z;
  int start = 0;  // timestep the noised latent sits at
};

/// sqrt(ab) z0 + sqrt(1 - ab) noise at ab = alpha_bar[floor(T * strength)].
NoisedLatent forward_noise(const FeatureGrid& z0, const NoiseSchedule& schedule, double strength,
                           const FeatureGrid& noise);
NoisedLatent forward_noise(const FeatureGrid& z0, const NoiseSchedule& schedule, double strength,
                           std::uint64_t seed);

/// uncond + scale (cond - uncond). Throws ShapeMismatch.
FeatureGrid cfg_combine(const FeatureGrid& cond, const FeatureGrid& uncond, double scale);

/// (z_src_t - sqrt(ab_t) z0) / sqrt(1 - ab_t). Throws AlphaOutOfRange.
FeatureGrid consistency_noise(const FeatureGrid& z_src_t, const FeatureGrid& z0, double alpha_bar_t);

struct DdcmCoefficients {
  double z_scale;     // sqrt(ab_prev / ab_t), applied to z_t
  double direction;   // sqrt((1 - eta^2)(1 - ab_prev))
  double sigma;       // eta sqrt(1 - ab_prev)
};

/// Throws AlphaOutOfRange, EtaOutOfRange.
DdcmCoefficients ddcm_coefficients(double alpha_bar_t, double alpha_bar_prev, double eta);

/// z_prev = sqrt(ab_prev) (z_t - sqrt(1 - ab_t) eps) / sqrt(ab_t)
///        + sqrt((1 - eta^2)(1 - ab_prev)) eps + eta sqrt(1 - ab_prev) noise
FeatureGrid ddcm_step(const FeatureGrid& z_t, const FeatureGrid& eps, double alpha_bar_t,
                      double alpha_bar_prev, double eta, const FeatureGrid& noise);
FeatureGrid ddcm_step(const FeatureGrid& z_t, const FeatureGrid& eps, double alpha_bar_t,
                      double alpha_bar_prev, double eta, std::uint64_t seed, std::uint64_t stream);

struct CfgScales {
  double src = 1.0;
  double ref = 2.0;
  double tgt = 2.0;
};

struct SamplerConfig {
  int total_steps = 15;
  double strength = 0.7;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  EtaSchedule eta;
  int t_c = 3;         // denoising iterations with attention-row replacement
  int t_s = 5;         // denoising iterations with source Q/K in the reference branch
  int fuse_steps = 4;  // denoising iterations with masked latent fusion
  CfgScales cfg;
  std::uint64_t seed = 0;
  bool shared_noise = false;  // reference/target random terms reuse the forward noise
};

void validate_sampler_config(const SamplerConfig& config);

/// Parses the JSON config; missing keys keep their defaults. Throws BadJson,
/// UnknownKey, InvalidArgument.
SamplerConfig parse_sampler_config(const std::string& json_text);
std::string sampler_config_to_json(const SamplerConfig& config);

}  // namespace dragwarp
