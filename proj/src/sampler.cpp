#include "dragwarp/sampler.hpp"

#include <cmath>
#include <string>

#include "dragwarp/error.hpp"
#include "dragwarp/rng.hpp"
#include "json_util.hpp"

namespace dragwarp {
namespace {

void require_same_shape(const FeatureGrid& a, const FeatureGrid& b, const char* what) {
  if (!a.same_shape(b) || a.data.size() != b.data.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": tensor shapes differ");
  }
}

using detail::json;
using detail::read_number;
using detail::reject_unknown;

}  // namespace

NoiseSchedule build_schedule(int total_steps, double beta_start, double beta_end) {
  if (total_steps < 1 || !(beta_start > 0.0) || !(beta_end >= beta_start) || !(beta_end < 1.0)) {
    throw Error(ErrorCode::BadScheduleParams,
                "need T >= 1 and 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.total_steps = total_steps;
  s.alpha_bar.resize(static_cast<std::size_t>(total_steps) + 1);
  s.alpha_bar[0] = 1.0;
  for (int t = 1; t <= total_steps; ++t) {
    const double beta = total_steps == 1
                            ? beta_start
                            : beta_start + (beta_end - beta_start) * (t - 1) / (total_steps - 1);
    s.alpha_bar[static_cast<std::size_t>(t)] = s.alpha_bar[static_cast<std::size_t>(t) - 1] * (1.0 - beta);
  }
  return s;
}

void validate_eta_schedule(const EtaSchedule& e) {
  if (!(0.0 <= e.lo && e.lo <= e.hi && e.hi <= 1.0) ||
      !(0.0 <= e.ramp_start && e.ramp_start < e.ramp_end && e.ramp_end <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "eta schedule needs 0 <= lo <= hi <= 1 and 0 <= ramp_start < ramp_end <= 1");
  }
}

double eta_at(double progress, const EtaSchedule& sched) {
  if (!(progress >= 0.0 && progress <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "progress must lie in [0, 1]");
  }
  if (progress < sched.ramp_start) return sched.lo;
  if (progress > sched.ramp_end) return sched.hi;
  const double f = (progress - sched.ramp_start) / (sched.ramp_end - sched.ramp_start);
  return sched.lo + f * (sched.hi - sched.lo);
}

int effective_steps(int total_steps, double strength) {
  if (!(strength > 0.0 && strength <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "strength must lie in (0, 1]");
  }
  return static_cast<int>(std::floor(total_steps * strength + 1e-9));
}

FeatureGrid normal_like(const FeatureGrid& like, std::uint64_t seed, std::uint64_t stream) {
  FeatureGrid out(like.height, like.width, like.depth_dim);
  CounterRng(seed, stream).fill_normal(out.data);
  return out;
}

NoisedLatent forward_noise(const FeatureGrid& z0, const NoiseSchedule& schedule, double strength,
                           const FeatureGrid& noise) {
  require_same_shape(z0, noise, "forward_noise");
  const int start = effective_steps(schedule.total_steps, strength);
  const double ab = schedule.alpha_bar.at(static_cast<std::size_t>(start));
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  NoisedLatent out{FeatureGrid(z0.height, z0.width, z0.depth_dim), start};
  for (std::size_t i = 0; i < z0.data.size(); ++i) out.z.data[i] = a * z0.data[i] + b * noise.data[i];
  return out;
}

NoisedLatent forward_noise(const FeatureGrid& z0, const NoiseSchedule& schedule, double strength,
                           std::uint64_t seed) {
  return forward_noise(z0, schedule, strength,
                       normal_like(z0, seed, stream_id(NoiseStream::Forward)));
}

FeatureGrid cfg_combine(const FeatureGrid& cond, const FeatureGrid& uncond, double scale) {
  require_same_shape(cond, uncond, "cfg_combine");
  FeatureGrid out(cond.height, cond.width, cond.depth_dim);
  for (std::size_t i = 0; i < cond.data.size(); ++i) {
    out.data[i] = uncond.data[i] + scale * (cond.data[i] - uncond.data[i]);
  }
  return out;
}

FeatureGrid consistency_noise(const FeatureGrid& z_src_t, const FeatureGrid& z0,
                              double alpha_bar_t) {
  if (!(alpha_bar_t > 0.0 && alpha_bar_t < 1.0)) {
    throw Error(ErrorCode::AlphaOutOfRange, "consistency noise needs 0 < alpha_bar_t < 1");
  }
  require_same_shape(z_src_t, z0, "consistency_noise");
  const double a = std::sqrt(alpha_bar_t);
  const double b = std::sqrt(1.0 - alpha_bar_t);
  FeatureGrid out(z0.height, z0.width, z0.depth_dim);
  for (std::size_t i = 0; i < z0.data.size(); ++i) out.data[i] = (z_src_t.data[i] - a * z0.data[i]) / b;
  return out;
}

DdcmCoefficients ddcm_coefficients(double alpha_bar_t, double alpha_bar_prev, double eta) {
  if (!(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0 && alpha_bar_prev > 0.0 && alpha_bar_prev <= 1.0)) {
    throw Error(ErrorCode::AlphaOutOfRange, "alpha_bar values must lie in (0, 1]");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(ErrorCode::EtaOutOfRange, "eta must lie in [0, 1]");
  const double ratio = std::sqrt(alpha_bar_prev / alpha_bar_t);
  const double remaining = 1.0 - alpha_bar_prev;
  DdcmCoefficients c{};
  c.z_scale = ratio;
  c.direction = std::sqrt((1.0 - eta * eta) * remaining);
  c.sigma = eta * std::sqrt(remaining);
  return c;
}

FeatureGrid ddcm_step(const FeatureGrid& z_t, const FeatureGrid& eps, double alpha_bar_t,
                      double alpha_bar_prev, double eta, const FeatureGrid& noise) {
  require_same_shape(z_t, eps, "ddcm_step");
  require_same_shape(z_t, noise, "ddcm_step");
  const auto c = ddcm_coefficients(alpha_bar_t, alpha_bar_prev, eta);
  const double root_prev = std::sqrt(alpha_bar_prev);
  const double root_t = std::sqrt(alpha_bar_t);
  const double root_1mt = std::sqrt(1.0 - alpha_bar_t);
  FeatureGrid out(z_t.height, z_t.width, z_t.depth_dim);
  for (std::size_t i = 0; i < z_t.data.size(); ++i) {
    const double predicted_z0 = (z_t.data[i] - root_1mt * eps.data[i]) / root_t;
    out.data[i] = root_prev * predicted_z0 + c.direction * eps.data[i] + c.sigma * noise.data[i];
  }
  return out;
}

FeatureGrid ddcm_step(const FeatureGrid& z_t, const FeatureGrid& eps, double alpha_bar_t,
                      double alpha_bar_prev, double eta, std::uint64_t seed, std::uint64_t stream) {
  return ddcm_step(z_t, eps, alpha_bar_t, alpha_bar_prev, eta, normal_like(z_t, seed, stream));
}

void validate_sampler_config(const SamplerConfig& c) {
  build_schedule(c.total_steps, c.beta_start, c.beta_end);
  effective_steps(c.total_steps, c.strength);
  validate_eta_schedule(c.eta);
  if (c.t_c < 0 || c.t_s < 0 || c.fuse_steps < 0) {
    throw Error(ErrorCode::InvalidArgument, "t_c, t_s and fuse_steps must be non-negative");
  }
  for (double s : {c.cfg.src, c.cfg.ref, c.cfg.tgt}) {
    if (!std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "CFG scales must be finite");
  }
}

SamplerConfig parse_sampler_config(const std::string& json_text) {
  const json root = detail::parse_json(json_text);
  if (!root.is_object()) throw Error(ErrorCode::BadJson, "config must be a JSON object");
  reject_unknown(root,
                 {"T", "strength", "beta_start", "beta_end", "eta", "t_c", "t_s", "fuse_steps",
                  "cfg", "seed", "shared_noise"},
                 "");

  SamplerConfig c;
  read_number(root, "T", c.total_steps);
  read_number(root, "strength", c.strength);
  read_number(root, "beta_start", c.beta_start);
  read_number(root, "beta_end", c.beta_end);
  read_number(root, "t_c", c.t_c);
  read_number(root, "t_s", c.t_s);
  read_number(root, "fuse_steps", c.fuse_steps);
  if (const auto it = root.find("seed"); it != root.end()) {
    if (!it->is_number_unsigned()) {
      throw Error(ErrorCode::InvalidArgument, "config key 'seed' must be a non-negative integer");
    }
    c.seed = it->get<std::uint64_t>();
  }
  if (const auto it = root.find("shared_noise"); it != root.end()) {
    if (!it->is_boolean()) throw Error(ErrorCode::InvalidArgument, "'shared_noise' must be a boolean");
    c.shared_noise = it->get<bool>();
  }
  if (const auto it = root.find("eta"); it != root.end()) {
    if (!it->is_object()) throw Error(ErrorCode::InvalidArgument, "'eta' must be an object");
    reject_unknown(*it, {"lo", "hi", "ramp_start", "ramp_end"}, "eta.");
    read_number(*it, "lo", c.eta.lo);
    read_number(*it, "hi", c.eta.hi);
    read_number(*it, "ramp_start", c.eta.ramp_start);
    read_number(*it, "ramp_end", c.eta.ramp_end);
  }
  if (const auto it = root.find("cfg"); it != root.end()) {
    if (!it->is_object()) throw Error(ErrorCode::InvalidArgument, "'cfg' must be an object");
    reject_unknown(*it, {"src", "ref", "tgt"}, "cfg.");
    read_number(*it, "src", c.cfg.src);
    read_number(*it, "ref", c.cfg.ref);
    read_number(*it, "tgt", c.cfg.tgt);
  }
  validate_sampler_config(c);
  return c;
}

std::string sampler_config_to_json(const SamplerConfig& c) {
  json j = {
      {"T", c.total_steps},
      {"strength", c.strength},
      {"beta_start", c.beta_start},
      {"beta_end", c.beta_end},
      {"eta", {{"lo", c.eta.lo}, {"hi", c.eta.hi}, {"ramp_start", c.eta.ramp_start}, {"ramp_end", c.eta.ramp_end}}},
      {"t_c", c.t_c},
      {"t_s", c.t_s},
      {"fuse_steps", c.fuse_steps},
      {"cfg", {{"src", c.cfg.src}, {"ref", c.cfg.ref}, {"tgt", c.cfg.tgt}}},
      {"seed", c.seed},
      {"shared_noise", c.shared_noise},
  };
  return j.dump();
}

}  // namespace dragwarp
