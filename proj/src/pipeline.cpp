#include "dragwarp/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "dragwarp/error.hpp"
#include "dragwarp/geometry.hpp"
#include "dragwarp/io.hpp"
#include "dragwarp/three_branch.hpp"
#include "json_util.hpp"

namespace dragwarp {
namespace {

using detail::json;

Vec2 read_point(const json& v, const char* what) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

void apply_params(const json& obj, PcddParams& p) {
  if (!obj.is_object()) throw Error(ErrorCode::InvalidArgument, "'params' must be an object");
  detail::reject_unknown(obj,
                         {"dp_min", "dp_max", "d_origin", "d_shield", "alpha", "beta", "mu",
                          "fixed_point_count"},
                         "params.");
  detail::read_number(obj, "dp_min", p.dp_min);
  detail::read_number(obj, "dp_max", p.dp_max);
  detail::read_number(obj, "d_origin", p.d_origin);
  if (const auto it = obj.find("d_shield"); it != obj.end()) {
    if (it->is_string() && it->get<std::string>() == "inf") {
      p.d_shield = std::numeric_limits<double>::infinity();
    } else {
      detail::read_number(obj, "d_shield", p.d_shield);
    }
  }
  detail::read_number(obj, "alpha", p.alpha);
  detail::read_number(obj, "beta", p.beta);
  if (const auto it = obj.find("mu"); it != obj.end()) {
    if (it->is_null()) {
      p.mu.reset();
    } else {
      double mu = 0.0;
      detail::read_number(obj, "mu", mu);
      p.mu = mu;
    }
  }
  detail::read_number(obj, "fixed_point_count", p.fixed_point_count);
  validate_params(p);
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

DepthMap load_depth(const std::string& spec, const FeatureGrid& image) {
  if (spec == "auto") return auto_depth(image);
  return read_depth_fgrid(read_file(spec));
}

Mask load_mask_file(const std::filesystem::path& drags_path, const std::string& mask) {
  if (mask.empty()) throw Error(ErrorCode::InvalidArgument, "drag spec has no mask");
  std::filesystem::path path(mask);
  if (path.is_relative()) path = drags_path.parent_path() / path;
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::MaskNotFound, "mask file not found: " + path.string());
  }
  return png_to_mask(read_file(path));
}

std::filesystem::path preview_path(const std::filesystem::path& out,
                                   const std::optional<std::filesystem::path>& png) {
  if (png) return *png;
  auto p = out;
  p.replace_extension(".png");
  return p;
}

Bytes preview_png(const FeatureGrid& grid) {
  return grid.depth_dim == 1 || grid.depth_dim == 3 ? grid_to_png(grid) : channels_to_png(grid);
}

SamplerConfig load_config(const std::optional<std::filesystem::path>& path) {
  if (!path) return SamplerConfig{};
  return parse_sampler_config(read_text(*path));
}

FeatureGrid attention_grid(const AttentionMap& map, int height, int width) {
  const auto tokens = static_cast<int>(map.rows.rows());
  FeatureGrid g(height, width, std::max(tokens, 1), 0.0);
  for (int j = 0; j < tokens; ++j) {
    for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
      g.data[cell * g.depth_dim + j] = map.rows(j, static_cast<Eigen::Index>(cell));
    }
  }
  return g;
}

}  // namespace

DragSpec parse_drag_spec(const std::string& json_text) {
  const json root = detail::parse_json(json_text);
  if (!root.is_object()) throw Error(ErrorCode::BadJson, "drag spec must be a JSON object");
  detail::reject_unknown(root, {"pairs", "mask", "params"}, "");

  DragSpec spec;
  const auto pairs = root.find("pairs");
  if (pairs == root.end() || !pairs->is_array()) {
    throw Error(ErrorCode::InvalidArgument, "'pairs' must be an array");
  }
  for (const auto& item : *pairs) {
    if (!item.is_object()) throw Error(ErrorCode::InvalidArgument, "each pair must be an object");
    detail::reject_unknown(item, {"handle", "target"}, "pairs.");
    if (!item.contains("handle") || !item.contains("target")) {
      throw Error(ErrorCode::InvalidArgument, "each pair needs 'handle' and 'target'");
    }
    spec.pairs.push_back({read_point(item["handle"], "handle"), read_point(item["target"], "target")});
  }
  if (const auto it = root.find("mask"); it != root.end()) {
    if (!it->is_string()) throw Error(ErrorCode::InvalidArgument, "'mask' must be a string");
    spec.mask = it->get<std::string>();
  }
  if (const auto it = root.find("params"); it != root.end()) apply_params(*it, spec.params);
  return spec;
}

void apply_params_json(const std::string& json_text, PcddParams& params) {
  apply_params(detail::parse_json(json_text), params);
}

void apply_param_override(const std::string& assignment, PcddParams& params) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::InvalidArgument, "parameter override must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json obj = json::object();
  if (key == "mu" && value == "auto") {
    obj[key] = nullptr;
  } else if (key == "d_shield" && value == "inf") {
    obj[key] = "inf";
  } else {
    try {
      obj[key] = json::parse(value);
    } catch (const json::exception&) {
      throw Error(ErrorCode::InvalidArgument, "value for '" + key + "' is not a number");
    }
  }
  apply_params(obj, params);
}

std::string params_to_json(const PcddParams& p) {
  json j = {{"dp_min", p.dp_min},
            {"dp_max", p.dp_max},
            {"d_origin", p.d_origin},
            {"alpha", p.alpha},
            {"beta", p.beta},
            {"fixed_point_count", p.fixed_point_count}};
  j["d_shield"] = std::isinf(p.d_shield) ? json("inf") : json(p.d_shield);
  j["mu"] = p.mu ? json(*p.mu) : json(nullptr);
  return j.dump();
}

DepthMap auto_depth(const FeatureGrid& grid) {
  validate_grid(grid);
  if (grid.depth_dim == 3) return luminance_depth(grid);
  DepthMap d(grid.height, grid.width);
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    double sum = 0.0;
    for (int c = 0; c < grid.depth_dim; ++c) sum += grid.data[i * grid.depth_dim + c];
    d.values[i] = sum / grid.depth_dim;
  }
  return d;
}

WarpOutput warp_grid(const FeatureGrid& image, const DepthMap& depth, const Mask& mask,
                     const std::vector<DragPair>& pairs, const PcddParams& params) {
  validate_grid(image);
  validate_mask(mask);
  validate_params(params);
  if (mask.height != image.height || mask.width != image.width) {
    throw Error(ErrorCode::ShapeMismatch, "mask shape differs from the image");
  }
  if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "at least one drag pair is required");
  for (const auto& pair : pairs) validate_pair(pair, image.height, image.width);

  const DepthMap rescaled =
      rescale_depth(depth, image.height, image.width, params.dp_min, params.dp_max);
  const Vec3 origin = estimate_origin(mask, rescaled, params.d_origin);
  const PointCloud cloud = build_point_cloud(mask, rescaled, origin);
  const DragPartition partition = filter_drag_subject(cloud, pairs.front(), params.d_shield);
  const HybridDragResult dragged = hybrid_drag(partition, pairs, params, rescaled);
  const Projection proj = project_zbuffer(dragged.points, origin, image.height, image.width);
  const WarpedGrid warped = assemble_warped_grid(image, mask, partition, proj.cellmap);
  FillResult filled = bnni_fill(warped.grid, warped.void_cells);

  WarpOutput out;
  out.grid = std::move(filled.grid);
  out.rotation_fallback = dragged.rotation_fallback;
  out.diagnostics.moved = static_cast<std::int64_t>(partition.movable.points.size());
  out.diagnostics.static_count = static_cast<std::int64_t>(partition.static_pts.points.size());
  out.diagnostics.voids_filled = filled.filled;
  out.diagnostics.out_of_bounds = proj.out_of_bounds;
  out.diagnostics.collisions = proj.collisions;

  for (const auto& pair : pairs) {
    Displacement d{pair.handle, pair.target, std::nullopt};
    const Cell hc = cell_of(pair.handle, image.height, image.width);
    bool found = false;
    for (const auto& p : dragged.points) {
      if (p.src != hc) continue;
      found = true;
      const Vec3 g = p.pos + origin;
      const Cell landing{static_cast<int>(std::round(g.x())), static_cast<int>(std::round(g.y()))};
      if (landing.x >= 0 && landing.x < image.width && landing.y >= 0 && landing.y < image.height) {
        d.landing = landing;
      }
      break;
    }
    if (!found) d.landing = hc;  // static or unmasked handles stay put
    out.displacements.push_back(d);
  }
  return out;
}

std::string diagnostics_to_json(const WarpDiagnostics& d) {
  return json{{"moved", d.moved},
              {"static", d.static_count},
              {"voids_filled", d.voids_filled},
              {"out_of_bounds", d.out_of_bounds},
              {"collisions", d.collisions}}
      .dump();
}

std::string displacements_to_json(const std::vector<Displacement>& displacements) {
  json arr = json::array();
  for (const auto& d : displacements) {
    json item = {{"handle", {d.handle.x, d.handle.y}}, {"target", {d.target.x, d.target.y}}};
    item["landing"] = d.landing ? json{d.landing->x, d.landing->y} : json(nullptr);
    arr.push_back(std::move(item));
  }
  return arr.dump();
}

int run_guarded(std::ostream& err, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const Error& e) {
    err << json{{"error", std::string(e.name())}, {"detail", e.what()}}.dump() << '\n';
    return is_user_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"detail", e.what()}}.dump() << '\n';
    return 1;
  }
}

int cmd_warp(const WarpCommand& cmd, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const FeatureGrid image = image_to_grid(read_file(cmd.image));
    const DepthMap depth = load_depth(cmd.depth, image);
    DragSpec spec = parse_drag_spec(read_text(cmd.drags));
    for (const auto& o : cmd.overrides) apply_param_override(o, spec.params);
    const Mask mask = load_mask_file(cmd.drags, spec.mask);
    const WarpOutput result = warp_grid(image, depth, mask, spec.pairs, spec.params);
    write_file(cmd.out, write_fgrid(result.grid));
    write_file(preview_path(cmd.out, cmd.png), grid_to_png(result.grid));
    out << diagnostics_to_json(result.diagnostics) << '\n';
  });
}

int cmd_sample(const SampleCommand& cmd, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const SamplerConfig config = load_config(cmd.config);
    if (cmd.steps && *cmd.steps < 0) throw Error(ErrorCode::InvalidArgument, "--steps must be >= 0");
    ThreeBranchInputs in;
    in.z0 = read_fgrid(read_file(cmd.z0));
    in.prompt_src = cmd.prompt_src;
    in.prompt_tgt = cmd.prompt_tgt;
    if (cmd.drags) {
      DragSpec spec = parse_drag_spec(read_text(*cmd.drags));
      in.mask = load_mask_file(*cmd.drags, spec.mask);
      const WarpOutput warped =
          warp_grid(in.z0, load_depth(cmd.depth, in.z0), in.mask, spec.pairs, spec.params);
      in.z_tgt_start = warped.grid;
    } else {
      in.mask = Mask(in.z0.height, in.z0.width, true);
      in.z_tgt_start = in.z0;
    }

    const ToyPredictor predictor(in.z0.depth_dim, config.seed);
    StepObserver observer;
    if (cmd.dump_attention) {
      std::filesystem::create_directories(*cmd.dump_attention);
      observer = [&](const StepTrace& trace) {
        char name[32];
        const std::pair<const char*, const AttentionMap*> maps[] = {
            {"src", &trace.cross_src}, {"ref", &trace.cross_ref}, {"tgt", &trace.cross_tgt}};
        for (const auto& [branch, map] : maps) {
          std::snprintf(name, sizeof name, "step%02d_%s.fgrid", trace.iteration, branch);
          write_file(*cmd.dump_attention / name,
                     write_fgrid(attention_grid(*map, in.z0.height, in.z0.width)));
        }
      };
    }
    const auto result = run_three_branch(in, config, predictor, observer, cmd.steps);
    write_file(cmd.out, write_fgrid(result.z_tgt));
    if (cmd.png) write_file(*cmd.png, preview_png(result.z_tgt));
    out << json{{"start", result.start}, {"steps", result.steps_run}}.dump() << '\n';
  });
}

int cmd_depth_rescale(const DepthRescaleCommand& cmd, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const Bytes bytes = read_file(cmd.input);
    const bool is_fgrid = bytes.size() >= 4 && bytes[0] == 'F' && bytes[1] == 'G' &&
                          bytes[2] == 'R' && bytes[3] == 'D';
    const DepthMap depth = is_fgrid ? read_depth_fgrid(bytes) : luminance_depth(image_to_grid(bytes));
    if (cmd.height < 0 || cmd.width < 0) throw Error(ErrorCode::InvalidArgument, "shape must be >= 0");
    const int h = cmd.height > 0 ? cmd.height : depth.height;
    const int w = cmd.width > 0 ? cmd.width : depth.width;
    const DepthMap rescaled = rescale_depth(depth, h, w, cmd.dp_min, cmd.dp_max);
    write_file(cmd.out, write_depth_fgrid(rescaled));
    if (cmd.png) write_file(*cmd.png, depth_to_png(rescaled));
    out << json{{"h", h}, {"w", w}}.dump() << '\n';
  });
}

int cmd_schedule(const ScheduleCommand& cmd, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const SamplerConfig c = load_config(cmd.config);
    const auto sched = build_schedule(c.total_steps, c.beta_start, c.beta_end);
    const int start = effective_steps(c.total_steps, c.strength);
    out << std::setprecision(17);
    out << "# alpha_bar\n# t alpha_bar\n";
    for (int t = 0; t <= sched.total_steps; ++t) {
      out << t << ' ' << sched.alpha_bar[static_cast<std::size_t>(t)] << '\n';
    }
    out << "# eta (target branch; source and reference use 1)\n# iteration t progress eta\n";
    for (int k = 1; k <= start; ++k) {
      const double progress = static_cast<double>(k - 1) / start;
      out << k << ' ' << timestep_of_iteration(start, k) << ' ' << progress << ' '
          << eta_at(progress, c.eta) << '\n';
    }
  });
}

}  // namespace dragwarp
