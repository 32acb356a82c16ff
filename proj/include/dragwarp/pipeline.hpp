#pragma once

// End-to-end commands shared by the CLI and the HTTP service.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dragwarp/grid.hpp"
#include "dragwarp/projection.hpp"
#include "dragwarp/sampler.hpp"

namespace dragwarp {

/// Parsed DragSpec. `mask` is kept as written: a file path for the CLI, a
/// base64 PNG (optionally a data: URL) for the HTTP API.
struct DragSpec {
  std::vector<DragPair> pairs;
  std::string mask;
  PcddParams params;
};

/// {"pairs":[{"handle":[x,y],"target":[x,y]},...], "mask":"...", "params":{...}}
/// Throws BadJson, UnknownKey, InvalidArgument.
DragSpec parse_drag_spec(const std::string& json_text);

/// Applies a params object (same keys as DragSpec "params"). d_shield also
/// accepts "inf"; mu accepts null for automatic selection.
void apply_params_json(const std::string& json_text, PcddParams& params);

/// Applies one key=value override. Throws UnknownKey, InvalidArgument.
void apply_param_override(const std::string& assignment, PcddParams& params);

std::string params_to_json(const PcddParams& params);

/// Luminance for 3-channel grids, channel mean otherwise.
DepthMap auto_depth(const FeatureGrid& grid);

struct Displacement {
  Vec2 handle;
  Vec2 target;
  std::optional<Cell> landing;  // where the handle cell's point projected, if it moved on-grid
};

struct WarpOutput {
  FeatureGrid grid;
  WarpDiagnostics diagnostics;
  std::vector<Displacement> displacements;
  bool rotation_fallback = false;
};

/// Rescale depth, lift the masked region, drag, project, assemble, fill.
/// `depth` may have any shape; it is resized to the grid.
WarpOutput warp_grid(const FeatureGrid& image, const DepthMap& depth, const Mask& mask,
                     const std::vector<DragPair>& pairs, const PcddParams& params);

std::string diagnostics_to_json(const WarpDiagnostics& diagnostics);
std::string displacements_to_json(const std::vector<Displacement>& displacements);

/// Runs `body`, mapping dragwarp::Error to exit 2 (or 1 for non-user errors)
/// with {"error","detail"} on `err`, and any other exception to exit 1.
int run_guarded(std::ostream& err, const std::function<void()>& body);

struct WarpCommand {
  std::filesystem::path image;
  std::string depth = "auto";  // "auto" or an FGRID path
  std::filesystem::path drags;
  std::vector<std::string> overrides;
  std::filesystem::path out;
  std::optional<std::filesystem::path> png;  // defaults to out with .png
};
int cmd_warp(const WarpCommand& cmd, std::ostream& out, std::ostream& err);

struct SampleCommand {
  std::optional<std::filesystem::path> config;
  std::filesystem::path z0;
  std::optional<std::filesystem::path> drags;
  std::string depth = "auto";
  std::string prompt_src;
  std::string prompt_tgt;
  std::filesystem::path out;
  std::optional<int> steps;
  std::optional<std::filesystem::path> dump_attention;
  std::optional<std::filesystem::path> png;
};
int cmd_sample(const SampleCommand& cmd, std::ostream& out, std::ostream& err);

struct DepthRescaleCommand {
  std::filesystem::path input;  // PNG (luminance) or FGRID
  int height = 0;               // 0 keeps the input shape
  int width = 0;
  double dp_min = 0.0;
  double dp_max = 63.0;
  std::filesystem::path out;
  std::optional<std::filesystem::path> png;
};
int cmd_depth_rescale(const DepthRescaleCommand& cmd, std::ostream& out, std::ostream& err);

struct ScheduleCommand {
  std::optional<std::filesystem::path> config;
};
int cmd_schedule(const ScheduleCommand& cmd, std::ostream& out, std::ostream& err);

}  // namespace dragwarp
