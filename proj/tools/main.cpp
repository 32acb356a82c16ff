// dragwarp command-line front end.

#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "dragwarp/error.hpp"
#include "dragwarp/pipeline.hpp"
#include "dragwarp/service.hpp"

namespace {

dragwarp::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dragwarp;
  CLI::App app{"Depth-aware drag warping and three-branch toy sampling"};
  app.require_subcommand(1);

  WarpCommand warp;
  std::string warp_png;
  auto* w = app.add_subcommand("warp", "Warp an image by drag pairs inside a mask");
  w->add_option("--image", warp.image, "Input PNG")->required();
  w->add_option("--depth", warp.depth, "'auto' (luminance) or a depth FGRID")->capture_default_str();
  w->add_option("--drags", warp.drags, "DragSpec JSON; the mask path is relative to it")->required();
  w->add_option("--param", warp.overrides, "PCDD override key=value (repeatable)");
  w->add_option("--out", warp.out, "Output FGRID")->required();
  w->add_option("--png", warp_png, "Preview PNG (default: --out with .png)");

  SampleCommand sample;
  std::string sample_config, sample_drags, sample_dump, sample_png;
  int sample_steps = 0;
  auto* s = app.add_subcommand("sample", "Run the three-branch loop with the toy predictor");
  s->add_option("--config", sample_config, "Sampler config JSON");
  s->add_option("--z0", sample.z0, "Source latent FGRID")->required();
  s->add_option("--drags", sample_drags, "DragSpec JSON for the pre-warp");
  s->add_option("--depth", sample.depth, "'auto' or a depth FGRID for the pre-warp")->capture_default_str();
  s->add_option("--prompt-src", sample.prompt_src, "Source prompt");
  s->add_option("--prompt-tgt", sample.prompt_tgt, "Target prompt");
  s->add_option("--steps", sample_steps, "Stop after this many iterations");
  s->add_option("--dump-attention", sample_dump, "Directory for per-step attention maps");
  s->add_option("--png", sample_png, "Per-channel preview PNG");
  s->add_option("--out", sample.out, "Output FGRID")->required();

  DepthRescaleCommand rescale;
  auto* d = app.add_subcommand("depth-rescale", "Resize a depth map and map it onto [dp_min, dp_max]");
  d->add_option("--in", rescale.input, "PNG (luminance) or depth FGRID")->required();
  d->add_option("--height", rescale.height, "Output rows (default: input)");
  d->add_option("--width", rescale.width, "Output columns (default: input)");
  d->add_option("--dp-min", rescale.dp_min)->capture_default_str();
  d->add_option("--dp-max", rescale.dp_max)->capture_default_str();
  d->add_option("--out", rescale.out, "Output FGRID")->required();
  std::string rescale_png;
  d->add_option("--png", rescale_png, "Grayscale preview PNG");

  ScheduleCommand schedule;
  std::string schedule_config;
  auto* sc = app.add_subcommand("schedule", "Print the alpha_bar and eta tables");
  sc->add_option("--config", schedule_config, "Sampler config JSON");

  std::string bind, assets;
  auto* sv = app.add_subcommand("serve", "Serve the HTTP API and static UI assets");
  sv->add_option("--bind", bind, "host:port (default: DRAGWARP_BIND or 127.0.0.1:8080)");
  sv->add_option("--assets", assets, "Static asset directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*w) {
    if (!warp_png.empty()) warp.png = warp_png;
    return cmd_warp(warp, std::cout, std::cerr);
  }
  if (*s) {
    if (!sample_config.empty()) sample.config = sample_config;
    if (!sample_drags.empty()) sample.drags = sample_drags;
    if (!sample_dump.empty()) sample.dump_attention = sample_dump;
    if (!sample_png.empty()) sample.png = sample_png;
    if (s->count("--steps") > 0) sample.steps = sample_steps;
    return cmd_sample(sample, std::cout, std::cerr);
  }
  if (*d) {
    if (!rescale_png.empty()) rescale.png = rescale_png;
    return cmd_depth_rescale(rescale, std::cout, std::cerr);
  }
  if (*sc) {
    if (!schedule_config.empty()) schedule.config = schedule_config;
    return cmd_schedule(schedule, std::cout, std::cerr);
  }
  return run_guarded(std::cerr, [&] {
    ServiceOptions options = options_from_env();
    if (!bind.empty()) parse_bind(bind, options.host, options.port);
    if (!assets.empty()) options.assets = assets;
    Server server(options);
    const int port = server.bind();
    std::cerr << "listening on " << options.host << ':' << port << '\n';
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.run();
    g_server = nullptr;
  });
}
