// SPDX-License-Identifier: Apache-2.0
// doakit command-line front end. Exit codes: 0 success, 1 invalid
// configuration or malformed input, 2 missing input, 3 numeric failure.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "doakit/errors.hpp"

namespace {

using namespace doakit;

std::optional<nn::InferenceMode> parse_mode(const std::string& s) {
  if (s.empty() || s == "both") return std::nullopt;
  if (s == "threshold") return nn::InferenceMode::kThreshold;
  if (s == "top-o") return nn::InferenceMode::kTopO;
  throw std::invalid_argument("unknown mode '" + s + "' (expected threshold, top-o or both)");
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Network layers allocate and free tensors of tens of megabytes per call;
  // keeping them on the heap avoids repeated page faults.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"DOA estimation pipeline: synthesis, MUSIC targets, DOAnet training and evaluation"};
  app.require_subcommand(1);

  std::string config_path, scale, mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI experiment config")->check(CLI::ExistingFile);
    sub->add_option("--scale", scale, "desk or paper defaults");
    sub->add_option("--seed", seed, "override dataset and training seeds");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synthesize", "render recordings and write the manifest");
  auto* prep = app.add_subcommand("prepare", "features, MUSIC SPS targets and DOA targets");
  auto* music = app.add_subcommand("music-eval", "evaluate MUSIC with known source counts");
  auto* train = app.add_subcommand("train", "train one network per dataset and split");
  auto* infer = app.add_subcommand("infer", "run trained networks on their test sets");
  auto* eval = app.add_subcommand("eval", "write the comparison report");
  for (auto* sub : {synth, prep, music, train, infer, eval}) add_common(sub);
  for (auto* sub : {infer, eval}) {
    sub->add_option("--mode", mode, "threshold, top-o or both (default)")
        ->check(CLI::IsMember({"threshold", "top-o", "both"}));
  }

  auto* render = app.add_subcommand("render-sps", "draw SPS or DOA-probability frames as images");
  cli::RenderSpsOptions render_opts;
  std::string frames = "0", truth;
  render->add_option("sps_file", render_opts.sps_file, "DSPS file")->required();
  render->add_option("--frames", frames, "frame index or inclusive range a:b");
  render->add_option("--output", render_opts.output_dir, "output directory");
  render->add_option("--truth", truth, "scene CSV whose directions are marked");
  render->add_option("--zoom", render_opts.zoom, "pixels per grid cell")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (render->parsed()) {
      const auto [first, last] = cli::parse_frame_range(frames);
      render_opts.first_frame = first;
      render_opts.last_frame = last;
      if (!truth.empty()) render_opts.truth_scene = truth;
      cli::cmd_render_sps(render_opts, std::cout);
      return 0;
    }

    cli::Overrides overrides;
    if (!scale.empty()) overrides.scale = cli::parse_scale(scale);
    overrides.seed = seed;
    overrides.workers = workers;
    const auto config = cli::load_config(
        config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path), overrides);
    std::cout << "# resolved configuration\n" << config.to_ini() << "\n";

    if (synth->parsed()) cli::cmd_synthesize(config, std::cout);
    if (prep->parsed()) cli::cmd_prepare(config, std::cout);
    if (music->parsed()) {
      const auto reports = cli::cmd_music_eval(config, std::cout);
      write_report_table(std::cout, reports);
    }
    if (train->parsed()) cli::cmd_train(config, std::cout);
    if (infer->parsed()) cli::cmd_infer(config, parse_mode(mode), std::cout);
    if (eval->parsed()) {
      const auto reports = cli::cmd_eval(config, parse_mode(mode), std::cout);
      write_report_table(std::cout, reports);
    }
    return 0;
  } catch (const MissingInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
