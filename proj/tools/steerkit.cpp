// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

// steerkit: steer | bench | score | scene. Exit codes: 0 ok, 2 config,
// 3 numeric, 4 bridge protocol.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "steerkit/app.hpp"
#include "steerkit/bench.hpp"
#include "steerkit/config.hpp"
#include "steerkit/error.hpp"
#include "steerkit/version.hpp"

namespace fs = std::filesystem;
using namespace steerkit;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::string> bridge;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Run config (JSON) or a run manifest")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Override the config seed");
  cmd->add_option("--out", f.out, "Output directory (default: config output)");
  cmd->add_option("--bridge", f.bridge, "Reconstruction bridge command line; replaces the oracle");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c = load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output = f.out;
  if (f.bridge) c.bridge = *f.bridge;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steerkit: reward-steered sampling with geometric rewards"};
  app.set_version_flag("--version", std::string(kVersion) + " (" + kGitStamp + ")");
  app.require_subcommand(1);

  CommonFlags steer_f, bench_f, score_f, scene_f;

  CLI::App* steer = app.add_subcommand("steer", "Run steering or best-of-N and write the result");
  add_common(steer, steer_f);

  CLI::App* bench = app.add_subcommand("bench", "Run a benchmark suite and write <suite>.csv");
  add_common(bench, bench_f);
  std::string suite;
  bench->add_option("--suite", suite, "convergence | scaling | schedule | prop1 | bon")
      ->required()
      ->check(CLI::IsMember({"convergence", "scaling", "schedule", "prop1", "bon"}));

  CLI::App* score = app.add_subcommand("score", "Evaluate the configured reward standalone");
  add_common(score, score_f);
  std::string frames_dir, estimate_dir, sample_path;
  auto* frames_opt = score->add_option("--frames", frames_dir, "Directory of frame_NNNN.f32t")->check(CLI::ExistingDirectory);
  auto* est_opt = score->add_option("--estimate", estimate_dir, "Estimate directory")->check(CLI::ExistingDirectory);
  auto* sample_opt = score->add_option("--sample", sample_path, "Latent tensor to score")->check(CLI::ExistingFile);
  frames_opt->needs(est_opt);
  est_opt->needs(frames_opt);
  sample_opt->excludes(frames_opt);

  CLI::App* scene = app.add_subcommand("scene", "Synthesise and render a ground-truth scene");
  add_common(scene, scene_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*steer) {
      const RunConfig c = resolve(steer_f);
      const SteerResult r = run_steer(c, c.output);
      std::printf("selected particle %zu reward %.17g -> %s\n", r.selected_index, r.selected_reward, c.output.c_str());
    } else if (*bench) {
      const RunConfig c = resolve(bench_f);
      const BenchReport r = run_bench(suite, c);
      const fs::path out(c.output);
      fs::create_directories(out);
      write_bench_csv(out / (suite + ".csv"), r);
      std::ofstream(out / (suite + "_manifest.json")) << r.manifest.dump(2) << '\n';
      for (const BenchRow& row : r.rows) {
        if (row.seed == "all") std::printf("%s %s %s = %.6g\n", suite.c_str(), row.setting.c_str(), row.metric.c_str(), row.value);
      }
    } else if (*score) {
      const RunConfig c = resolve(score_f);
      if (!sample_path.empty()) {
        std::printf("score %.17g\n", run_score_sample(c, sample_path, c.output));
      } else if (!frames_dir.empty()) {
        const GeoScore s = run_score(c, frames_dir, estimate_dir, c.output);
        std::printf("score %.17g%s\n", s.score, s.zero_support ? " (zero support)" : "");
      } else {
        std::fprintf(stderr, "steerkit: error: score needs --sample or --frames with --estimate\n");
        return 2;
      }
    } else if (*scene) {
      RunConfig c = resolve(scene_f);
      if (scene_f.seed) c.backend.scene_seed = *scene_f.seed;
      run_scene(c, c.output);
      std::printf("scene written to %s\n", c.output.c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "steerkit: error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "steerkit: error: %s\n", e.what());
    return 3;
  }
  return 0;
}
