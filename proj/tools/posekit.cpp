// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "CLI11.hpp"
#include "posekit/cli.hpp"

int main(int argc, char **argv) {
  using namespace posekit::cli;
  CLI::App app{"posekit: category-level 9D pose matching, losses and evaluation"};
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string profile;

  auto common = [&](CLI::App *cmd) {
    cmd->add_option("--config", opt.config, "Run config (JSON); defaults built in");
    cmd->add_option("--seed", seed, "Override the config seed");
    cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
    cmd->add_option("--out", opt.out, "Output path (default: stdout)");
  };

  auto *evaluate = app.add_subcommand("evaluate", "mAP report for a scene file");
  common(evaluate);
  evaluate->add_option("--scenes", opt.scenes, "Scene file")->required();

  auto *match = app.add_subcommand("match", "Per-scene assignment dump");
  common(match);
  match->add_option("--scenes", opt.scenes, "Scene file")->required();
  match->add_flag("--overwrite-boxes", opt.overwrite_boxes,
                  "Re-derive 2D boxes from cuboids even when present");

  auto *synth = app.add_subcommand("synth", "Write a synthetic scene file");
  common(synth);
  synth->add_option("--count", opt.count, "Number of scenes")->required();
  synth->add_option("--profile", profile, "Noise profile name from the config");

  auto *losses = app.add_subcommand("losses", "Loss breakdown after matching");
  common(losses);
  losses->add_option("--scenes", opt.scenes, "Scene file")->required();
  losses->add_flag("--overwrite-boxes", opt.overwrite_boxes,
                   "Re-derive 2D boxes from cuboids even when present");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : kUsage;
  }

  auto *cmd = app.get_subcommands().front();
  if (cmd->count("--seed"))
    opt.seed = seed;
  if (cmd->count("--threads"))
    opt.threads = threads;
  if (cmd == synth && cmd->count("--profile"))
    opt.profile = profile;

  if (cmd == evaluate)
    return cmd_evaluate(opt, std::cout, std::cerr);
  if (cmd == match)
    return cmd_match(opt, std::cout, std::cerr);
  if (cmd == synth)
    return cmd_synth(opt, std::cout, std::cerr);
  return cmd_losses(opt, std::cout, std::cerr);
}
