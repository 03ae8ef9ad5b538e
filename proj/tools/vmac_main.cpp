#include <CLI11.hpp>

#include "vmac/run/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vmac - latent-coordinated multi-agent actor-critic experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;

  auto* train = app.add_subcommand("train", "train per-seed and aggregate metrics");
  train->add_option("--config", config_path, "experiment config (json)")->required();
  train->add_option("--seed-override", seed_override, "train only this seed")
      ->each([&](const std::string&) { has_seed_override = true; });
  train->add_option("--out", out_dir, "output directory override");

  std::string checkpoint;
  int episodes = 10;
  std::string mode = "zero";
  std::uint64_t eval_seed = 7;
  std::string dump_path;
  auto* eval = app.add_subcommand("eval", "run decentralized evaluation of a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--episodes", episodes, "number of episodes");
  eval->add_option("--mode", mode, "latent mode at execution: zero|seeded");
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--dump", dump_path, "write one episode as json-lines");

  std::string report_path;
  auto* verify = app.add_subcommand("verify", "run the exact-computation oracle suite");
  verify->add_option("--report", report_path, "write the full report (json)");

  auto* sweep = app.add_subcommand("sweep", "run the config's sweep block");
  sweep->add_option("--config", config_path, "experiment config (json)")->required();
  sweep->add_option("--out", out_dir, "output directory override");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    return vmac::run::cmd_train(
        config_path,
        has_seed_override ? std::optional<std::uint64_t>(seed_override) : std::nullopt,
        out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir));
  }
  if (eval->parsed()) {
    return vmac::run::cmd_eval(checkpoint, episodes, mode, eval_seed,
                               dump_path.empty() ? std::nullopt
                                                 : std::optional<std::string>(dump_path));
  }
  if (verify->parsed()) {
    return vmac::run::cmd_verify(report_path.empty() ? std::nullopt
                                                     : std::optional<std::string>(report_path));
  }
  if (sweep->parsed()) {
    return vmac::run::cmd_sweep(config_path, out_dir.empty()
                                                 ? std::nullopt
                                                 : std::optional<std::string>(out_dir));
  }
  return 1;
}
