// mtae command line front end. Every subcommand takes the same knobs: a
// `key = value` config file plus direct flag overrides, with the command
// line winning over the file and the file over built-in defaults.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mtae/commands.hpp"
#include "mtae/config.hpp"

namespace {

struct FlagSet {
  std::string config, seed, out, mode, scheme, alpha, beta, precision;
  std::vector<std::string> sets;
};

void add_options(CLI::App* cmd, FlagSet& f) {
  cmd->add_option("--config", f.config, "run configuration file");
  cmd->add_option("--seed", f.seed, "rng seed");
  cmd->add_option("--out", f.out, "run output directory");
  cmd->add_option("--mode", f.mode, "stl, mtl or mtl-aux")
      ->check(CLI::IsMember({"stl", "mtl", "mtl-aux"}));
  cmd->add_option("--scheme", f.scheme, "tenfold or loso")
      ->check(CLI::IsMember({"tenfold", "loso"}));
  cmd->add_option("--alpha", f.alpha, "autoencoder loss weight");
  cmd->add_option("--beta", f.beta, "emotion loss weight");
  cmd->add_option("--precision", f.precision, "f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_option("--set", f.sets,
                  "override any config key, key=value (repeatable)");
}

mtae::RunConfig build_config(const CLI::App* cmd, const FlagSet& f) {
  mtae::RunConfig cfg;
  if (cmd->count("--config") > 0) cfg = mtae::RunConfig::from_file(f.config);
  for (const auto& kv : f.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw mtae::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (cmd->count("--seed") > 0) cfg.set("seed", f.seed);
  if (cmd->count("--out") > 0) cfg.set("out", f.out);
  if (cmd->count("--mode") > 0) cfg.set("mode", f.mode);
  if (cmd->count("--scheme") > 0) cfg.set("scheme", f.scheme);
  if (cmd->count("--alpha") > 0) cfg.set("alpha", f.alpha);
  if (cmd->count("--beta") > 0) cfg.set("beta", f.beta);
  if (cmd->count("--precision") > 0) cfg.set("precision", f.precision);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-task adversarial autoencoder for speech emotion"};
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const mtae::RunConfig&);
  };
  const Entry entries[] = {
      {"synth", "generate a synthetic labeled speech corpus", mtae::cmd_synth},
      {"preprocess", "compute and cache log-spectrogram segments",
       mtae::cmd_preprocess},
      {"train", "train one fold and write a checkpoint", mtae::cmd_train},
      {"eval", "score checkpoints on their test folds", mtae::cmd_eval},
      {"sweep", "grid sweep over alpha, beta or auxiliary speaker count",
       mtae::cmd_sweep},
      {"verify", "speaker verification EER from d-vectors", mtae::cmd_verify},
  };

  FlagSet flags;
  std::map<const CLI::App*, int (*)(const mtae::RunConfig&)> handlers;
  for (const auto& e : entries) {
    CLI::App* cmd = app.add_subcommand(e.name, e.help);
    add_options(cmd, flags);
    handlers[cmd] = e.fn;
  }

  CLI11_PARSE(app, argc, argv);

  const CLI::App* cmd = app.get_subcommands().front();
  try {
    return handlers.at(cmd)(build_config(cmd, flags));
  } catch (const mtae::ConfigError& e) {
    std::cerr << "mtae " << cmd->get_name() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mtae " << cmd->get_name() << ": " << e.what() << "\n";
    return 1;
  }
}
