#pragma once

#include "mtae/config.hpp"

namespace mtae {

// Batch entry points behind the CLI. Each validates its key set, writes its
// outputs (plus the fully-resolved config) under the run directory, and
// returns a process exit code; configuration problems throw ConfigError.

int cmd_synth(const RunConfig& cfg);
int cmd_preprocess(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_sweep(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);

}  // namespace mtae
