#pragma once

#include <string>
#include <vector>

#include "mtae/common.hpp"
#include "mtae/manifest.hpp"

namespace mtae {

struct Fold {
  std::vector<std::string> train, validation, test;  // utterance ids
};

struct SplitPlan {
  std::string scheme;  // "tenfold" or "loso"
  std::vector<Fold> folds;
  std::vector<std::string> warnings;
};

// Ten folds by speaker: each speaker's utterances are shuffled (seeded) and
// dealt round-robin, so every fold sees every speaker with >= 10 utterances.
// Fold i tests on deal-bucket i and validates on bucket i+1 (mod 10).
SplitPlan make_tenfold(const std::vector<UtteranceRecord>& records, u64 seed);

// One fold per speaker: that speaker is the test set, the next speaker (in
// sorted order) is the validation carve-out, the rest train.
SplitPlan make_loso(const std::vector<UtteranceRecord>& records);

SplitPlan make_splits(const std::vector<UtteranceRecord>& records,
                      const std::string& scheme, u64 seed);

void save_split(const std::string& path, const SplitPlan& plan);
SplitPlan load_split(const std::string& path);

}  // namespace mtae
