#include "mtae/splits.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "mtae/rng.hpp"

namespace mtae {

namespace {

std::map<std::string, std::vector<std::string>> by_speaker(
    const std::vector<UtteranceRecord>& records) {
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& r : records) groups[r.speaker_id].push_back(r.utterance_id);
  for (auto& [spk, utts] : groups) std::sort(utts.begin(), utts.end());
  if (groups.size() < 2) throw Error("splits: need at least 2 speakers");
  return groups;
}

}  // namespace

SplitPlan make_tenfold(const std::vector<UtteranceRecord>& records, u64 seed) {
  constexpr int kFolds = 10;
  auto groups = by_speaker(records);

  SplitPlan plan;
  plan.scheme = "tenfold";
  std::vector<std::vector<std::string>> buckets(kFolds);
  Rng rng(derive_seed(seed, "tenfold"));
  size_t speaker_index = 0;
  for (auto& [spk, utts] : groups) {
    if (utts.size() < kFolds)
      plan.warnings.push_back("speaker " + spk + " has only " +
                              std::to_string(utts.size()) +
                              " utterances; absent from some folds");
    rng.shuffle(utts);
    for (size_t j = 0; j < utts.size(); ++j)
      buckets[(speaker_index + j) % kFolds].push_back(utts[j]);
    ++speaker_index;
  }

  for (int i = 0; i < kFolds; ++i) {
    Fold fold;
    fold.test = buckets[static_cast<size_t>(i)];
    fold.validation = buckets[static_cast<size_t>((i + 1) % kFolds)];
    for (int j = 0; j < kFolds; ++j)
      if (j != i && j != (i + 1) % kFolds)
        fold.train.insert(fold.train.end(), buckets[static_cast<size_t>(j)].begin(),
                          buckets[static_cast<size_t>(j)].end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

SplitPlan make_loso(const std::vector<UtteranceRecord>& records) {
  auto groups = by_speaker(records);
  std::vector<std::string> speakers;
  for (const auto& [spk, utts] : groups) speakers.push_back(spk);

  SplitPlan plan;
  plan.scheme = "loso";
  for (size_t i = 0; i < speakers.size(); ++i) {
    Fold fold;
    fold.test = groups[speakers[i]];
    const std::string& val_speaker = speakers[(i + 1) % speakers.size()];
    fold.validation = groups[val_speaker];
    for (size_t j = 0; j < speakers.size(); ++j)
      if (j != i && speakers[j] != val_speaker)
        fold.train.insert(fold.train.end(), groups[speakers[j]].begin(),
                          groups[speakers[j]].end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

SplitPlan make_splits(const std::vector<UtteranceRecord>& records,
                      const std::string& scheme, u64 seed) {
  if (scheme == "tenfold") return make_tenfold(records, seed);
  if (scheme == "loso") return make_loso(records);
  throw ConfigError("unknown split scheme: " + scheme);
}

void save_split(const std::string& path, const SplitPlan& plan) {
  nlohmann::ordered_json j;
  j["scheme"] = plan.scheme;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : plan.folds) {
    nlohmann::ordered_json jf;
    jf["train"] = f.train;
    jf["validation"] = f.validation;
    jf["test"] = f.test;
    j["folds"].push_back(jf);
  }
  if (!plan.warnings.empty()) j["warnings"] = plan.warnings;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("splits: cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
}

SplitPlan load_split(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("splits: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  SplitPlan plan;
  plan.scheme = j.at("scheme").get<std::string>();
  for (const auto& jf : j.at("folds")) {
    Fold fold;
    fold.train = jf.at("train").get<std::vector<std::string>>();
    fold.validation = jf.at("validation").get<std::vector<std::string>>();
    fold.test = jf.at("test").get<std::vector<std::string>>();
    plan.folds.push_back(std::move(fold));
  }
  if (j.contains("warnings"))
    plan.warnings = j["warnings"].get<std::vector<std::string>>();
  return plan;
}

}  // namespace mtae
