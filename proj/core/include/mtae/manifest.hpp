#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mtae/common.hpp"

namespace mtae {

enum class Gender { male, female };

const char* gender_name(Gender g);
Gender gender_from_name(const std::string& name);

struct UtteranceRecord {
  std::string utterance_id;
  std::string audio_path;
  std::string corpus;
  std::string speaker_id;
  Gender gender = Gender::male;
  std::optional<std::string> emotion;
  std::optional<double> activation;  // [1,5]
  std::optional<double> valence;     // [1,5]
};

// JSON-lines, one utterance per line. Validation walks the whole file and
// reports every offending line in one error.
std::vector<UtteranceRecord> load_manifest(const std::string& path);
std::vector<UtteranceRecord> parse_manifest(const std::string& text,
                                            const std::string& origin);
void save_manifest(const std::string& path,
                   const std::vector<UtteranceRecord>& records);

// IEMOCAP-style class merge: every `excited` becomes `happy`. Idempotent.
std::vector<UtteranceRecord> merge_happy_excited(
    std::vector<UtteranceRecord> records);

enum class Level { low, medium, high };
const char* level_name(Level level);

// Two cut points split [1,5] into [1,cut1], (cut1,cut2], (cut2,5].
struct LevelMappingRule {
  std::string corpus;
  double cut1 = 0, cut2 = 0;
};

// Known corpus tags: "iemocap" (cuts 2.0/3.5), "msp-improv" (2.5/3.5); the
// synthetic corpus ("synth", "synth-aux") borrows the IEMOCAP cuts.
LevelMappingRule level_rule(const std::string& corpus);
Level map_levels(double value, const LevelMappingRule& rule);

}  // namespace mtae
