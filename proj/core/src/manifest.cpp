#include "mtae/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mtae {

using json = nlohmann::json;

const char* gender_name(Gender g) {
  return g == Gender::male ? "male" : "female";
}

Gender gender_from_name(const std::string& name) {
  if (name == "male") return Gender::male;
  if (name == "female") return Gender::female;
  throw ConfigError("unknown gender: " + name);
}

namespace {

const std::set<std::string> kKnownKeys = {
    "utterance_id", "audio_path", "corpus",     "speaker_id",
    "gender",       "emotion",    "activation", "valence"};

std::string require_string(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field ") + key);
  if (!j[key].is_string() || j[key].get<std::string>().empty())
    throw ConfigError(std::string("field ") + key +
                      " must be a non-empty string");
  return j[key].get<std::string>();
}

std::optional<double> optional_dimension(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  if (!j[key].is_number())
    throw ConfigError(std::string("field ") + key + " must be a number");
  double v = j[key].get<double>();
  if (v < 1.0 || v > 5.0)
    throw ConfigError(std::string(key) + " " + std::to_string(v) +
                      " outside [1,5]");
  return v;
}

UtteranceRecord parse_record(const std::string& line) {
  json j = json::parse(line);
  if (!j.is_object()) throw ConfigError("record is not a JSON object");
  for (const auto& item : j.items())
    if (!kKnownKeys.count(item.key()))
      throw ConfigError("unknown field " + item.key());
  UtteranceRecord r;
  r.utterance_id = require_string(j, "utterance_id");
  r.audio_path = require_string(j, "audio_path");
  r.corpus = require_string(j, "corpus");
  r.speaker_id = require_string(j, "speaker_id");
  r.gender = gender_from_name(require_string(j, "gender"));
  if (j.contains("emotion")) {
    if (!j["emotion"].is_string() || j["emotion"].get<std::string>().empty())
      throw ConfigError("field emotion must be a non-empty string");
    r.emotion = j["emotion"].get<std::string>();
  }
  r.activation = optional_dimension(j, "activation");
  r.valence = optional_dimension(j, "valence");
  return r;
}

}  // namespace

std::vector<UtteranceRecord> parse_manifest(const std::string& text,
                                            const std::string& origin) {
  std::vector<UtteranceRecord> records;
  std::vector<std::string> problems;
  std::set<std::string> seen_ids;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      UtteranceRecord r = parse_record(line);
      if (!seen_ids.insert(r.utterance_id).second)
        throw ConfigError("duplicate utterance_id " + r.utterance_id);
      records.push_back(std::move(r));
    } catch (const json::parse_error& e) {
      problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = origin + ": " + std::to_string(problems.size()) +
                      " invalid record(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return records;
}

std::vector<UtteranceRecord> load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("manifest: cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_manifest(buf.str(), path);
}

void save_manifest(const std::string& path,
                   const std::vector<UtteranceRecord>& records) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("manifest: cannot open " + path + " for writing");
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["utterance_id"] = r.utterance_id;
    j["audio_path"] = r.audio_path;
    j["corpus"] = r.corpus;
    j["speaker_id"] = r.speaker_id;
    j["gender"] = gender_name(r.gender);
    if (r.emotion) j["emotion"] = *r.emotion;
    if (r.activation) j["activation"] = *r.activation;
    if (r.valence) j["valence"] = *r.valence;
    f << j.dump() << "\n";
  }
  if (!f) throw Error("manifest: write failed for " + path);
}

std::vector<UtteranceRecord> merge_happy_excited(
    std::vector<UtteranceRecord> records) {
  for (auto& r : records)
    if (r.emotion && *r.emotion == "excited") r.emotion = "happy";
  return records;
}

const char* level_name(Level level) {
  switch (level) {
    case Level::low: return "low";
    case Level::medium: return "medium";
    case Level::high: return "high";
  }
  throw Error("unknown level");
}

LevelMappingRule level_rule(const std::string& corpus) {
  std::string tag = corpus;
  std::transform(tag.begin(), tag.end(), tag.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (tag == "iemocap") return {corpus, 2.0, 3.5};
  if (tag == "msp-improv") return {corpus, 2.5, 3.5};
  if (tag.rfind("synth", 0) == 0) return {corpus, 2.0, 3.5};
  throw ConfigError("no level mapping rule for corpus " + corpus);
}

Level map_levels(double value, const LevelMappingRule& rule) {
  if (value < 1.0 || value > 5.0)
    throw Error("map_levels: value " + std::to_string(value) +
                " outside [1,5]");
  if (value <= rule.cut1) return Level::low;
  if (value <= rule.cut2) return Level::medium;
  return Level::high;
}

}  // namespace mtae
