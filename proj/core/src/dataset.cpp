#include "mtae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "mtae/audio.hpp"
#include "mtae/parallel.hpp"

namespace mtae {

namespace {

bool is_cluster_source(const std::string& source) {
  return source == "cluster3" || source == "cluster5";
}

bool is_level_source(const std::string& source) {
  return source == "activation" || source == "valence";
}

}  // namespace

int LabelSpace::label_of(const UtteranceRecord& record) const {
  if (source == "categorical") {
    if (!record.emotion) return -1;
    auto it = std::find(classes.begin(), classes.end(), *record.emotion);
    return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
  }
  if (source == "activation" || source == "valence") {
    const auto& value = source == "activation" ? record.activation : record.valence;
    if (!value) return -1;
    return static_cast<int>(map_levels(*value, level_rule(record.corpus)));
  }
  if (is_cluster_source(source)) {
    if (!record.valence || !record.activation) return -1;
    return assign_cluster({*record.valence, *record.activation}, clusters);
  }
  throw ConfigError("unknown label source '" + source + "'");
}

LabelSpace LabelSpace::fit(const std::string& source,
                           const std::vector<UtteranceRecord>& records,
                           u64 seed) {
  LabelSpace space;
  space.source = source;
  if (source == "categorical") {
    std::set<std::string> seen;
    for (const auto& r : records)
      if (r.emotion) seen.insert(*r.emotion);
    if (seen.empty())
      throw ConfigError("no emotion-labeled records to build classes from");
    space.classes.assign(seen.begin(), seen.end());
    return space;
  }
  if (is_level_source(source)) {
    space.classes = {level_name(Level::low), level_name(Level::medium),
                     level_name(Level::high)};
    return space;
  }
  if (is_cluster_source(source)) {
    int k = source == "cluster3" ? 3 : 5;
    space.clusters = fit_va_clusters(records, k, seed);
    for (int c = 0; c < k; ++c)
      space.classes.push_back("cluster" + std::to_string(c));
    return space;
  }
  throw ConfigError("unknown label source '" + source + "'");
}

std::string LabelSpace::to_json() const {
  nlohmann::ordered_json j;
  j["source"] = source;
  j["classes"] = classes;
  if (is_cluster_source(source))
    j["clusters"] = nlohmann::ordered_json::parse(va_clusters_to_json(clusters));
  return j.dump();
}

LabelSpace LabelSpace::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  LabelSpace space;
  space.source = j.at("source").get<std::string>();
  space.classes = j.at("classes").get<std::vector<std::string>>();
  if (j.contains("clusters"))
    space.clusters = va_clusters_from_json(j.at("clusters").dump());
  return space;
}

int SpeakerVocab::index_of(const std::string& speaker_id) const {
  auto it = std::lower_bound(speakers.begin(), speakers.end(), speaker_id);
  if (it == speakers.end() || *it != speaker_id) return -1;
  return static_cast<int>(it - speakers.begin());
}

SpeakerVocab SpeakerVocab::fit(
    const std::vector<const std::vector<UtteranceRecord>*>& sets) {
  std::set<std::string> seen;
  for (const auto* records : sets)
    for (const auto& r : *records) seen.insert(r.speaker_id);
  SpeakerVocab vocab;
  vocab.speakers.assign(seen.begin(), seen.end());
  return vocab;
}

std::string SpeakerVocab::to_json() const {
  return nlohmann::json(speakers).dump();
}

SpeakerVocab SpeakerVocab::from_json(const std::string& text) {
  SpeakerVocab vocab;
  vocab.speakers =
      nlohmann::json::parse(text).get<std::vector<std::string>>();
  return vocab;
}

int gender_index(Gender g) { return g == Gender::male ? 0 : 1; }

Standardizer Standardizer::fit(const SegmentSet& train) {
  if (train.size() == 0) throw Error("standardizer: no segments to fit on");
  Standardizer s;
  s.mean.assign(static_cast<size_t>(train.rows), 0.0);
  s.stddev.assign(static_cast<size_t>(train.rows), 0.0);
  const i64 per_row = train.size() * train.cols;
  for (i64 i = 0; i < train.size(); ++i) {
    const float* seg = train.segment_ptr(i);
    for (i64 r = 0; r < train.rows; ++r) {
      const float* row = seg + r * train.cols;
      double acc = 0.0;
      for (i64 c = 0; c < train.cols; ++c) acc += row[c];
      s.mean[static_cast<size_t>(r)] += acc;
    }
  }
  for (auto& m : s.mean) m /= static_cast<double>(per_row);
  for (i64 i = 0; i < train.size(); ++i) {
    const float* seg = train.segment_ptr(i);
    for (i64 r = 0; r < train.rows; ++r) {
      const float* row = seg + r * train.cols;
      const double m = s.mean[static_cast<size_t>(r)];
      double acc = 0.0;
      for (i64 c = 0; c < train.cols; ++c) {
        double d = row[c] - m;
        acc += d * d;
      }
      s.stddev[static_cast<size_t>(r)] += acc;
    }
  }
  for (auto& v : s.stddev)
    v = std::max(std::sqrt(v / static_cast<double>(per_row)), 1e-6);
  return s;
}

void Standardizer::apply(SegmentSet& set) const {
  if (static_cast<i64>(mean.size()) != set.rows)
    throw Error("standardizer row count does not match the data");
  std::vector<float> m(mean.size()), inv(mean.size());
  for (size_t r = 0; r < mean.size(); ++r) {
    m[r] = static_cast<float>(mean[r]);
    inv[r] = static_cast<float>(1.0 / stddev[r]);
  }
  parallel_for(set.size(), [&](i64 i) {
    float* seg = set.segment_ptr(i);
    for (i64 r = 0; r < set.rows; ++r) {
      float* row = seg + r * set.cols;
      for (i64 c = 0; c < set.cols; ++c)
        row[c] = (row[c] - m[static_cast<size_t>(r)]) * inv[static_cast<size_t>(r)];
    }
  });
}

std::string Standardizer::to_json() const {
  nlohmann::ordered_json j;
  j["mean"] = mean;
  j["stddev"] = stddev;
  return j.dump();
}

Standardizer Standardizer::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  return s;
}

std::string cache_path_for(const std::string& cache_dir,
                           const std::string& utterance_id) {
  return (std::filesystem::path(cache_dir) / (utterance_id + ".spec")).string();
}

SegmentSet load_segments(const std::string& root_dir,
                         const std::string& cache_dir,
                         const std::vector<UtteranceRecord>& records,
                         const LabelSpace& labels,
                         const SpeakerVocab& speakers) {
  struct PerRecord {
    Spectrogram spec;
    std::vector<i64> starts;
  };
  std::vector<PerRecord> loaded(records.size());
  parallel_for(static_cast<i64>(records.size()), [&](i64 i) {
    const auto& r = records[static_cast<size_t>(i)];
    std::string cache_path = cache_path_for(cache_dir, r.utterance_id);
    if (!cache_dir.empty() && std::filesystem::exists(cache_path)) {
      loaded[static_cast<size_t>(i)].spec = read_spectrogram_cache(cache_path);
      loaded[static_cast<size_t>(i)].starts =
          read_segment_index(cache_path).starts;
      return;
    }
    std::filesystem::path audio(r.audio_path);
    if (audio.is_relative()) audio = std::filesystem::path(root_dir) / audio;
    FrontendResult fr = compute_frontend(load_wav(audio.string()));
    loaded[static_cast<size_t>(i)].spec = std::move(fr.spec);
    loaded[static_cast<size_t>(i)].starts = std::move(fr.starts);
  });

  SegmentSet set;
  i64 total = 0;
  for (const auto& pr : loaded) total += static_cast<i64>(pr.starts.size());
  set.values.resize(static_cast<size_t>(total * set.segment_numel()));
  set.segments.reserve(static_cast<size_t>(total));
  set.utterances.reserve(records.size());

  i64 seg_index = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    UtteranceInfo utt;
    utt.id = r.utterance_id;
    utt.speaker_id = r.speaker_id;
    utt.emotion = labels.label_of(r);
    utt.first_segment = seg_index;
    utt.n_segments = static_cast<i64>(loaded[i].starts.size());
    SegmentInfo info;
    info.utterance = static_cast<i64>(set.utterances.size());
    info.emotion = utt.emotion;
    info.gender = gender_index(r.gender);
    info.speaker = speakers.index_of(r.speaker_id);
    for (i64 start : loaded[i].starts) {
      Spectrogram seg = cut_segment(loaded[i].spec, start);
      float* out = set.segment_ptr(seg_index);
      for (i64 v = 0; v < set.segment_numel(); ++v)
        out[v] = static_cast<float>(seg.values[static_cast<size_t>(v)]);
      set.segments.push_back(info);
      ++seg_index;
    }
    set.utterances.push_back(std::move(utt));
  }
  return set;
}

}  // namespace mtae
