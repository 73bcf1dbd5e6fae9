#pragma once

#include <string>
#include <vector>

#include "mtae/clustering.hpp"
#include "mtae/manifest.hpp"
#include "mtae/spectrogram.hpp"

namespace mtae {

// What the emotion head predicts. "categorical" uses the manifest emotion
// strings; "activation"/"valence" use the three-level corpus mapping rules;
// "cluster3"/"cluster5" use K-means clusters in valence-activation space.
struct LabelSpace {
  std::string source = "categorical";
  std::vector<std::string> classes;
  VAClusterModel clusters;  // cluster sources only

  int n_classes() const { return static_cast<int>(classes.size()); }

  // Class index for a record, -1 when it cannot be labeled under this source
  // (missing annotation or unseen category). Unlabeled records still feed the
  // gender/speaker tasks.
  int label_of(const UtteranceRecord& record) const;

  // Builds the class inventory (and cluster model, if any) from the training
  // records. seed only matters for cluster sources.
  static LabelSpace fit(const std::string& source,
                        const std::vector<UtteranceRecord>& records, u64 seed);

  std::string to_json() const;
  static LabelSpace from_json(const std::string& text);
};

struct SpeakerVocab {
  std::vector<std::string> speakers;  // sorted unique

  int size() const { return static_cast<int>(speakers.size()); }
  int index_of(const std::string& speaker_id) const;  // -1 unknown

  static SpeakerVocab fit(const std::vector<const std::vector<UtteranceRecord>*>& sets);

  std::string to_json() const;
  static SpeakerVocab from_json(const std::string& text);
};

inline constexpr int kGenderClasses = 2;
int gender_index(Gender g);  // male 0, female 1

struct SegmentInfo {
  i64 utterance = 0;  // index into SegmentSet::utterances
  int emotion = -1;   // -1 = unlabeled
  int gender = -1;
  int speaker = -1;   // -1 = speaker outside the vocabulary
};

struct UtteranceInfo {
  std::string id;
  std::string speaker_id;
  int emotion = -1;
  i64 first_segment = 0;
  i64 n_segments = 0;
};

// All segments of a record list, flattened in record order (an utterance's
// segments are contiguous). Values are the frontend's f32 cache precision
// regardless of whether they were read from cache or recomputed, so both
// paths produce identical tensors.
struct SegmentSet {
  i64 rows = kSpecRows;
  i64 cols = kSegmentFrames;
  std::vector<float> values;  // n_segments x rows x cols
  std::vector<SegmentInfo> segments;
  std::vector<UtteranceInfo> utterances;

  i64 size() const { return static_cast<i64>(segments.size()); }
  i64 segment_numel() const { return rows * cols; }
  const float* segment_ptr(i64 i) const {
    return values.data() + i * segment_numel();
  }
  float* segment_ptr(i64 i) { return values.data() + i * segment_numel(); }
};

// Per-feature (spectrogram row) standardization fitted on training data.
struct Standardizer {
  std::vector<double> mean;  // kSpecRows entries
  std::vector<double> stddev;

  static Standardizer fit(const SegmentSet& train);
  void apply(SegmentSet& set) const;

  std::string to_json() const;
  static Standardizer from_json(const std::string& text);
};

// Reads each record's cached spectrogram from cache_dir when present and
// computes the frontend from the WAV otherwise (without writing the cache).
// Relative audio paths resolve against root_dir.
SegmentSet load_segments(const std::string& root_dir,
                         const std::string& cache_dir,
                         const std::vector<UtteranceRecord>& records,
                         const LabelSpace& labels,
                         const SpeakerVocab& speakers);

// Cache file naming shared with the preprocess command.
std::string cache_path_for(const std::string& cache_dir,
                           const std::string& utterance_id);

}  // namespace mtae
