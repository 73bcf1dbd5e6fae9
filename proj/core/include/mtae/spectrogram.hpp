#pragma once

#include <string>
#include <vector>

#include "mtae/audio.hpp"
#include "mtae/common.hpp"

namespace mtae {

// Frontend geometry, all at 16 kHz: 25 ms Hamming windows with a 10 ms hop,
// 512-point transform, 128 log-magnitude bins spanning 0-8 kHz, and
// 256-frame segments with 50% overlap.
inline constexpr int kStftWindow = 400;
inline constexpr int kStftHop = 160;
inline constexpr int kStftSize = 512;
inline constexpr int kSpecRows = 128;
inline constexpr int kSegmentFrames = 256;
inline constexpr int kSegmentHop = 128;

struct Spectrogram {
  i64 rows = 0, cols = 0;
  std::vector<double> values;  // row-major rows x cols

  double& at(i64 r, i64 c) { return values[static_cast<size_t>(r * cols + c)]; }
  double at(i64 r, i64 c) const {
    return values[static_cast<size_t>(r * cols + c)];
  }
};

// log(1 + magnitude) spectrogram of a 16 kHz clip; clips shorter than one
// window are rejected. Columns are frames, rows are frequency bands from low
// to high.
Spectrogram stft_spectrogram(const AudioClip& clip);

// Start frames of the 256-frame segments: hop-128 strides plus a right-
// aligned tail segment when the last stride does not land exactly at the end.
// Spectrograms shorter than one segment yield the single start 0.
std::vector<i64> segment_starts(i64 total_frames);

// Cut one 128 x 256 segment; when the source has fewer frames than a segment
// the missing columns are filled by reflection (no edge repeat).
Spectrogram cut_segment(const Spectrogram& spec, i64 start);

// Full frontend: resample to mono 16 kHz, strip silence, take the STFT.
struct FrontendResult {
  Spectrogram spec;
  std::vector<i64> starts;
  bool silence_warning = false;
};
FrontendResult compute_frontend(const AudioClip& clip,
                                double silence_threshold_db = -40.0);

// Cache format, little-endian:
//   "SPEC" | u32 version | u32 rows | u32 cols | f32 row-major values
// plus a JSON sidecar at <path>.json carrying the segment-start index.
void write_spectrogram_cache(const std::string& path, const Spectrogram& spec);
Spectrogram read_spectrogram_cache(const std::string& path);

void write_segment_index(const std::string& cache_path,
                         const FrontendResult& fr, u64 source_hash = 0);
struct SegmentIndex {
  std::vector<i64> starts;
  bool silence_warning = false;
  i64 n_frames = 0;
  u64 source_hash = 0;  // lets a rerun skip files whose input didn't change
};
SegmentIndex read_segment_index(const std::string& cache_path);

}  // namespace mtae
