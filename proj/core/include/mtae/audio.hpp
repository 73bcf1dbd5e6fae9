#pragma once

#include <string>
#include <vector>

#include "mtae/common.hpp"

namespace mtae {

struct AudioClip {
  std::vector<double> samples;  // [-1, 1]
  int sample_rate = 16000;
};

// 16-bit PCM WAV. Multi-channel input is averaged down to mono on load.
AudioClip load_wav(const std::string& path);
void write_wav(const std::string& path, const AudioClip& clip);

AudioClip resample_linear(const AudioClip& clip, int target_rate);
AudioClip to_mono_16k(const AudioClip& clip);

// Drops 25 ms frames (the trailing partial frame included) whose RMS energy
// sits more than threshold_db below the loudest frame. A clip with no energy
// at all passes through untouched with the warning flag set.
struct SilenceResult {
  AudioClip clip;
  bool all_silent = false;
  i64 frames_dropped = 0;
};
SilenceResult remove_silence(const AudioClip& clip, double threshold_db = -40.0,
                             double frame_ms = 25.0);

}  // namespace mtae
