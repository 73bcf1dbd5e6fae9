#pragma once

#include <string>
#include <vector>

#include "mtae/audio.hpp"
#include "mtae/manifest.hpp"
#include "mtae/rng.hpp"

namespace mtae {

// Deterministic toy speech corpus. Each speaker is a harmonic source with a
// fixed base pitch (gender follows the pitch band) and one formant-like
// resonance; each emotion class bends that source with its own pitch scale,
// spectral tilt, amplitude modulation and pitch contour. Additive white noise
// at snr_db controls how separable the classes are.
struct SynthSpec {
  int n_speakers = 10;
  int utterances_per_speaker = 20;
  int classes = 4;
  u64 seed = 7;
  double snr_db = 30.0;
  int sample_rate = 16000;
  double duration_min = 1.2;
  double duration_max = 2.0;
  // Fraction of utterances carrying emotion labels; the rest keep only
  // gender/speaker labels, which is what the auxiliary stream trains on.
  double emotion_labeled_fraction = 1.0;
  std::string corpus_tag = "synth";
  std::string speaker_prefix = "s";

  void validate() const;
};

struct EmotionRecipe {
  const char* name;
  double pitch_scale;
  double tilt;        // harmonic rolloff exponent, amp_k = k^-tilt
  double am_rate_hz;  // amplitude modulation
  double am_depth;
  double contour;     // pitch drift over the utterance, in octaves
  double activation;  // dimensional label centres, jittered per utterance
  double valence;
};

// The four recipes in class order: angry, happy, neutral, sad.
const std::vector<EmotionRecipe>& emotion_recipes();

struct SpeakerProfile {
  std::string id;
  Gender gender = Gender::male;
  double f0_hz = 0.0;
  double resonance_hz = 0.0;
  double resonance_width_hz = 0.0;
};

SpeakerProfile make_speaker_profile(const SynthSpec& spec, int speaker_index);

// One utterance, noise included, peak normalized. rng must be the utterance's
// own derived stream for the corpus to be reproducible under parallel
// generation.
AudioClip synth_utterance(const SynthSpec& spec, const SpeakerProfile& speaker,
                          const EmotionRecipe& emotion, Rng& rng);

// Writes out_dir/wav/*.wav and out_dir/manifest.jsonl, returns the records.
std::vector<UtteranceRecord> generate_corpus(const SynthSpec& spec,
                                             const std::string& out_dir);

}  // namespace mtae
