#include "mtae/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mtae/parallel.hpp"

namespace mtae {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHarmonicCeilingHz = 7600.0;
constexpr double kRampSeconds = 0.010;
constexpr double kPeakTarget = 0.89;
constexpr double kVaJitter = 0.4;

std::string pad4(int v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", v);
  return buf;
}

double clamp_va(double v) { return std::clamp(v, 1.0, 5.0); }

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

void SynthSpec::validate() const {
  if (n_speakers < 2) throw ConfigError("synth: need at least 2 speakers");
  if (utterances_per_speaker < 1)
    throw ConfigError("synth: need at least 1 utterance per speaker");
  if (classes < 2 || classes > static_cast<int>(emotion_recipes().size()))
    throw ConfigError("synth: classes must be in [2," +
                      std::to_string(emotion_recipes().size()) + "]");
  if (sample_rate != 16000)
    throw ConfigError("synth: only 16 kHz output is supported");
  if (duration_min < 0.5)
    throw ConfigError("synth: duration must be at least 0.5 s");
  if (duration_max < duration_min)
    throw ConfigError("synth: duration range is inverted");
  if (!(snr_db > -100.0 && snr_db < 200.0))
    throw ConfigError("synth: snr_db out of range");
  if (emotion_labeled_fraction < 0.0 || emotion_labeled_fraction > 1.0)
    throw ConfigError("synth: emotion_labeled_fraction must be in [0,1]");
  if (corpus_tag.empty() || speaker_prefix.empty())
    throw ConfigError("synth: corpus_tag and speaker_prefix must be set");
}

const std::vector<EmotionRecipe>& emotion_recipes() {
  // High-arousal classes get a raised pitch, a flat (bright) spectrum and
  // fast strong modulation; low-arousal classes the opposite. Contour gives
  // happy/sad their rising/falling shape.
  static const std::vector<EmotionRecipe> recipes = {
      {"angry", 1.25, 0.6, 30.0, 0.50, 0.0, 4.5, 1.5},
      {"happy", 1.15, 0.9, 8.0, 0.35, 0.3, 4.0, 4.5},
      {"neutral", 1.00, 1.3, 3.0, 0.10, 0.0, 3.0, 3.0},
      {"sad", 0.85, 1.8, 2.0, 0.20, -0.3, 1.5, 2.0},
  };
  return recipes;
}

SpeakerProfile make_speaker_profile(const SynthSpec& spec, int speaker_index) {
  SpeakerProfile p;
  p.id = spec.speaker_prefix + pad4(speaker_index);
  p.gender = speaker_index % 2 == 0 ? Gender::male : Gender::female;
  Rng rng(derive_seed(spec.seed, "speaker/" + p.id));
  p.f0_hz = p.gender == Gender::male ? rng.uniform(100.0, 170.0)
                                     : rng.uniform(190.0, 270.0);
  p.resonance_hz = rng.uniform(600.0, 2400.0);
  p.resonance_width_hz = rng.uniform(80.0, 160.0);
  return p;
}

AudioClip synth_utterance(const SynthSpec& spec, const SpeakerProfile& speaker,
                          const EmotionRecipe& emotion, Rng& rng) {
  const double sr = spec.sample_rate;
  const double duration =
      rng.uniform(spec.duration_min, spec.duration_max);
  const i64 lead = static_cast<i64>(std::llround(rng.uniform(0.05, 0.15) * sr));
  const i64 trail = static_cast<i64>(std::llround(rng.uniform(0.05, 0.15) * sr));
  const i64 n_voiced = static_cast<i64>(std::llround(duration * sr));

  const double f0 = speaker.f0_hz * emotion.pitch_scale;
  const double f0_peak = f0 * std::exp2(std::abs(emotion.contour) / 2.0);
  const i64 k_max = std::max<i64>(1, static_cast<i64>(kHarmonicCeilingHz / f0_peak));

  std::vector<double> amp(static_cast<size_t>(k_max) + 1, 0.0);
  for (i64 k = 1; k <= k_max; ++k) {
    double freq = static_cast<double>(k) * f0;
    double d = (freq - speaker.resonance_hz) / speaker.resonance_width_hz;
    double resonance = 1.0 + 1.5 * std::exp(-0.5 * d * d);
    amp[static_cast<size_t>(k)] =
        std::pow(static_cast<double>(k), -emotion.tilt) * resonance;
  }

  const i64 ramp_n = std::max<i64>(1, static_cast<i64>(std::llround(kRampSeconds * sr)));
  std::vector<double> voiced(static_cast<size_t>(n_voiced));
  double phase = 0.0;
  double signal_power = 0.0;
  for (i64 t = 0; t < n_voiced; ++t) {
    double x = n_voiced > 1 ? static_cast<double>(t) / static_cast<double>(n_voiced - 1)
                            : 0.0;
    double f0_t = f0 * std::exp2(emotion.contour * (x - 0.5));
    phase = std::fmod(phase + 2.0 * kPi * f0_t / sr, 2.0 * kPi);
    double s = 0.0;
    for (i64 k = 1; k <= k_max; ++k)
      s += amp[static_cast<size_t>(k)] * std::sin(static_cast<double>(k) * phase);
    double am = 1.0 - emotion.am_depth * 0.5 *
                          (1.0 - std::sin(2.0 * kPi * emotion.am_rate_hz *
                                          static_cast<double>(t) / sr));
    double edge = static_cast<double>(std::min(t, n_voiced - 1 - t));
    double env = edge >= static_cast<double>(ramp_n)
                     ? 1.0
                     : 0.5 * (1.0 - std::cos(kPi * edge / static_cast<double>(ramp_n)));
    double v = s * am * env;
    voiced[static_cast<size_t>(t)] = v;
    signal_power += v * v;
  }
  signal_power /= static_cast<double>(n_voiced);

  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.assign(static_cast<size_t>(lead + n_voiced + trail), 0.0);
  std::copy(voiced.begin(), voiced.end(), clip.samples.begin() + lead);

  const double noise_std =
      std::sqrt(signal_power) * std::pow(10.0, -spec.snr_db / 20.0);
  for (auto& s : clip.samples) s += noise_std * rng.normal();

  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0)
    for (auto& s : clip.samples) s *= kPeakTarget / peak;
  return clip;
}

std::vector<UtteranceRecord> generate_corpus(const SynthSpec& spec,
                                             const std::string& out_dir) {
  spec.validate();
  std::filesystem::create_directories(std::filesystem::path(out_dir) / "wav");

  std::vector<SpeakerProfile> profiles;
  profiles.reserve(static_cast<size_t>(spec.n_speakers));
  for (int i = 0; i < spec.n_speakers; ++i)
    profiles.push_back(make_speaker_profile(spec, i));

  const auto& recipes = emotion_recipes();
  const i64 total =
      static_cast<i64>(spec.n_speakers) * spec.utterances_per_speaker;
  std::vector<UtteranceRecord> records(static_cast<size_t>(total));

  parallel_for(total, [&](i64 i) {
    const int speaker_index = static_cast<int>(i / spec.utterances_per_speaker);
    const int utt_index = static_cast<int>(i % spec.utterances_per_speaker);
    const SpeakerProfile& speaker = profiles[static_cast<size_t>(speaker_index)];
    const EmotionRecipe& emotion =
        recipes[static_cast<size_t>(utt_index % spec.classes)];
    const std::string utt_id = speaker.id + "_u" + pad4(utt_index);

    Rng rng(derive_seed(spec.seed, spec.corpus_tag + "/" + utt_id));
    AudioClip clip = synth_utterance(spec, speaker, emotion, rng);
    double activation =
        round2(clamp_va(emotion.activation + rng.uniform(-kVaJitter, kVaJitter)));
    double valence =
        round2(clamp_va(emotion.valence + rng.uniform(-kVaJitter, kVaJitter)));
    bool labeled = rng.uniform(0.0, 1.0) < spec.emotion_labeled_fraction;

    const std::string wav_rel = "wav/" + utt_id + ".wav";
    write_wav((std::filesystem::path(out_dir) / wav_rel).string(), clip);

    UtteranceRecord& r = records[static_cast<size_t>(i)];
    r.utterance_id = utt_id;
    r.audio_path = wav_rel;
    r.corpus = spec.corpus_tag;
    r.speaker_id = speaker.id;
    r.gender = speaker.gender;
    if (labeled) {
      r.emotion = recipes[static_cast<size_t>(utt_index % spec.classes)].name;
      r.activation = activation;
      r.valence = valence;
    }
  });

  save_manifest((std::filesystem::path(out_dir) / "manifest.jsonl").string(),
                records);
  return records;
}

}  // namespace mtae
