#include "mtae/spectrogram.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>

#include <nlohmann/json.hpp>

namespace mtae {

namespace {

std::mutex fftw_plan_mutex;

// FFTW plan creation is not thread-safe; execution on per-thread buffers is.
struct FftWorkspace {
  double* in;
  fftw_complex* out;
  fftw_plan plan;

  FftWorkspace() {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    in = fftw_alloc_real(kStftSize);
    out = fftw_alloc_complex(kStftSize / 2 + 1);
    plan = fftw_plan_dft_r2c_1d(kStftSize, in, out, FFTW_ESTIMATE);
  }
  ~FftWorkspace() {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

const std::vector<double>& hamming_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kStftWindow);
    for (int n = 0; n < kStftWindow; ++n)
      v[static_cast<size_t>(n)] =
          0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (kStftWindow - 1));
    return v;
  }();
  return w;
}

}  // namespace

Spectrogram stft_spectrogram(const AudioClip& clip) {
  if (clip.sample_rate != 16000)
    throw Error("stft: expected a 16 kHz clip, got " +
                std::to_string(clip.sample_rate) + " Hz");
  const std::vector<double>& samples = clip.samples;
  if (samples.size() < static_cast<size_t>(kStftWindow))
    throw Error("stft: clip too short (" + std::to_string(samples.size()) +
                " samples, window " + std::to_string(kStftWindow) + ")");

  i64 frames = 1 + static_cast<i64>((samples.size() - kStftWindow) / kStftHop);
  Spectrogram spec;
  spec.rows = kSpecRows;
  spec.cols = frames;
  spec.values.assign(static_cast<size_t>(spec.rows * spec.cols), 0.0);

  thread_local FftWorkspace ws;
  const auto& window = hamming_window();
  for (i64 t = 0; t < frames; ++t) {
    const double* src = samples.data() + t * kStftHop;
    for (int n = 0; n < kStftWindow; ++n)
      ws.in[n] = src[n] * window[static_cast<size_t>(n)];
    std::memset(ws.in + kStftWindow, 0,
                sizeof(double) * (kStftSize - kStftWindow));
    fftw_execute(ws.plan);
    // Adjacent magnitude bins pair-averaged: 256 bins below Nyquist -> 128
    // rows.
    for (int r = 0; r < kSpecRows; ++r) {
      double m = 0;
      for (int k = 2 * r; k <= 2 * r + 1; ++k) {
        double re = ws.out[k][0], im = ws.out[k][1];
        m += std::sqrt(re * re + im * im);
      }
      spec.at(r, t) = std::log1p(0.5 * m);
    }
  }
  return spec;
}

std::vector<i64> segment_starts(i64 total_frames) {
  if (total_frames <= 0) throw Error("segment_starts: empty spectrogram");
  std::vector<i64> starts;
  if (total_frames <= kSegmentFrames) {
    starts.push_back(0);
    return starts;
  }
  i64 s = 0;
  for (; s + kSegmentFrames <= total_frames; s += kSegmentHop)
    starts.push_back(s);
  if (starts.back() + kSegmentFrames < total_frames)
    starts.push_back(total_frames - kSegmentFrames);
  return starts;
}

Spectrogram cut_segment(const Spectrogram& spec, i64 start) {
  if (spec.rows != kSpecRows)
    throw Error("cut_segment: expected " + std::to_string(kSpecRows) +
                " rows");
  Spectrogram seg;
  seg.rows = kSpecRows;
  seg.cols = kSegmentFrames;
  seg.values.assign(static_cast<size_t>(seg.rows * seg.cols), 0.0);
  i64 t = spec.cols;
  for (i64 j = 0; j < kSegmentFrames; ++j) {
    i64 col = start + j;
    if (col >= t) {
      if (t == 1) {
        col = 0;
      } else {
        i64 period = 2 * (t - 1);
        i64 m = col % period;
        col = m < t ? m : period - m;
      }
    }
    if (col < 0) throw Error("cut_segment: negative start");
    for (i64 r = 0; r < kSpecRows; ++r) seg.at(r, j) = spec.at(r, col);
  }
  return seg;
}

FrontendResult compute_frontend(const AudioClip& clip,
                                double silence_threshold_db) {
  FrontendResult fr;
  AudioClip mono = to_mono_16k(clip);
  SilenceResult sil = remove_silence(mono, silence_threshold_db);
  fr.silence_warning = sil.all_silent;
  fr.spec = stft_spectrogram(sil.clip);
  fr.starts = segment_starts(fr.spec.cols);
  return fr;
}

// ---------------------------------------------------------------------------
// Cache I/O

namespace {
constexpr char kSpecMagic[4] = {'S', 'P', 'E', 'C'};
constexpr u32 kSpecVersion = 1;
}  // namespace

void write_spectrogram_cache(const std::string& path, const Spectrogram& spec) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("spec cache: cannot open " + path + " for writing");
  f.write(kSpecMagic, 4);
  auto put = [&f](u32 v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                 static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
    f.write(b, 4);
  };
  put(kSpecVersion);
  put(static_cast<u32>(spec.rows));
  put(static_cast<u32>(spec.cols));
  std::vector<float> row(static_cast<size_t>(spec.cols));
  for (i64 r = 0; r < spec.rows; ++r) {
    for (i64 c = 0; c < spec.cols; ++c)
      row[static_cast<size_t>(c)] = static_cast<float>(spec.at(r, c));
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * 4));
  }
  if (!f) throw Error("spec cache: write failed for " + path);
}

Spectrogram read_spectrogram_cache(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("spec cache: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kSpecMagic, 4) != 0)
    throw Error("spec cache: " + path + " is not a spectrogram cache");
  auto get = [&f, &path]() {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw Error("spec cache: truncated header in " + path);
    return static_cast<u32>(b[0]) | (static_cast<u32>(b[1]) << 8) |
           (static_cast<u32>(b[2]) << 16) | (static_cast<u32>(b[3]) << 24);
  };
  u32 version = get();
  if (version != kSpecVersion)
    throw Error("spec cache: unsupported version in " + path);
  Spectrogram spec;
  spec.rows = get();
  spec.cols = get();
  if (spec.rows <= 0 || spec.cols <= 0)
    throw Error("spec cache: bad dimensions in " + path);
  std::vector<float> raw(static_cast<size_t>(spec.rows * spec.cols));
  f.read(reinterpret_cast<char*>(raw.data()),
         static_cast<std::streamsize>(raw.size() * 4));
  if (!f) throw Error("spec cache: truncated payload in " + path);
  spec.values.assign(raw.begin(), raw.end());
  return spec;
}

void write_segment_index(const std::string& cache_path,
                         const FrontendResult& fr, u64 source_hash) {
  nlohmann::ordered_json j;
  j["version"] = kSpecVersion;
  j["n_frames"] = fr.spec.cols;
  j["starts"] = fr.starts;
  j["silence_warning"] = fr.silence_warning;
  j["source_hash"] = source_hash;
  std::ofstream f(cache_path + ".json", std::ios::trunc);
  if (!f) throw Error("spec cache: cannot write sidecar for " + cache_path);
  f << j.dump() << "\n";
}

SegmentIndex read_segment_index(const std::string& cache_path) {
  std::ifstream f(cache_path + ".json");
  if (!f) throw Error("spec cache: missing sidecar for " + cache_path);
  nlohmann::json j = nlohmann::json::parse(f);
  SegmentIndex idx;
  idx.n_frames = j.at("n_frames").get<i64>();
  idx.starts = j.at("starts").get<std::vector<i64>>();
  idx.silence_warning = j.value("silence_warning", false);
  idx.source_hash = j.value("source_hash", u64{0});
  return idx;
}

}  // namespace mtae
