#include "mtae/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace mtae {

namespace {

u32 read_u32(std::istream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<u32>(b[0]) | (static_cast<u32>(b[1]) << 8) |
         (static_cast<u32>(b[2]) << 16) | (static_cast<u32>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& f) {
  unsigned char b[2];
  f.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void put_u32(std::ostream& f, u32 v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
               static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  f.write(b, 4);
}

void put_u16(std::ostream& f, std::uint16_t v) {
  char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  f.write(b, 2);
}

}  // namespace

AudioClip load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("wav: cannot open " + path);
  char tag[4];
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "RIFF", 4) != 0)
    throw Error("wav: " + path + " is not a RIFF file");
  read_u32(f);  // riff size
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "WAVE", 4) != 0)
    throw Error("wav: " + path + " is not a WAVE file");

  int channels = 0, sample_rate = 0, bits = 0;
  std::vector<std::int16_t> raw;
  bool got_fmt = false, got_data = false;
  while (f.read(tag, 4)) {
    u32 chunk_size = read_u32(f);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::uint16_t format = read_u16(f);
      channels = read_u16(f);
      sample_rate = static_cast<int>(read_u32(f));
      read_u32(f);  // byte rate
      read_u16(f);  // block align
      bits = read_u16(f);
      if (chunk_size > 16) f.seekg(chunk_size - 16, std::ios::cur);
      if (format != 1)
        throw Error("wav: " + path + ": only PCM encoding is supported");
      if (bits != 16)
        throw Error("wav: " + path + ": only 16-bit samples are supported");
      if (channels < 1) throw Error("wav: " + path + ": no channels");
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw Error("wav: " + path + ": data before fmt chunk");
      raw.resize(chunk_size / 2);
      f.read(reinterpret_cast<char*>(raw.data()), chunk_size & ~1u);
      if (!f) throw Error("wav: " + path + ": truncated data chunk");
      got_data = true;
      break;
    } else {
      f.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  if (!got_data) throw Error("wav: " + path + ": missing data chunk");

  AudioClip clip;
  clip.sample_rate = sample_rate;
  size_t n = raw.size() / static_cast<size_t>(channels);
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double acc = 0;
    for (int c = 0; c < channels; ++c)
      acc += raw[i * static_cast<size_t>(channels) + static_cast<size_t>(c)];
    clip.samples[i] = acc / (32768.0 * channels);
  }
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("wav: cannot open " + path + " for writing");
  u32 data_bytes = static_cast<u32>(clip.samples.size() * 2);
  f.write("RIFF", 4);
  put_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(f, 16);
  put_u16(f, 1);  // PCM
  put_u16(f, 1);  // mono
  put_u32(f, static_cast<u32>(clip.sample_rate));
  put_u32(f, static_cast<u32>(clip.sample_rate * 2));
  put_u16(f, 2);
  put_u16(f, 16);
  f.write("data", 4);
  put_u32(f, data_bytes);
  for (double s : clip.samples) {
    double v = std::clamp(s, -1.0, 1.0);
    auto q = static_cast<std::int16_t>(std::lround(v * 32767.0));
    put_u16(f, static_cast<std::uint16_t>(q));
  }
  if (!f) throw Error("wav: write failed for " + path);
}

AudioClip resample_linear(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw Error("resample: bad target rate");
  if (clip.sample_rate == target_rate || clip.samples.empty()) {
    AudioClip out = clip;
    out.sample_rate = target_rate;
    return out;
  }
  AudioClip out;
  out.sample_rate = target_rate;
  double ratio = static_cast<double>(clip.sample_rate) / target_rate;
  auto n_out = static_cast<size_t>(std::llround(
      static_cast<double>(clip.samples.size()) / ratio));
  out.samples.resize(std::max<size_t>(n_out, 1));
  for (size_t i = 0; i < out.samples.size(); ++i) {
    double pos = static_cast<double>(i) * ratio;
    auto t = static_cast<size_t>(pos);
    if (t >= clip.samples.size() - 1) {
      out.samples[i] = clip.samples.back();
      continue;
    }
    double frac = pos - static_cast<double>(t);
    out.samples[i] =
        clip.samples[t] * (1.0 - frac) + clip.samples[t + 1] * frac;
  }
  return out;
}

AudioClip to_mono_16k(const AudioClip& clip) {
  return resample_linear(clip, 16000);
}

SilenceResult remove_silence(const AudioClip& clip, double threshold_db,
                             double frame_ms) {
  SilenceResult out;
  out.clip.sample_rate = clip.sample_rate;
  if (clip.samples.empty()) {
    out.all_silent = true;
    out.clip = clip;
    return out;
  }
  auto frame_len = static_cast<size_t>(
      std::lround(clip.sample_rate * frame_ms / 1000.0));
  if (frame_len == 0) frame_len = 1;

  size_t n_frames = (clip.samples.size() + frame_len - 1) / frame_len;
  std::vector<double> rms(n_frames);
  double max_rms = 0;
  for (size_t fi = 0; fi < n_frames; ++fi) {
    size_t begin = fi * frame_len;
    size_t end = std::min(begin + frame_len, clip.samples.size());
    double acc = 0;
    for (size_t i = begin; i < end; ++i) acc += clip.samples[i] * clip.samples[i];
    rms[fi] = std::sqrt(acc / static_cast<double>(end - begin));
    max_rms = std::max(max_rms, rms[fi]);
  }
  if (max_rms <= 0) {
    out.clip = clip;
    out.all_silent = true;
    return out;
  }
  for (size_t fi = 0; fi < n_frames; ++fi) {
    double db = 20.0 * std::log10(std::max(rms[fi], 1e-300) / max_rms);
    if (db >= threshold_db) {
      size_t begin = fi * frame_len;
      size_t end = std::min(begin + frame_len, clip.samples.size());
      out.clip.samples.insert(out.clip.samples.end(),
                              clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                              clip.samples.begin() + static_cast<std::ptrdiff_t>(end));
    } else {
      ++out.frames_dropped;
    }
  }
  return out;
}

}  // namespace mtae
