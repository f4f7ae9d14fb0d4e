// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "seqtrain/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "seqtrain/error.hpp"

namespace seqtrain {

namespace {

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char tag[4];
  in.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) throw IoError(path + ": not a RIFF file");
  read_le<std::uint32_t>(in);  // riff size
  in.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) throw IoError(path + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  Waveform w;
  bool got_fmt = false, got_data = false;
  while (in.read(tag, 4)) {
    const std::uint32_t chunk_size = read_le<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      sample_rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);  // byte rate
      read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      in.ignore(chunk_size - 16);
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw IoError(path + ": data chunk before fmt");
      if (channels != 1) throw IoError(path + ": only mono WAV supported");
      if (format == 1 && bits == 16) {
        const std::size_t n = chunk_size / 2;
        std::vector<std::int16_t> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), chunk_size);
        w.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) w.samples[i] = raw[i] / 32768.0;
      } else if (format == 3 && bits == 32) {
        const std::size_t n = chunk_size / 4;
        std::vector<float> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), chunk_size);
        w.samples.assign(raw.begin(), raw.end());
      } else {
        throw IoError(path + ": unsupported WAV sample format");
      }
      got_data = true;
    } else {
      in.ignore(chunk_size + (chunk_size & 1));
    }
  }
  if (!got_data) throw IoError(path + ": no data chunk");
  w.sample_rate = sample_rate;
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);  // PCM
  write_le<std::uint16_t>(out, 1);  // mono
  const std::uint32_t sr = static_cast<std::uint32_t>(w.sample_rate);
  write_le<std::uint32_t>(out, sr);
  write_le<std::uint32_t>(out, sr * 2);
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  for (double s : w.samples) {
    // Round at the same 32768 scale the reader divides by, so a write/read
    // round trip stays within half a quantization step.
    const long q = std::lround(std::max(-1.0, std::min(1.0, s)) * 32768.0);
    write_le<std::int16_t>(
        out, static_cast<std::int16_t>(std::min<long>(q, 32767)));
  }
}

}  // namespace seqtrain
