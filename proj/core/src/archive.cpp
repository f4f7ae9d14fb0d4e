// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "seqtrain/archive.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "seqtrain/error.hpp"

namespace seqtrain {

namespace {

constexpr std::uint32_t kFarcVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_str(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace

void write_farc(const std::string& path,
                const std::vector<FeatureMatrix>& feats) {
  if (feats.empty()) throw IoError("refusing to write empty archive " + path);
  const int d = feats.front().dim();
  const double period = feats.front().frame_period_ms;

  // Write to a temp file then rename so readers never see a partial archive.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write("FARC", 4);
    put_u32(out, kFarcVersion);
    put_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(&period), 8);
    for (const auto& fm : feats) {
      if (fm.dim() != d)
        throw ShapeError("archive " + path + ": inconsistent feature dim");
      put_str(out, fm.utterance_id);
      put_str(out, fm.speaker_id);
      put_u32(out, static_cast<std::uint32_t>(fm.num_frames()));
      for (int t = 0; t < fm.num_frames(); ++t)
        for (int j = 0; j < d; ++j) {
          const float v = static_cast<float>(fm.data(t, j));
          out.write(reinterpret_cast<const char*>(&v), 4);
        }
    }
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<FeatureMatrix> read_farc(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, "FARC", 4) != 0)
    throw IoError(path + ": bad archive magic");
  const std::uint32_t version = get_u32(in);
  if (version != kFarcVersion)
    throw IoError(path + ": unsupported archive version");
  const int d = static_cast<int>(get_u32(in));
  double period = 0;
  in.read(reinterpret_cast<char*>(&period), 8);

  std::vector<FeatureMatrix> feats;
  while (in.peek() != EOF) {
    FeatureMatrix fm;
    fm.utterance_id = get_str(in);
    fm.speaker_id = get_str(in);
    const int t_len = static_cast<int>(get_u32(in));
    fm.data.resize(t_len, d);
    for (int t = 0; t < t_len; ++t)
      for (int j = 0; j < d; ++j) {
        float v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        fm.data(t, j) = v;
      }
    if (!in) throw IoError(path + ": truncated archive");
    fm.frame_period_ms = period;
    feats.push_back(std::move(fm));
  }
  return feats;
}

void write_labels(const std::string& path,
                  const std::vector<LabeledUtterance>& labels) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    for (const auto& lab : labels) {
      out << lab.utterance_id;
      for (int tok : lab.tokens) out << ' ' << tok;
      out << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

std::vector<LabeledUtterance> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<LabeledUtterance> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    LabeledUtterance lab;
    ss >> lab.utterance_id;
    int tok;
    while (ss >> tok) lab.tokens.push_back(tok);
    labels.push_back(std::move(lab));
  }
  return labels;
}

}  // namespace seqtrain
