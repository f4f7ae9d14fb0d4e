// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_ARCHIVE_HPP
#define SEQTRAIN_ARCHIVE_HPP

#include <string>
#include <vector>

#include "seqtrain/features.hpp"

namespace seqtrain {

// Feature archive ("FARC") layout:
//   magic "FARC", u32 version, u32 D, f64 frame_period_ms
//   then per utterance: utterance_id, speaker_id (u32 length + bytes),
//   u32 T, T*D row-major little-endian float32.
// All matrices in one archive share D and frame period.
void write_farc(const std::string& path,
                const std::vector<FeatureMatrix>& feats);
std::vector<FeatureMatrix> read_farc(const std::string& path);

// Label file: one line per utterance, "utt_id tok tok ...".
struct LabeledUtterance {
  std::string utterance_id;
  std::vector<int> tokens;
};
void write_labels(const std::string& path,
                  const std::vector<LabeledUtterance>& labels);
std::vector<LabeledUtterance> read_labels(const std::string& path);

}  // namespace seqtrain

#endif  // SEQTRAIN_ARCHIVE_HPP
