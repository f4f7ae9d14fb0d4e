// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_WAV_HPP
#define SEQTRAIN_WAV_HPP

#include <string>

#include "seqtrain/features.hpp"

namespace seqtrain {

// Mono PCM WAV, 16-bit integer or 32-bit float samples.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

}  // namespace seqtrain

#endif  // SEQTRAIN_WAV_HPP
