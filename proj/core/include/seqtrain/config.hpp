// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_CONFIG_HPP
#define SEQTRAIN_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

namespace seqtrain {

// Flat key-value configs: "key = value" lines, '#' comments, and
// "include <path>" lines resolved relative to the including file. Later
// assignments override earlier ones, so presets include a base config first.
class Config {
 public:
  Config() = default;
  static Config load(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_str(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& def) const;
  int get_int(const std::string& key, int def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  void parse(const std::string& text, const std::string& dir);
  std::map<std::string, std::string> values_;
};

}  // namespace seqtrain

#endif  // SEQTRAIN_CONFIG_HPP
