// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "seqtrain/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "seqtrain/error.hpp"

namespace seqtrain {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Config Config::load(const std::string& path) {
  Config cfg;
  cfg.parse(slurp(path), std::filesystem::path(path).parent_path().string());
  return cfg;
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  cfg.parse(text, ".");
  return cfg;
}

void Config::parse(const std::string& text, const std::string& dir) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.rfind("include ", 0) == 0) {
      std::filesystem::path inc(trim(line.substr(8)));
      if (inc.is_relative()) inc = std::filesystem::path(dir) / inc;
      parse(slurp(inc.string()), inc.parent_path().string());
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("malformed config line: " + line);
    values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

void Config::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string Config::get_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::string Config::get_str(const std::string& key,
                            const std::string& def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

int Config::get_int(const std::string& key, int def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : std::stoi(it->second);
}

double Config::get_double(const std::string& key, double def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : std::stod(it->second);
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("bad boolean for " + key + ": " + it->second);
}

namespace {

// List values accept spaces or commas: "0.8 1.0 1.2" and "0.8,1.0,1.2".
std::istringstream list_stream(std::string text) {
  for (char& c : text)
    if (c == ',') c = ' ';
  return std::istringstream(std::move(text));
}

}  // namespace

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  std::istringstream ss = list_stream(get_str(key));
  double value = 0.0;
  while (ss >> value) out.push_back(value);
  return out;
}

std::vector<int> Config::get_ints(const std::string& key) const {
  std::vector<int> out;
  std::istringstream ss = list_stream(get_str(key));
  int value = 0;
  while (ss >> value) out.push_back(value);
  return out;
}

}  // namespace seqtrain
