// Copyright 2026 The mavil-desk Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mavil/data_synth.hpp"
#include "mavil/evaluation.hpp"
#include "mavil/training.hpp"

namespace mavil {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ConfigValue = std::variant<std::int64_t, double, bool, std::string>;

struct ConfigKey {
  std::string name;
  ConfigValue default_value;
  std::string help;
};

// Flat key/value run configuration. Precedence, lowest first: schema
// defaults, MAVIL_SEED, config file, --set overrides.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<ConfigKey>& schema();

  // Parses `text` according to the key's type.
  void set(const std::string& key, const std::string& text);
  void set_value(const std::string& key, ConfigValue value);
  // key=value
  void apply_override(const std::string& assignment);
  void merge_json(const std::string& json_text, const std::string& origin = "config");
  void merge_file(const std::filesystem::path& path);
  void apply_env_seed();

  bool is_set(const std::string& key) const { return explicit_.count(key) != 0; }
  std::int64_t get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;

  std::string to_json() const;

  ModelConfig model() const;
  MaskConfig mask() const;
  ContrastConfig contrast() const;
  TrainConfig train() const;
  FinetuneConfig finetune() const;
  SynthConfig synth() const;

 private:
  const ConfigValue& get(const std::string& key) const;

  std::map<std::string, ConfigValue> values_;
  std::set<std::string> explicit_;
};

}  // namespace mavil
