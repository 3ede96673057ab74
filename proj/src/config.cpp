// Copyright 2026 The capadapt Authors.
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

#include "config.hpp"

#include <charconv>
#include <sstream>

#include "common.hpp"

namespace capadapt {

namespace {

double ToDouble(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

std::uint64_t ToU64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const auto n = std::stoull(v, &used);
    if (used == v.size()) return n;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
}

int ToInt(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int n = std::stoi(v, &used);
    if (used == v.size()) return n;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + v + "'");
}

bool ToBool(const std::string& key, const std::string& v) {
  const std::string s = ToLower(v);
  if (s == "on" || s == "true" || s == "1" || s == "yes") return true;
  if (s == "off" || s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected on/off, got '" + v + "'");
}

std::vector<std::string> ToList(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string Num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string JoinNums(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

void RunConfig::Set(const std::string& key, const std::string& raw) {
  const std::string v = Trim(raw);
  auto& img = augment.image;
  if (key == "batch_size") batch_size = ToU64(key, v);
  else if (key == "patience.adapt") patience_adapt = ToInt(key, v);
  else if (key == "patience.pretrain") patience_pretrain = ToInt(key, v);
  else if (key == "max_epochs") max_epochs = ToInt(key, v);
  else if (key == "da.mode") augment.mode = ParseAugmentMode(v);
  else if (key == "da.factor") augment.factor = ToInt(key, v);
  else if (key == "da.seed") augment.seed = ToU64(key, v);
  else if (key == "da.flip_prob") img.flip_prob = ToDouble(key, v);
  else if (key == "da.rotate_prob") img.rotate_prob = ToDouble(key, v);
  else if (key == "da.blur_prob") img.blur_prob = ToDouble(key, v);
  else if (key == "da.clahe_prob") img.clahe_prob = ToDouble(key, v);
  else if (key == "da.grid_prob") img.grid_prob = ToDouble(key, v);
  else if (key == "da.optical_prob") img.optical_prob = ToDouble(key, v);
  else if (key == "da.thesaurus") thesaurus_path = v;
  else if (key == "da.paraphrase_urls") paraphrase_urls = ToList(v);
  else if (key == "memory.enabled") memory_enabled = ToBool(key, v);
  else if (key == "memory.write_prob") memory.write_prob = ToDouble(key, v);
  else if (key == "memory.replay_every") memory.replay_every = ToU64(key, v);
  else if (key == "memory.capacity") memory.capacity = ToU64(key, v);
  else if (key == "memory.seed") memory.seed = ToU64(key, v);
  else if (key == "fraction") fraction = ToDouble(key, v);
  else if (key == "seeds") {
    seeds.clear();
    for (const auto& s : ToList(v)) seeds.push_back(ToU64(key, s));
  } else if (key == "task_order") {
    task_order.clear();
    for (const auto& s : ToList(v)) task_order.push_back(ToInt(key, s));
  } else if (key == "learner.kind") learner.kind = v;
  else if (key == "learner.capacity") learner.capacity = ToU64(key, v);
  else if (key == "learner.lr") learner.learning_rate = ToDouble(key, v);
  else if (key == "eval.micro") {
    if (v == "pooled") micro = MicroMode::kPooled;
    else if (v == "weighted") micro = MicroMode::kItemWeighted;
    else throw ConfigError("eval.micro: expected pooled|weighted");
  } else if (key == "tokenizer.vocab") vocab_path = v;
  else if (key == "output_dir") output_dir = v;
  else if (key == "base.train") base_train = v;
  else if (key == "base.val") base_val = v;
  else if (key == "base.image_root") base_image_root = v;
  else if (key == "target.train") target_train = v;
  else if (key == "target.val") target_val = v;
  else if (key == "target.image_root") target_image_root = v;
  else if (key == "target.holdout_fraction") holdout_fraction = ToDouble(key, v);
  else if (key == "target.split_seed") split_seed = ToU64(key, v);
  else if (key == "target.quality_filter") quality_filter = ToBool(key, v);
  else if (key == "target.quality_marker") quality_marker = v;
  else if (key == "tasks") tasks_path = v;
  else throw ConfigError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::ToMap() const {
  const auto& img = augment.image;
  std::map<std::string, std::string> m;
  m["batch_size"] = std::to_string(batch_size);
  m["patience.adapt"] = std::to_string(patience_adapt);
  m["patience.pretrain"] = std::to_string(patience_pretrain);
  m["max_epochs"] = std::to_string(max_epochs);
  m["da.mode"] = AugmentModeName(augment.mode);
  m["da.factor"] = std::to_string(augment.factor);
  m["da.seed"] = std::to_string(augment.seed);
  m["da.flip_prob"] = Num(img.flip_prob);
  m["da.rotate_prob"] = Num(img.rotate_prob);
  m["da.blur_prob"] = Num(img.blur_prob);
  m["da.clahe_prob"] = Num(img.clahe_prob);
  m["da.grid_prob"] = Num(img.grid_prob);
  m["da.optical_prob"] = Num(img.optical_prob);
  m["da.thesaurus"] = thesaurus_path;
  m["da.paraphrase_urls"] = Join(paraphrase_urls, ",");
  m["memory.enabled"] = memory_enabled ? "on" : "off";
  m["memory.write_prob"] = Num(memory.write_prob);
  m["memory.replay_every"] = std::to_string(memory.replay_every);
  m["memory.capacity"] = std::to_string(memory.capacity);
  m["memory.seed"] = std::to_string(memory.seed);
  m["fraction"] = Num(fraction);
  m["seeds"] = JoinNums(seeds);
  m["task_order"] = JoinNums(task_order);
  m["learner.kind"] = learner.kind;
  m["learner.capacity"] = std::to_string(learner.capacity);
  m["learner.lr"] = Num(learner.learning_rate);
  m["eval.micro"] = micro == MicroMode::kPooled ? "pooled" : "weighted";
  m["tokenizer.vocab"] = vocab_path;
  m["output_dir"] = output_dir;
  m["base.train"] = base_train;
  m["base.val"] = base_val;
  m["base.image_root"] = base_image_root;
  m["target.train"] = target_train;
  m["target.val"] = target_val;
  m["target.image_root"] = target_image_root;
  m["target.holdout_fraction"] = Num(holdout_fraction);
  m["target.split_seed"] = std::to_string(split_seed);
  m["target.quality_filter"] = quality_filter ? "on" : "off";
  m["target.quality_marker"] = quality_marker;
  m["tasks"] = tasks_path;
  return m;
}

std::vector<std::string> RunConfig::Keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : RunConfig{}.ToMap()) keys.push_back(k);
  return keys;
}

std::string RunConfig::Serialize() const {
  std::string out;
  for (const auto& [k, v] : ToMap()) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::Validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience_adapt < 1 || patience_pretrain < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  augment.Validate();
  memory.Validate();
}

RunConfig RunConfig::Parse(std::string_view text) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    cfg.Set(Trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  return cfg;
}

RunConfig RunConfig::Load(const std::string& path) { return Parse(ReadFile(path)); }

}  // namespace capadapt
