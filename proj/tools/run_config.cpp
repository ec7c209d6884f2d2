// Copyright 2026 The Timbre Paint Authors
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


#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "timbre/errors.hpp"

namespace timbre::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& v, const std::string& where) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw InputError(where + ": '" + v + "' is not a valid number");
  return out;
}

std::string format(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

using Setter = std::function<void(RunConfig&, const std::string& value, const std::string& where)>;

template <typename T>
Setter number(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& v, const std::string& w) { c.*field = parse_number<T>(v, w); };
}

template <typename T, typename S>
Setter nested(S RunConfig::*section, T S::*field) {
  return [section, field](RunConfig& c, const std::string& v, const std::string& w) {
    (c.*section).*field = parse_number<T>(v, w);
  };
}

const std::map<std::string, Setter>& setters() {
  using trainer::DatasetSpec;
  using trainer::TrainSchedule;
  using EO = pitch::EmbedderTrainOptions;
  static const std::map<std::string, Setter> table = {
      {"seed", number(&RunConfig::seed)},
      {"dataset.target_rate", nested(&RunConfig::dataset, &DatasetSpec::target_rate)},
      {"dataset.confidence_threshold", nested(&RunConfig::dataset, &DatasetSpec::confidence_threshold)},
      {"dataset.train_fraction", nested(&RunConfig::dataset, &DatasetSpec::train_fraction)},
      {"dataset.clip_seconds", nested(&RunConfig::dataset, &DatasetSpec::clip_seconds)},
      {"schedule.iterations", nested(&RunConfig::schedule, &TrainSchedule::iterations)},
      {"schedule.generator_lr", nested(&RunConfig::schedule, &TrainSchedule::generator_lr)},
      {"schedule.discriminator_lr", nested(&RunConfig::schedule, &TrainSchedule::discriminator_lr)},
      {"schedule.halving_iteration", nested(&RunConfig::schedule, &TrainSchedule::halving_iteration)},
      {"schedule.discriminator_start", nested(&RunConfig::schedule, &TrainSchedule::discriminator_start)},
      {"schedule.batch_sizes",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         std::stringstream in(v);
         std::size_t i = 0;
         for (std::string item; std::getline(in, item, ',');) {
           if (i == trainer::kScales) throw InputError(w + ": expected four batch sizes");
           c.schedule.batch_sizes[i++] = parse_number<std::size_t>(trim(item), w);
         }
         if (i != trainer::kScales) throw InputError(w + ": expected four batch sizes");
       }},
      {"schedule.excitation_noise", nested(&RunConfig::schedule, &TrainSchedule::excitation_noise)},
      {"schedule.alpha",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.schedule.weights.alpha = parse_number<double>(v, w);
       }},
      {"schedule.beta",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.schedule.weights.beta = parse_number<double>(v, w);
       }},
      {"schedule.checkpoint_every", nested(&RunConfig::schedule, &TrainSchedule::checkpoint_every)},
      {"schedule.segment_seconds", nested(&RunConfig::schedule, &TrainSchedule::segment_seconds)},
      {"embedder.iterations", nested(&RunConfig::embedder, &EO::iterations)},
      {"embedder.batch", nested(&RunConfig::embedder, &EO::batch)},
      {"embedder.learning_rate", nested(&RunConfig::embedder, &EO::learning_rate)},
      {"embedder.eval_examples", nested(&RunConfig::embedder, &EO::eval_examples)},
      {"paths.embedder", [](RunConfig& c, const std::string& v, const std::string&) { c.embedder_path = v; }},
      {"transfer.voicing_threshold", number(&RunConfig::voicing_threshold)},
  };
  return table;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string section;
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string where = "config line " + std::to_string(line_no);
    const auto comment = raw.find_first_of("#;");
    const std::string line = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InputError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& [key, _] : setters()) known = known || key.rfind(section + ".", 0) == 0;
      if (!known) throw InputError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) throw InputError(where + ": unknown key '" + full + "'");
    if (value.empty()) throw InputError(where + ": empty value for '" + full + "'");
    it->second(config, value, where);
  }
  config.dataset.validate();
  config.schedule.validate();
  if (!(config.voicing_threshold >= 0.0 && config.voicing_threshold <= 1.0)) {
    throw InputError("config: transfer.voicing_threshold must lie in [0, 1]");
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string RunConfig::to_string() const {
  std::ostringstream out;
  const auto& s = schedule;
  out << "seed = " << seed << "\n\n[dataset]\n"
      << "target_rate = " << dataset.target_rate << '\n'
      << "confidence_threshold = " << format(dataset.confidence_threshold) << '\n'
      << "train_fraction = " << format(dataset.train_fraction) << '\n'
      << "clip_seconds = " << format(dataset.clip_seconds) << "\n\n[schedule]\n"
      << "iterations = " << s.iterations << '\n'
      << "generator_lr = " << format(s.generator_lr) << '\n'
      << "discriminator_lr = " << format(s.discriminator_lr) << '\n'
      << "halving_iteration = " << s.halving_iteration << '\n'
      << "discriminator_start = " << s.discriminator_start << '\n'
      << "batch_sizes = " << s.batch_sizes[0] << ", " << s.batch_sizes[1] << ", " << s.batch_sizes[2] << ", "
      << s.batch_sizes[3] << '\n'
      << "excitation_noise = " << format(s.excitation_noise) << '\n'
      << "alpha = " << format(s.weights.alpha) << '\n'
      << "beta = " << format(s.weights.beta) << '\n'
      << "checkpoint_every = " << s.checkpoint_every << '\n'
      << "segment_seconds = " << format(s.segment_seconds) << "\n\n[embedder]\n"
      << "iterations = " << embedder.iterations << '\n'
      << "batch = " << embedder.batch << '\n'
      << "learning_rate = " << format(embedder.learning_rate) << '\n'
      << "eval_examples = " << embedder.eval_examples << "\n\n[paths]\n";
  if (!embedder_path.empty()) out << "embedder = " << embedder_path.string() << '\n';
  out << "\n[transfer]\nvoicing_threshold = " << format(voicing_threshold) << '\n';
  return out.str();
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << to_string();
}

}  // namespace timbre::cli
