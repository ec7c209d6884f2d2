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


#include "timbre/trainer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "timbre/dsp/resample.hpp"
#include "timbre/errors.hpp"
#include "timbre/pitch/yin.hpp"
#include "timbre/trainer/checkpoint.hpp"

namespace timbre::trainer {

namespace {

constexpr std::array<std::size_t, kScales> kDecimation = {8, 4, 2, 1};

std::vector<std::filesystem::path> wav_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw InputError("prepare: input directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") files.push_back(entry.path());
  }
  if (files.empty()) throw InputError("prepare: no WAV files in '" + dir.string() + "'");
  std::sort(files.begin(), files.end());
  return files;
}

Clip make_clip(const dsp::AudioBuffer& full, std::size_t offset, std::size_t length, std::string source) {
  Clip clip;
  clip.source = std::move(source);
  clip.offset = offset;
  dsp::AudioBuffer fine{std::vector<double>(full.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                                            full.samples.begin() + static_cast<std::ptrdiff_t>(offset + length)),
                        full.sample_rate};
  clip.f0 = pitch::track_f0(fine);
  clip.mean_confidence = pitch::mean_confidence(clip.f0);
  for (std::size_t j = 0; j < kScales; ++j) {
    clip.audio[j] = kDecimation[j] == 1 ? fine : dsp::downsample(fine, kDecimation[j]);
    clip.loudness[j] = dsp::loudness(clip.audio[j]);
  }
  return clip;
}

std::array<model::LoudnessStats, kScales> loudness_stats(const std::vector<Clip>& clips) {
  std::array<model::LoudnessStats, kScales> stats;
  for (std::size_t j = 0; j < kScales; ++j) {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (const auto& clip : clips) {
      for (double v : clip.loudness[j].values) {
        sum += v;
        sum_sq += v * v;
        ++n;
      }
    }
    if (n == 0) continue;
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
    // Below 1 dB of spread the track is effectively constant; dividing by the
    // residual jitter would only amplify it.
    stats[j] = {mean, std::max(std::sqrt(var), 1.0)};
  }
  return stats;
}

// Names travel through the u64 container as one character per word.
std::vector<std::uint64_t> encode_text(const std::string& s) { return {s.begin(), s.end()}; }

std::string decode_text(const nn::Tensor<std::uint64_t>& t) {
  std::string s;
  for (auto c : t.storage()) s.push_back(static_cast<char>(c));
  return s;
}

void write_manifest(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("dataset: cannot write '" + path.string() + "'");
  out << "clip,source,offset_seconds,mean_confidence,split\n";
  std::size_t i = 0;
  for (const auto* split : {&ds.train, &ds.eval}) {
    for (const auto& clip : *split) {
      const double rate = clip.audio.back().sample_rate;
      out << i++ << ',' << clip.source << ',' << static_cast<double>(clip.offset) / rate << ','
          << clip.mean_confidence << ',' << (split == &ds.train ? "train" : "eval") << '\n';
    }
  }
}

}  // namespace

std::size_t DatasetSpec::clip_samples() const {
  return static_cast<std::size_t>(std::llround(clip_seconds * target_rate));
}

void DatasetSpec::validate() const {
  if (target_rate != 16000) throw InputError("dataset: target rate must be 16000 Hz");
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw InputError("dataset: confidence threshold must lie in [0, 1]");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InputError("dataset: split ratio must lie in (0, 1)");
  const auto n = clip_samples();
  if (!(clip_seconds > 0.0) || n == 0 || n % 256 != 0 || std::abs(static_cast<double>(n) - clip_seconds * target_rate) > 1e-6) {
    throw InputError("dataset: clip length must be a positive multiple of 16 ms");
  }
}

std::size_t train_count(std::size_t clips, double fraction) {
  if (clips <= 1) return clips;
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(clips) * fraction));
  return std::clamp<std::size_t>(n, 1, clips - 1);
}

Dataset prepare_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto files = wav_files(spec.source);
  const std::size_t length = spec.clip_samples();
  std::vector<Clip> kept;
  std::size_t dropped = 0;
  for (const auto& file : files) {
    const auto audio = dsp::resample(dsp::read_wav(file), spec.target_rate);
    for (std::size_t offset = 0; offset + length <= audio.size(); offset += length) {
      auto clip = make_clip(audio, offset, length, file.filename().string());
      if (clip.mean_confidence < spec.confidence_threshold) {
        ++dropped;
      } else {
        kept.push_back(std::move(clip));
      }
    }
  }
  if (kept.empty()) {
    throw DataQualityError("dataset empty after confidence filter (" + std::to_string(dropped) +
                           " clips dropped from '" + spec.source.string() + "')");
  }
  std::vector<std::size_t> order(kept.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Dataset ds;
  ds.seed = seed;
  ds.dropped = dropped;
  const std::size_t n_train = train_count(kept.size(), spec.train_fraction);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? ds.train : ds.eval).push_back(std::move(kept[order[i]]));
  }
  ds.stats = loudness_stats(ds.train);
  return ds;
}

void Dataset::save(const std::filesystem::path& directory) const {
  std::filesystem::create_directories(directory);
  Checkpoint ckpt;
  ckpt.put_u64s("meta/counts", {train.size(), eval.size(), dropped});
  ckpt.put_u64("meta/seed", seed);
  std::vector<double> means, stds;
  for (const auto& s : stats) {
    means.push_back(s.mean);
    stds.push_back(s.std);
  }
  ckpt.put("stats/loudness_mean", nn::Tensor<double>({kScales}, means));
  ckpt.put("stats/loudness_std", nn::Tensor<double>({kScales}, stds));
  std::size_t i = 0;
  for (const auto* split : {&train, &eval}) {
    for (const auto& clip : *split) {
      const std::string p = "clip" + std::to_string(i++) + "/";
      ckpt.put_u64s(p + "source", encode_text(clip.source));
      ckpt.put_u64(p + "offset", clip.offset);
      ckpt.put_scalar(p + "confidence", clip.mean_confidence);
      for (std::size_t j = 0; j < kScales; ++j) {
        const auto& a = clip.audio[j];
        ckpt.put(p + "audio" + std::to_string(j), nn::Tensor<double>({a.size()}, a.samples));
        const auto& l = clip.loudness[j];
        ckpt.put(p + "loudness" + std::to_string(j), nn::Tensor<double>({l.size()}, l.values));
      }
      std::vector<double> f0 = clip.f0.frequencies;
      f0.insert(f0.end(), clip.f0.confidences.begin(), clip.f0.confidences.end());
      ckpt.put(p + "f0", nn::Tensor<double>({2, clip.f0.size()}, std::move(f0)));
      ckpt.put_scalar(p + "f0_rate", clip.f0.frame_rate);
    }
  }
  ckpt.save(directory / "dataset.tpck");
  write_manifest(*this, directory / "clips.csv");
}

Dataset Dataset::load(const std::filesystem::path& directory) {
  const auto path = directory / "dataset.tpck";
  if (!std::filesystem::is_regular_file(path)) {
    throw InputError("dataset: '" + path.string() + "' not found; run prepare first");
  }
  const auto ckpt = Checkpoint::load(path);
  Dataset ds;
  const auto& counts = ckpt.u64s("meta/counts").storage();
  if (counts.size() != 3) throw InputError("dataset: malformed meta/counts");
  ds.dropped = counts[2];
  ds.seed = ckpt.u64("meta/seed");
  const auto& means = ckpt.f64("stats/loudness_mean").storage();
  const auto& stds = ckpt.f64("stats/loudness_std").storage();
  if (means.size() != kScales || stds.size() != kScales) throw InputError("dataset: malformed loudness stats");
  for (std::size_t j = 0; j < kScales; ++j) ds.stats[j] = {means[j], stds[j]};
  const std::size_t total = counts[0] + counts[1];
  for (std::size_t i = 0; i < total; ++i) {
    const std::string p = "clip" + std::to_string(i) + "/";
    Clip clip;
    clip.source = decode_text(ckpt.u64s(p + "source"));
    clip.offset = ckpt.u64(p + "offset");
    clip.mean_confidence = ckpt.scalar(p + "confidence");
    for (std::size_t j = 0; j < kScales; ++j) {
      const auto& a = ckpt.f64(p + "audio" + std::to_string(j)).storage();
      clip.audio[j] = {std::vector<double>(a.begin(), a.end()), model::kScaleRates[j]};
      const auto& l = ckpt.f64(p + "loudness" + std::to_string(j)).storage();
      clip.loudness[j].values.assign(l.begin(), l.end());
      clip.loudness[j].source_rate = model::kScaleRates[j];
    }
    const auto& f0 = ckpt.f64(p + "f0");
    const std::size_t frames = f0.dim(1);
    clip.f0.frequencies.assign(f0.storage().begin(), f0.storage().begin() + static_cast<std::ptrdiff_t>(frames));
    clip.f0.confidences.assign(f0.storage().begin() + static_cast<std::ptrdiff_t>(frames), f0.storage().end());
    clip.f0.frame_rate = ckpt.scalar(p + "f0_rate");
    (i < counts[0] ? ds.train : ds.eval).push_back(std::move(clip));
  }
  return ds;
}

}  // namespace timbre::trainer
