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


#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "run_config.hpp"
#include "timbre/dsp/resample.hpp"
#include "timbre/dsp/spectral.hpp"
#include "timbre/errors.hpp"
#include "timbre/pitch/yin.hpp"
#include "timbre/trainer/trainer.hpp"

namespace timbre::cli {

namespace {

namespace fs = std::filesystem;

constexpr std::size_t kPadQuantum = 256;   // one scale-0 loudness frame at 16 kHz
constexpr std::size_t kSpectrogramFft = 1024;
constexpr std::size_t kSpectrogramHop = 256;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : RunConfig::load(config);
    if (seed) c.seed = *seed;
    return c;
  }
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config, "Run configuration file");
  cmd->add_option("--seed", common.seed, "Random seed (overrides the config)");
}

void require_directory(const fs::path& dir, const std::string& what) {
  if (!fs::is_directory(dir)) throw InputError(what + " directory '" + dir.string() + "' does not exist");
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << std::setprecision(9);
  return out;
}

// --- prepare -------------------------------------------------------------

struct PrepareArgs {
  std::string input, out;
  Common common;
};

void cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  auto config = a.common.resolve();
  config.dataset.source = a.input;
  const auto ds = trainer::prepare_dataset(config.dataset, config.seed);
  ds.save(a.out);
  config.save(fs::path(a.out) / "run_config.ini");
  out << "train=" << ds.train.size() << " eval=" << ds.eval.size() << " dropped=" << ds.dropped << '\n';
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data, out, embedder;
  std::optional<std::size_t> scale;
  std::size_t scales = trainer::kScales;
  Common common;
};

pitch::PitchEmbedder<float> obtain_embedder(const RunConfig& config, const std::string& flag, const fs::path& out_dir,
                                            std::ostream& out) {
  const fs::path path = !flag.empty() ? fs::path(flag) : config.embedder_path;
  if (!path.empty()) {
    if (!fs::is_regular_file(path)) throw InputError("embedder checkpoint '" + path.string() + "' not found");
    return pitch::PitchEmbedder<float>::load(trainer::Checkpoint::load(path));
  }
  auto options = config.embedder;
  options.seed = config.seed;
  pitch::EmbedderTrainReport report;
  auto embedder = pitch::train_pitch_embedder(options, &report);
  trainer::Checkpoint ckpt;
  embedder.save(ckpt);
  ckpt.save(out_dir / "embedder.tpck");
  out << "embedder trained: top5_accuracy=" << report.top5_accuracy << '\n';
  return embedder;
}

void cmd_train(const TrainArgs& a, std::ostream& out) {
  require_directory(a.data, "data");
  const auto config = a.common.resolve();
  const auto ds = trainer::Dataset::load(a.data);
  const fs::path out_dir = a.out;
  fs::create_directories(out_dir);
  config.save(out_dir / "run_config.ini");

  std::optional<pitch::PitchEmbedder<float>> embedder;
  if (config.schedule.weights.beta > 0.0) embedder = obtain_embedder(config, a.embedder, out_dir, out);

  trainer::TrainOptions options;
  options.out_dir = out_dir;
  options.embedder = embedder ? &*embedder : nullptr;
  const std::size_t every = std::max<std::size_t>(1, config.schedule.iterations / 10);
  options.on_iteration = [&](std::size_t j, const trainer::IterationLoss& row) {
    if ((row.iteration + 1) % every == 0) {
      out << "scale " << j << " iteration " << row.iteration + 1 << " recon " << row.recon << '\n' << std::flush;
    }
  };

  if (a.scale) {
    const std::size_t j = *a.scale;
    if (j >= trainer::kScales) throw InputError("--scale must lie in [0, 3]");
    const auto lower = trainer::load_stack(out_dir, j);
    std::optional<model::ScaleModel<float>> init;
    if (j > 0) init = model::transfer_weights(lower.back(), model::ScaleConfig::for_scale(j), ds.stats[j]);
    (void)trainer::train_scale(j, ds, config.schedule, lower, init ? &*init : nullptr, config.seed + j, options);
  } else {
    if (a.scales == 0 || a.scales > trainer::kScales) throw InputError("--scales must lie in [1, 4]");
    (void)trainer::train_stack(ds, config.schedule, config.seed, a.scales, options);
  }
  out << "checkpoints written to " << out_dir.string() << '\n';
}

// --- transfer ------------------------------------------------------------

struct TransferArgs {
  std::string input, f0, loudness, checkpoints, out;
  double semitones = 0.0;
  std::size_t scales = trainer::kScales;
  Common common;
};

void cmd_transfer(const TransferArgs& a, std::ostream& out) {
  if (a.input.empty() == a.loudness.empty()) throw InputError("give exactly one of --input and --loudness");
  if (!a.f0.empty() && a.loudness.empty()) throw InputError("--f0 goes with --loudness");
  if (!a.loudness.empty() && a.f0.empty()) throw InputError("--loudness needs --f0");
  if (a.scales == 0 || a.scales > trainer::kScales) throw InputError("--scales must lie in [1, 4]");
  const auto config = a.common.resolve();
  require_directory(a.checkpoints, "checkpoint");
  const auto stack = trainer::load_stack(a.checkpoints, a.scales);
  const auto audio = dsp::read_wav(a.input.empty() ? a.loudness : a.input);
  std::optional<pitch::F0Track> f0;
  if (!a.f0.empty()) f0 = pitch::read_f0_csv(a.f0);
  const auto features = transfer_features(audio, f0, a.semitones, config.voicing_threshold, a.scales);
  auto result = model::generate_stack<float>(stack, features.f0, features.loudness, 0.0);
  result.samples.resize(features.length);
  for (double v : result.samples) {
    if (!std::isfinite(v)) throw NumericalError("transfer produced non-finite samples");
  }
  dsp::write_wav(result, a.out);
  out << "wrote " << result.size() << " samples at 16000 Hz to " << a.out << '\n';
}

// --- features ------------------------------------------------------------

struct FeaturesArgs {
  std::string input, prefix;
};

void cmd_features(const FeaturesArgs& a, std::ostream& out) {
  const auto audio = dsp::resample(dsp::read_wav(a.input), 16000);
  const auto f0 = pitch::track_f0(audio);
  const auto loud = dsp::loudness(audio);
  const auto spec = dsp::stft_magnitude(audio, kSpectrogramFft, kSpectrogramHop);

  pitch::write_f0_csv(f0, a.prefix + "_f0.csv");
  {
    auto csv = open_csv(a.prefix + "_loudness.csv");
    csv << "time,loudness_db\n";
    for (std::size_t i = 0; i < loud.size(); ++i) {
      csv << static_cast<double>(i * dsp::kLoudnessHop) / 16000.0 << ',' << loud.values[i] << '\n';
    }
  }
  {
    auto csv = open_csv(a.prefix + "_spectrogram.csv");
    csv << "time";
    for (std::size_t k = 0; k < spec.bins; ++k) csv << ",bin" << k;
    csv << '\n' << std::setprecision(6);
    for (std::size_t f = 0; f < spec.frames; ++f) {
      csv << static_cast<double>(f * kSpectrogramHop) / 16000.0;
      for (std::size_t k = 0; k < spec.bins; ++k) csv << ',' << spec.at(f, k);
      csv << '\n';
    }
  }
  out << "frames: f0=" << f0.size() << " loudness=" << loud.size() << " spectrogram=" << spec.frames << '\n';
}

// --- embedder-train ------------------------------------------------------

struct EmbedderArgs {
  std::string out;
  Common common;
};

void cmd_embedder_train(const EmbedderArgs& a, std::ostream& out) {
  const auto config = a.common.resolve();
  auto options = config.embedder;
  options.seed = config.seed;
  pitch::EmbedderTrainReport report;
  const auto embedder = pitch::train_pitch_embedder(options, &report);
  trainer::Checkpoint ckpt;
  embedder.save(ckpt);
  const fs::path path = a.out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  ckpt.save(path);
  out << "top5_accuracy=" << std::fixed << std::setprecision(4) << report.top5_accuracy << '\n';
}

// --- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string data, checkpoints, out;
  std::size_t scales = trainer::kScales;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  require_directory(a.data, "data");
  require_directory(a.checkpoints, "checkpoint");
  if (a.scales == 0 || a.scales > trainer::kScales) throw InputError("--scales must lie in [1, 4]");
  const auto ds = trainer::Dataset::load(a.data);
  const auto stack = trainer::load_stack(a.checkpoints, a.scales);
  const auto report = trainer::evaluate(stack, ds.eval);
  report.write_csv(a.out);
  out << "clips=" << report.clips.size() << " spectral_loss=" << report.mean_spectral_loss
      << " f0_cents=" << report.mean_f0_cents << '\n';
}

}  // namespace

TransferFeatures transfer_features(const dsp::AudioBuffer& audio, const std::optional<pitch::F0Track>& f0,
                                   double semitones, double voicing_threshold, std::size_t scales) {
  if (scales == 0 || scales > trainer::kScales) throw InputError("transfer: scale count must lie in [1, 4]");
  auto fine = dsp::resample(audio, 16000);
  TransferFeatures out;
  out.length = fine.size();
  const std::size_t padded = (fine.size() + kPadQuantum - 1) / kPadQuantum * kPadQuantum;
  if (padded < 8 * dsp::kLoudnessWindow) {
    throw InputError("transfer: input shorter than " + std::to_string(8 * dsp::kLoudnessWindow) + " samples at 16 kHz");
  }
  fine.samples.resize(padded, 0.0);
  const std::size_t frames = padded / dsp::kLoudnessHop;
  out.f0 = f0 ? pitch::rerate(*f0, 500.0, frames) : pitch::track_f0(fine);
  out.f0.frequencies.resize(frames, 0.0);
  out.f0.confidences.resize(frames, 0.0);
  const double ratio = std::pow(2.0, semitones / 12.0);
  bool voiced = false;
  for (std::size_t i = 0; i < frames; ++i) {
    double& hz = out.f0.frequencies[i];
    if (out.f0.confidences[i] < voicing_threshold) hz = 0.0;
    hz *= ratio;
    voiced = voiced || hz > 0.0;
  }
  if (!voiced) throw DataQualityError("transfer: no voiced frames in the input");
  for (std::size_t j = 0; j < scales; ++j) {
    const std::size_t factor = static_cast<std::size_t>(16000 / model::kScaleRates[j]);
    out.loudness.push_back(dsp::loudness(factor == 1 ? fine : dsp::downsample(fine, factor)));
  }
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical source-filter timbre transfer"};
  app.require_subcommand(1);

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "Cut, filter and split a WAV corpus into a training set");
  p->add_option("--input", prepare.input, "Directory of WAV files")->required();
  p->add_option("--out", prepare.out, "Output dataset directory")->required();
  add_common(p, prepare.common);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the generator cascade");
  t->add_option("--data", train.data, "Prepared dataset directory")->required();
  t->add_option("--out", train.out, "Checkpoint directory")->required();
  auto* scale_opt = t->add_option("--scale", train.scale, "Train only this scale (lower ones are read from --out)");
  t->add_option("--scales", train.scales, "Number of scales to train from scratch")->excludes(scale_opt);
  t->add_option("--embedder", train.embedder, "Pitch embedder checkpoint for the perceptual loss");
  add_common(t, train.common);

  TransferArgs transfer;
  auto* x = app.add_subcommand("transfer", "Resynthesize a recording with a trained cascade");
  x->add_option("--input", transfer.input, "Source recording (any rate)");
  x->add_option("--f0", transfer.f0, "f0 CSV (time,frequency,confidence) used instead of tracking");
  x->add_option("--loudness", transfer.loudness, "Recording providing loudness when --f0 is given");
  x->add_option("--checkpoints", transfer.checkpoints, "Checkpoint directory")->required();
  x->add_option("--out", transfer.out, "Output WAV (16 kHz)")->required();
  x->add_option("--semitones", transfer.semitones, "Pitch shift applied to the f0 track");
  x->add_option("--scales", transfer.scales, "Number of trained scales to use");
  add_common(x, transfer.common);

  FeaturesArgs features;
  auto* f = app.add_subcommand("features", "Dump f0, loudness and spectrogram CSVs");
  f->add_option("--input", features.input, "Input WAV")->required();
  f->add_option("--out-prefix", features.prefix, "Output path prefix")->required();

  EmbedderArgs embed;
  auto* e = app.add_subcommand("embedder-train", "Train the pitch embedder used by the perceptual loss");
  e->add_option("--out", embed.out, "Output checkpoint file")->required();
  add_common(e, embed.common);

  EvaluateArgs evaluate;
  auto* v = app.add_subcommand("evaluate", "Score a cascade on the evaluation split");
  v->add_option("--data", evaluate.data, "Prepared dataset directory")->required();
  v->add_option("--checkpoints", evaluate.checkpoints, "Checkpoint directory")->required();
  v->add_option("--out", evaluate.out, "Metrics CSV")->required();
  v->add_option("--scales", evaluate.scales, "Number of trained scales to use");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*p) cmd_prepare(prepare, out);
    if (*t) cmd_train(train, out);
    if (*x) cmd_transfer(transfer, out);
    if (*f) cmd_features(features, out);
    if (*e) cmd_embedder_train(embed, out);
    if (*v) cmd_evaluate(evaluate, out);
  } catch (const InputError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitInput;
  } catch (const DataQualityError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const NumericalError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace timbre::cli
