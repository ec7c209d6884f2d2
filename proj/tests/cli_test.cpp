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


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "run_config.hpp"
#include "test_support.hpp"
#include "timbre/dsp/excitation.hpp"
#include "timbre/dsp/resample.hpp"
#include "timbre/errors.hpp"
#include "timbre/pitch/embedder.hpp"
#include "timbre/pitch/yin.hpp"
#include "timbre/trainer/trainer.hpp"

using namespace timbre;
using timbre::cli::RunConfig;
using timbre::testing::TempDir;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "timbre_paint");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

void write_tones(const std::filesystem::path& dir, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    const double f0 = 130.0 * std::pow(2.0, static_cast<double>(i) / 12.0);
    dsp::write_wav(timbre::testing::harmonic_tone(f0, 16000, 32000), dir / ("t" + std::to_string(10 + i) + ".wav"));
  }
}

constexpr const char* kTinyConfig = R"(seed = 3
[schedule]
iterations = 3
batch_sizes = 1, 1, 1, 1
alpha = 0
beta = 0
segment_seconds = 1.024
)";

double median_column(const std::filesystem::path& csv, std::size_t column) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<double> values;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string cell;
    for (std::size_t c = 0; c <= column; ++c) std::getline(row, cell, ',');
    values.push_back(std::stod(cell));
  }
  std::sort(values.begin(), values.end());
  return values[values.size() / 2];
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults round-trip through the canonical text") {
    const RunConfig defaults;
    const auto back = RunConfig::parse(defaults.to_string());
    CHECK(back.to_string() == defaults.to_string());
    CHECK(back.schedule.iterations == 120000);
    CHECK(back.schedule.batch_sizes == std::array<std::size_t, 4>{32, 16, 8, 4});
    CHECK(back.dataset.confidence_threshold == 0.85);
  }

  TEST_CASE("values, sections and comments") {
    const auto c = RunConfig::parse(
        "# comment\nseed = 42\n[schedule]\niterations = 200 ; trailing\nbatch_sizes = 4,3, 2 ,1\n"
        "generator_lr = 1e-3\n[dataset]\nclip_seconds = 4\n[paths]\nembedder = /tmp/e.tpck\n");
    CHECK(c.seed == 42);
    CHECK(c.schedule.iterations == 200);
    CHECK(c.schedule.batch_sizes == std::array<std::size_t, 4>{4, 3, 2, 1});
    CHECK(c.schedule.generator_lr == 1e-3);
    CHECK(c.dataset.clip_seconds == 4.0);
    CHECK(c.embedder_path == "/tmp/e.tpck");
    CHECK(RunConfig::parse(c.to_string()).to_string() == c.to_string());
  }

  TEST_CASE("unknown keys, sections and bad values are rejected with the line") {
    const auto rejects = [](const std::string& text, const std::string& needle) {
      try {
        (void)RunConfig::parse(text);
        return false;
      } catch (const InputError& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
      }
    };
    CHECK(rejects("[schedule]\nitterations = 5\n", "line 2"));
    CHECK(rejects("[schedule]\nitterations = 5\n", "schedule.itterations"));
    CHECK(rejects("[scheduel]\n", "unknown section"));
    CHECK(rejects("seed = -1\n", "not a valid number"));
    CHECK(rejects("[schedule]\niterations = 12x\n", "line 2"));
    CHECK(rejects("[schedule]\nbatch_sizes = 1, 2\n", "four batch sizes"));
    CHECK(rejects("[schedule]\ndiscriminator_start = 70000\n", "discriminator start"));
    CHECK(rejects("just words\n", "key = value"));
    CHECK(rejects("[dataset]\ntrain_fraction = 1.5\n", "split ratio"));
  }
}

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2, help exits 0") {
    CHECK(invoke({}).code == cli::kExitInput);
    CHECK(invoke({"bogus"}).code == cli::kExitInput);
    CHECK(invoke({"prepare", "--input", "x"}).code == cli::kExitInput);
    CHECK(invoke({"--help"}).code == cli::kExitOk);
    CHECK(invoke({"train", "--data", "a", "--out", "b", "--scale", "1", "--scales", "2"}).code == cli::kExitInput);
  }

  TEST_CASE("the installed binary runs") {
    CHECK(std::system(TIMBRE_PAINT_BINARY " --help > /dev/null") == 0);
    CHECK(WEXITSTATUS(std::system(TIMBRE_PAINT_BINARY " features > /dev/null 2>&1")) == cli::kExitInput);
  }

  TEST_CASE("prepare: summary line, echoed config, idempotent output") {
    TempDir corpus("cli_corpus"), out("cli_prep");
    write_tones(corpus.path(), 20);
    const auto r = invoke({"prepare", "--input", corpus.path().string(), "--out", (out / "a").string(), "--seed", "4"});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(r.out == "train=17 eval=3 dropped=0\n");
    const auto echoed = RunConfig::load(out / "a" / "run_config.ini");
    CHECK(echoed.seed == 4);
    CHECK(invoke({"prepare", "--input", corpus.path().string(), "--out", (out / "b").string(), "--seed", "4"}).code == 0);
    CHECK(slurp(out / "a" / "dataset.tpck") == slurp(out / "b" / "dataset.tpck"));
  }

  TEST_CASE("prepare: empty directory exits 2 naming it, noise exits 3") {
    TempDir empty("cli_empty"), noise("cli_noise"), out("cli_prep_fail");
    auto r = invoke({"prepare", "--input", empty.path().string(), "--out", out.path().string()});
    CHECK(r.code == cli::kExitInput);
    CHECK(r.err.find(empty.path().string()) != std::string::npos);
    for (std::uint64_t i = 0; i < 2; ++i) {
      dsp::write_wav(timbre::testing::white_noise(16000, 48000, i), noise / ("n" + std::to_string(i) + ".wav"));
    }
    r = invoke({"prepare", "--input", noise.path().string(), "--out", out.path().string()});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.find("dataset empty after confidence filter") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(out / "dataset.tpck"));
  }

  TEST_CASE("train, evaluate and transfer on a tiny run") {
    TempDir corpus("cli_corpus2"), work("cli_work");
    write_tones(corpus.path(), 4);
    const auto data = (work / "data").string(), ckpts = (work / "ckpt").string();
    write_text(work / "tiny.ini", kTinyConfig);
    REQUIRE(invoke({"prepare", "--input", corpus.path().string(), "--out", data}).code == 0);

    CHECK(invoke({"train", "--data", (work / "missing").string(), "--out", ckpts}).code == cli::kExitInput);

    auto r = invoke({"train", "--data", data, "--out", ckpts, "--scales", "2", "--config", (work / "tiny.ini").string()});
    INFO(r.err);
    REQUIRE(r.code == cli::kExitOk);
    std::size_t checkpoints = 0;
    for (const auto& e : std::filesystem::directory_iterator(ckpts)) checkpoints += e.path().extension() == ".tpck";
    CHECK(checkpoints == 2);
    CHECK(line_count(work / "ckpt" / "scale0_loss.csv") == 4);
    CHECK(line_count(work / "ckpt" / "scale1_loss.csv") == 4);
    CHECK(RunConfig::load(work / "ckpt" / "run_config.ini").schedule.iterations == 3);

    // Training a single scale on top of the existing lower ones.
    r = invoke({"train", "--data", data, "--out", ckpts, "--scale", "1", "--config", (work / "tiny.ini").string()});
    CHECK(r.code == cli::kExitOk);

    r = invoke({"evaluate", "--data", data, "--checkpoints", ckpts, "--scales", "2", "--out",
                (work / "metrics.csv").string()});
    REQUIRE(r.code == cli::kExitOk);
    const auto ds = trainer::Dataset::load(data);
    CHECK(line_count(work / "metrics.csv") == ds.eval.size() + 1 + 1);

    // Missing scales are listed.
    r = invoke({"transfer", "--input", (corpus / "t10.wav").string(), "--checkpoints", ckpts, "--out",
                (work / "x.wav").string()});
    CHECK(r.code == cli::kExitInput);
    CHECK(r.err.find("scale 2, 3") != std::string::npos);

    // 5 s at 44.1 kHz in, 5 s at 16 kHz out.
    dsp::write_wav(timbre::testing::harmonic_tone(247.0, 44100, 5 * 44100), work / "long.wav");
    r = invoke({"transfer", "--input", (work / "long.wav").string(), "--checkpoints", ckpts, "--scales", "2", "--out",
                (work / "long_out.wav").string()});
    INFO(r.err);
    REQUIRE(r.code == cli::kExitOk);
    const auto produced = dsp::read_wav(work / "long_out.wav");
    CHECK(produced.sample_rate == 16000);
    CHECK(std::abs(static_cast<long>(produced.size()) - 80000) <= 32);

    // Same call through an f0 CSV.
    pitch::write_f0_csv(pitch::track_f0(dsp::resample(dsp::read_wav(work / "long.wav"), 16000)), work / "f0.csv");
    r = invoke({"transfer", "--f0", (work / "f0.csv").string(), "--loudness", (work / "long.wav").string(),
                "--checkpoints", ckpts, "--scales", "2", "--out", (work / "csv_out.wav").string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(dsp::read_wav(work / "csv_out.wav").size() == produced.size());

    // Noise has no voiced frames.
    dsp::write_wav(timbre::testing::white_noise(16000, 32000, 9), work / "noise.wav");
    r = invoke({"transfer", "--input", (work / "noise.wav").string(), "--checkpoints", ckpts, "--scales", "2",
                "--out", (work / "noise_out.wav").string()});
    CHECK(r.code == cli::kExitData);
    CHECK_FALSE(std::filesystem::exists(work / "noise_out.wav"));
  }

  TEST_CASE("train: non-finite loss exits 4 naming the iteration") {
    TempDir corpus("cli_corpus3"), work("cli_nan");
    write_tones(corpus.path(), 2);
    write_text(work / "bad.ini", std::string(kTinyConfig) + "generator_lr = 1e38\ncheckpoint_every = 1\n");
    REQUIRE(invoke({"prepare", "--input", corpus.path().string(), "--out", (work / "data").string()}).code == 0);
    const auto r = invoke({"train", "--data", (work / "data").string(), "--out", (work / "ckpt").string(), "--scales",
                           "1", "--config", (work / "bad.ini").string()});
    CHECK(r.code == cli::kExitNumerical);
    CHECK(r.err.find("iteration ") != std::string::npos);
  }

  TEST_CASE("transfer features: an octave up doubles the excitation pitch") {
    const auto tone = timbre::testing::harmonic_tone(196.0, 22050, 2 * 22050);
    const auto base = cli::transfer_features(tone, std::nullopt, 0.0, 0.5, 4);
    const auto up = cli::transfer_features(tone, std::nullopt, 12.0, 0.5, 4);
    CHECK(base.length == 32000);
    CHECK(base.f0.size() == 1000);
    CHECK(base.loudness[0].size() == 125);
    CHECK(base.loudness[3].size() == 1000);
    const auto median_f0 = [](const pitch::F0Track& t) {
      std::vector<double> v;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (t.frequencies[i] > 0.0) v.push_back(t.frequencies[i]);
      }
      std::sort(v.begin(), v.end());
      return v[v.size() / 2];
    };
    const double f_base = median_f0(pitch::track_f0(dsp::sine_excitation(base.f0, 16000)));
    const double f_up = median_f0(pitch::track_f0(dsp::sine_excitation(up.f0, 16000)));
    CHECK(f_base == doctest::Approx(196.0).epsilon(0.01));
    CHECK(f_up / f_base == doctest::Approx(2.0).epsilon(0.005));
    CHECK_THROWS_AS(cli::transfer_features(timbre::testing::white_noise(16000, 16000, 1), std::nullopt, 0.0, 0.5, 4),
                    DataQualityError);
  }

  TEST_CASE("features: tone pitch, silent floor, row counts") {
    TempDir work("cli_features");
    const std::size_t n = 16000 + 100;
    dsp::write_wav(timbre::testing::sine(440.0, 16000, n, 0.5), work / "a4.wav");
    auto r = invoke({"features", "--input", (work / "a4.wav").string(), "--out-prefix", (work / "a4").string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(median_column(work / "a4_f0.csv", 1) == doctest::Approx(440.0).epsilon(0.01));
    CHECK(line_count(work / "a4_f0.csv") == n / 32 + 1);
    CHECK(line_count(work / "a4_loudness.csv") == n / 32 + 1);
    CHECK(line_count(work / "a4_spectrogram.csv") == (n + 255) / 256 + 1);
    std::ifstream spec(work / "a4_spectrogram.csv");
    std::string header;
    std::getline(spec, header);
    CHECK(std::count(header.begin(), header.end(), ',') == 513);

    dsp::write_wav({std::vector<double>(8000, 0.0), 16000}, work / "silence.wav");
    r = invoke({"features", "--input", (work / "silence.wav").string(), "--out-prefix", (work / "s").string()});
    REQUIRE(r.code == cli::kExitOk);
    std::ifstream loud(work / "s_loudness.csv");
    std::getline(loud, header);
    for (std::string line; std::getline(loud, line);) CHECK(line.substr(line.find(',') + 1) == "-90");

    r = invoke({"features", "--input", (work / "nothing.wav").string(), "--out-prefix", (work / "z").string()});
    CHECK(r.code == cli::kExitInput);
  }

  TEST_CASE("embedder-train: reruns are identical and the output loads") {
    TempDir work("cli_embedder");
    write_text(work / "small.ini", "[embedder]\niterations = 5\nbatch = 4\neval_examples = 20\n");
    for (const char* name : {"a.tpck", "b.tpck"}) {
      const auto r = invoke({"embedder-train", "--out", (work / name).string(), "--seed", "7", "--config",
                             (work / "small.ini").string()});
      REQUIRE(r.code == cli::kExitOk);
      CHECK(r.out.rfind("top5_accuracy=", 0) == 0);
    }
    CHECK(slurp(work / "a.tpck") == slurp(work / "b.tpck"));
    CHECK_NOTHROW(pitch::PitchEmbedder<float>::load(trainer::Checkpoint::load(work / "a.tpck")));
  }

  TEST_CASE("embedder-train: the default run reaches 90% top-5 accuracy") {
    TempDir work("cli_embedder_full");
    const auto r = invoke({"embedder-train", "--out", (work / "e.tpck").string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(std::stod(r.out.substr(r.out.find('=') + 1)) >= 0.90);
  }
}
