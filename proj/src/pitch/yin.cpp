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

#include "timbre/pitch/yin.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "timbre/errors.hpp"

namespace timbre::pitch {
namespace {

long reflect(long index, long length) {
  while (index < 0 || index >= length) {
    if (index < 0) index = -index;
    if (index >= length) index = 2 * (length - 1) - index;
  }
  return index;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

F0Track track_f0(const dsp::AudioBuffer& x, const YinOptions& options) {
  dsp::validate(x);
  if (options.frame_hop == 0 || options.window < 2) throw InputError("track_f0: invalid hop or window");
  if (x.size() < 2 * options.window) {
    throw InputError("track_f0: need at least two analysis windows (" + std::to_string(2 * options.window) +
                     " samples), got " + std::to_string(x.size()));
  }
  const double rate = x.sample_rate;
  const std::size_t tau_min = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(rate / options.max_frequency)));
  const std::size_t tau_max = std::min<std::size_t>(options.window - 1,
                                                    static_cast<std::size_t>(std::ceil(rate / options.min_frequency)));
  if (tau_min + 1 >= tau_max) throw InputError("track_f0: frequency range is empty at this sample rate");

  const std::size_t span = options.window + tau_max + 1;
  const long length = static_cast<long>(x.size());
  const long half = static_cast<long>(options.window / 2);
  std::vector<double> segment(span), diff(tau_max + 2), cmnd(tau_max + 2);

  F0Track track;
  track.frame_rate = rate / static_cast<double>(options.frame_hop);
  const std::size_t frames = x.size() / options.frame_hop;
  track.frequencies.resize(frames);
  track.confidences.resize(frames);

  for (std::size_t f = 0; f < frames; ++f) {
    const long start = static_cast<long>(f * options.frame_hop) - half;
    for (std::size_t i = 0; i < span; ++i) segment[i] = x.samples[reflect(start + static_cast<long>(i), length)];

    for (std::size_t tau = 1; tau <= tau_max + 1; ++tau) {
      double acc = 0.0;
      for (std::size_t j = 0; j < options.window; ++j) {
        const double d = segment[j] - segment[j + tau];
        acc += d * d;
      }
      diff[tau] = acc;
    }
    cmnd[0] = 1.0;
    double running = 0.0;
    for (std::size_t tau = 1; tau <= tau_max + 1; ++tau) {
      running += diff[tau];
      cmnd[tau] = running > 0.0 ? diff[tau] * static_cast<double>(tau) / running : 1.0;
    }

    std::size_t chosen = 0;
    for (std::size_t tau = tau_min; tau <= tau_max; ++tau) {
      if (cmnd[tau] < options.threshold) {
        while (tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
        chosen = tau;
        break;
      }
    }
    if (chosen == 0) {
      std::size_t best = tau_min;
      for (std::size_t tau = tau_min; tau <= tau_max; ++tau) {
        if (cmnd[tau] < cmnd[best]) best = tau;
      }
      track.frequencies[f] = 0.0;
      track.confidences[f] = std::clamp(1.0 - cmnd[best], 0.0, 1.0);
      continue;
    }

    double refined = static_cast<double>(chosen);
    const double a = cmnd[chosen - 1], b = cmnd[chosen], c = cmnd[chosen + 1];
    const double curvature = a - 2.0 * b + c;
    if (curvature > 0.0) refined += std::clamp(0.5 * (a - c) / curvature, -1.0, 1.0);
    track.frequencies[f] = rate / refined;
    track.confidences[f] = std::clamp(1.0 - b, 0.0, 1.0);
  }
  return track;
}

double mean_confidence(const F0Track& track) {
  if (track.confidences.empty()) throw InputError("mean_confidence: empty track");
  double total = 0.0;
  for (double c : track.confidences) total += c;
  return total / static_cast<double>(track.confidences.size());
}

F0Track rerate(const F0Track& track, double frame_rate, std::size_t frames) {
  if (track.empty() || track.frame_rate <= 0.0) throw InputError("rerate: empty track");
  if (frame_rate <= 0.0) throw InputError("rerate: frame rate must be positive");
  F0Track out;
  out.frame_rate = frame_rate;
  out.frequencies.resize(frames);
  out.confidences.resize(frames);
  const std::size_t last = track.size() - 1;
  for (std::size_t i = 0; i < frames; ++i) {
    const double pos = std::min(static_cast<double>(i) * track.frame_rate / frame_rate, static_cast<double>(last));
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, last);
    const double frac = pos - static_cast<double>(lo);
    out.confidences[i] = (1.0 - frac) * track.confidences[lo] + frac * track.confidences[hi];
    const double f_lo = track.frequencies[lo], f_hi = track.frequencies[hi];
    if (f_lo > 0.0 && f_hi > 0.0) {
      out.frequencies[i] = (1.0 - frac) * f_lo + frac * f_hi;
    } else {
      out.frequencies[i] = frac < 0.5 ? f_lo : f_hi;
    }
  }
  return out;
}

F0Track read_f0_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open f0 CSV " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "time,frequency,confidence") {
    throw InputError("f0 CSV " + path.string() + ": expected header 'time,frequency,confidence'");
  }
  std::vector<double> times;
  F0Track track;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string cell[3];
    for (auto& c : cell) {
      if (!std::getline(fields, c, ',')) throw InputError("f0 CSV row " + std::to_string(row) + ": expected 3 fields");
    }
    double value[3];
    for (int k = 0; k < 3; ++k) {
      try {
        std::size_t used = 0;
        value[k] = std::stod(trim(cell[k]), &used);
        if (used != trim(cell[k]).size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw InputError("f0 CSV row " + std::to_string(row) + ": malformed number '" + cell[k] + "'");
      }
    }
    if (value[1] < 0.0 || value[2] < 0.0 || value[2] > 1.0) {
      throw InputError("f0 CSV row " + std::to_string(row) + ": frequency must be >= 0 and confidence in [0, 1]");
    }
    times.push_back(value[0]);
    track.frequencies.push_back(value[1]);
    track.confidences.push_back(value[2]);
  }
  if (times.size() < 2) throw InputError("f0 CSV " + path.string() + ": need at least two frames");
  const double spacing = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  if (spacing <= 0.0) throw InputError("f0 CSV " + path.string() + ": timestamps must increase");
  const double tolerance = std::max(2e-6, 1e-3 * spacing);
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs(times[i] - times[i - 1] - spacing) > tolerance) {
      throw InputError("f0 CSV " + path.string() + ": non-uniform timestamps near row " + std::to_string(i + 2));
    }
  }
  double rate = 1.0 / spacing;
  if (std::abs(rate - std::round(rate)) < 1e-6 * rate) rate = std::round(rate);
  track.frame_rate = rate;
  return track;
}

void write_f0_csv(const F0Track& track, const std::filesystem::path& path) {
  if (track.frame_rate <= 0.0) throw InputError("write_f0_csv: track has no frame rate");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << "time,frequency,confidence\n";
  char row[96];
  for (std::size_t i = 0; i < track.size(); ++i) {
    std::snprintf(row, sizeof row, "%.6f,%.6f,%.6f\n", static_cast<double>(i) / track.frame_rate,
                  track.frequencies[i], track.confidences[i]);
    out << row;
  }
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace timbre::pitch
