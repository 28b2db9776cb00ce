// Copyright 2026 The vocalf0 Authors
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

#include "vocalf0/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "vocalf0/error.hpp"

namespace vocalf0 {

namespace {

constexpr double kGridTolerance = 1e-6;  // seconds

}  // namespace

EvalScores EvalScores::from_counts(std::size_t tp, std::size_t fp, std::size_t fn,
                                   double tolerance_cents) {
  EvalScores s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  s.tolerance_cents = tolerance_cents;
  const auto d = [](std::size_t x) { return static_cast<double>(x); };
  const bool ref_empty = tp + fn == 0;
  const bool est_empty = tp + fp == 0;
  s.precision = est_empty ? (ref_empty ? 1.0 : 0.0) : d(tp) / d(tp + fp);
  s.recall = ref_empty ? (est_empty ? 1.0 : 0.0) : d(tp) / d(tp + fn);
  const double pr = s.precision + s.recall;
  s.f_score = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
  const std::size_t denom = tp + fp + fn;
  s.accuracy = denom > 0 ? d(tp) / d(denom) : 1.0;
  return s;
}

// Kuhn's augmenting-path bipartite matching; frames hold a handful of
// values so the O(V * E) bound is irrelevant.
std::size_t match_count(std::span<const double> ref, std::span<const double> est,
                        double tolerance_cents) {
  if (ref.empty() || est.empty()) return 0;
  const std::size_t nr = ref.size();
  const std::size_t ne = est.size();
  std::vector<std::vector<std::size_t>> adj(nr);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < ne; ++j) {
      if (ref[i] > 0.0 && est[j] > 0.0 &&
          std::abs(cents(est[j], ref[i])) <= tolerance_cents) {
        adj[i].push_back(j);
      }
    }
  }
  constexpr std::size_t kFree = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> est_owner(ne, kFree);
  std::vector<char> seen(ne);

  std::function<bool(std::size_t)> augment = [&](std::size_t i) {
    for (std::size_t j : adj[i]) {
      if (seen[j]) continue;
      seen[j] = 1;
      if (est_owner[j] == kFree || augment(est_owner[j])) {
        est_owner[j] = i;
        return true;
      }
    }
    return false;
  };

  std::size_t matched = 0;
  for (std::size_t i = 0; i < nr; ++i) {
    std::fill(seen.begin(), seen.end(), 0);
    if (augment(i)) ++matched;
  }
  return matched;
}

MultiF0Annotation align_to_grid(const MultiF0Annotation& ann,
                                std::span<const double> grid_times) {
  MultiF0Annotation out;
  out.frame_times.assign(grid_times.begin(), grid_times.end());
  out.f0_sets.assign(grid_times.size(), {});
  if (grid_times.empty()) return out;

  double step = 0.0;
  if (grid_times.size() > 1) {
    step = (grid_times.back() - grid_times.front()) /
           static_cast<double>(grid_times.size() - 1);
    for (std::size_t i = 1; i < grid_times.size(); ++i) {
      if (std::abs(grid_times[i] - grid_times[i - 1] - step) > kGridTolerance) {
        throw ShapeError("align_to_grid: grid is not uniform at frame " + std::to_string(i));
      }
    }
  }
  const double window = grid_times.size() > 1 ? 0.5 * step + kGridTolerance
                                              : std::numeric_limits<double>::infinity();
  const auto& src = ann.frame_times;
  for (std::size_t g = 0; g < grid_times.size(); ++g) {
    const double t = grid_times[g];
    const auto it = std::lower_bound(src.begin(), src.end(), t);
    std::size_t best = src.size();
    double dist = std::numeric_limits<double>::infinity();
    if (it != src.end()) {
      best = static_cast<std::size_t>(it - src.begin());
      dist = *it - t;
    }
    if (it != src.begin()) {
      const auto prev = static_cast<std::size_t>(it - src.begin()) - 1;
      if (t - src[prev] <= dist) {
        best = prev;
        dist = t - src[prev];
      }
    }
    if (best < src.size() && dist <= window) out.f0_sets[g] = ann.f0_sets[best];
  }
  return out;
}

EvalScores frame_scores(const MultiF0Annotation& ref, const MultiF0Annotation& est,
                        double tolerance_cents) {
  if (ref.n_frames() != est.n_frames() || ref.f0_sets.size() != ref.n_frames() ||
      est.f0_sets.size() != est.n_frames()) {
    throw ShapeError("frame_scores: reference has " + std::to_string(ref.n_frames()) +
                     " frames, estimate has " + std::to_string(est.n_frames()));
  }
  for (std::size_t t = 0; t < ref.n_frames(); ++t) {
    if (std::abs(ref.frame_times[t] - est.frame_times[t]) > kGridTolerance) {
      throw ShapeError("frame_scores: time grids differ at frame " + std::to_string(t));
    }
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t t = 0; t < ref.n_frames(); ++t) {
    const auto& r = ref.f0_sets[t];
    const auto& e = est.f0_sets[t];
    const std::size_t m = match_count(r, e, tolerance_cents);
    tp += m;
    fp += e.size() - m;
    fn += r.size() - m;
  }
  return EvalScores::from_counts(tp, fp, fn, tolerance_cents);
}

ScoreSummary aggregate(std::span<const EvalScores> per_file) {
  if (per_file.empty()) throw Error("aggregate: no scores");
  ScoreSummary s;
  s.n_files = per_file.size();
  s.tolerance_cents = per_file.front().tolerance_cents;
  const auto stats = [&](auto field) {
    double sum = 0.0;
    bool constant = true;
    for (const auto& e : per_file) {
      sum += field(e);
      constant = constant && field(e) == field(per_file.front());
    }
    // Identical scores aggregate exactly.
    if (constant) return MeanStd{field(per_file.front()), 0.0};
    const double mean = sum / static_cast<double>(per_file.size());
    double sq = 0.0;
    for (const auto& e : per_file) sq += (field(e) - mean) * (field(e) - mean);
    return MeanStd{mean, std::sqrt(sq / static_cast<double>(per_file.size()))};
  };
  s.precision = stats([](const EvalScores& e) { return e.precision; });
  s.recall = stats([](const EvalScores& e) { return e.recall; });
  s.f_score = stats([](const EvalScores& e) { return e.f_score; });
  s.accuracy = stats([](const EvalScores& e) { return e.accuracy; });
  return s;
}

nlohmann::json to_json(const EvalScores& s) {
  return {{"precision", s.precision}, {"recall", s.recall},   {"f_score", s.f_score},
          {"accuracy", s.accuracy},   {"tolerance_cents", s.tolerance_cents},
          {"tp", s.tp},               {"fp", s.fp},           {"fn", s.fn}};
}

nlohmann::json to_json(const ScoreSummary& s) {
  const auto ms = [](const MeanStd& m) {
    return nlohmann::json{{"mean", m.mean}, {"std", m.std}};
  };
  return {{"n_files", s.n_files},          {"tolerance_cents", s.tolerance_cents},
          {"precision", ms(s.precision)},  {"recall", ms(s.recall)},
          {"f_score", ms(s.f_score)},      {"accuracy", ms(s.accuracy)}};
}

}  // namespace vocalf0
