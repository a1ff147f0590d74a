/*
 * Copyright 2026 The Distill Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "distill/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>

#include "distill/errors.hpp"

namespace distill {

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw Error(Errc::dimension_mismatch, std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  double dot = 0, uu = 0, vv = 0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0 || vv == 0) throw Error(Errc::zero_vector, "cosine distance of a zero vector");
  return std::clamp(1.0 - dot / (std::sqrt(uu) * std::sqrt(vv)), 0.0, 2.0);
}

EmbeddedInstruction make_embedded(std::string instruction_id, std::vector<double> raw) {
  double sq = 0;
  for (double x : raw) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0) || !std::isfinite(norm)) throw Error(Errc::zero_vector, instruction_id);
  for (auto& x : raw) x /= norm;
  return {std::move(instruction_id), std::move(raw), norm};
}

void ClusteringParams::validate() const {
  if (!(epsilon > 0) || !(epsilon < 2)) throw Error(Errc::invalid_params, "epsilon must be in (0, 2)");
  if (min_samples < 1) throw Error(Errc::invalid_params, "min_samples must be >= 1");
}

namespace {

// For unit vectors cosine distance is 1 - u.v (= |u - v|^2 / 2).
double unit_distance(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0;
  for (size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  return std::clamp(1.0 - dot, 0.0, 2.0);
}

}  // namespace

std::vector<int> dbscan_labels(std::span<const std::vector<double>> pts, const ClusteringParams& params) {
  params.validate();
  const size_t n = pts.size();
  for (const auto& p : pts)
    if (p.size() != pts.front().size())
      throw Error(Errc::dimension_mismatch, std::to_string(pts.front().size()) + " vs " + std::to_string(p.size()));

  std::vector<std::vector<size_t>> neighbors(n);
  for (size_t i = 0; i < n; ++i) {
    neighbors[i].push_back(i);
    for (size_t j = i + 1; j < n; ++j) {
      if (unit_distance(pts[i], pts[j]) <= params.epsilon) {
        neighbors[i].push_back(j);
        neighbors[j].push_back(i);
      }
    }
  }
  std::vector<bool> core(n);
  for (size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() >= params.min_samples;

  constexpr int kUnset = std::numeric_limits<int>::min();
  std::vector<int> label(n, kUnset);
  int next_id = 0;
  std::deque<size_t> queue;
  for (size_t i = 0; i < n; ++i) {
    if (!core[i] || label[i] != kUnset) continue;
    const int id = next_id++;
    label[i] = id;
    queue.push_back(i);
    while (!queue.empty()) {
      size_t p = queue.front();
      queue.pop_front();
      for (size_t q : neighbors[p]) {
        if (core[q] && label[q] == kUnset) {
          label[q] = id;
          queue.push_back(q);
        }
      }
    }
  }

  for (size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    size_t best = n;
    for (size_t q : neighbors[i])
      if (core[q]) best = std::min(best, q);
    label[i] = best == n ? kNoise : label[best];
  }
  return label;
}

std::vector<ClusterAssignment> dbscan(std::span<const EmbeddedInstruction> points,
                                      const ClusteringParams& params) {
  std::vector<std::vector<double>> vectors;
  vectors.reserve(points.size());
  for (const auto& p : points) vectors.push_back(p.vector);
  auto labels = dbscan_labels(vectors, params);
  std::vector<ClusterAssignment> out;
  out.reserve(points.size());
  for (size_t i = 0; i < points.size(); ++i) out.push_back({points[i].instruction_id, labels[i]});
  return out;
}

ClusteringResult summarize_clusters(std::span<const MicroInstruction> instructions,
                                    std::span<const EmbeddedInstruction> points,
                                    std::vector<ClusterAssignment> assignments) {
  ClusteringResult result;
  std::map<int, std::vector<size_t>> members;
  for (size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i].is_noise())
      result.noise_ids.push_back(assignments[i].instruction_id);
    else
      members[assignments[i].cluster_id].push_back(i);
  }
  for (const auto& [id, idx] : members) {
    Cluster c;
    c.cluster_id = id;
    double best = std::numeric_limits<double>::infinity();
    for (size_t i : idx) {
      c.member_ids.push_back(instructions[i].instruction_id);
      ++c.label_histogram[instructions[i].gold_label];
      double total = 0;
      for (size_t j : idx) total += unit_distance(points[i].vector, points[j].vector);
      if (total < best) {
        best = total;
        c.medoid_id = instructions[i].instruction_id;
      }
    }
    result.clusters.push_back(std::move(c));
  }
  result.assignments = std::move(assignments);
  return result;
}

ClusteringResult cluster_instructions(std::span<const MicroInstruction> instructions,
                                      const BackendConfig& embedder, const ClusteringParams& params,
                                      Gateway& gateway) {
  if (instructions.empty()) throw Error(Errc::invalid_params, "no instructions to cluster");
  params.validate();

  std::vector<std::string> unique_texts;
  std::unordered_map<std::string, size_t> text_index;
  std::vector<size_t> slot(instructions.size());
  for (size_t i = 0; i < instructions.size(); ++i) {
    auto [it, inserted] = text_index.try_emplace(instructions[i].executable_rule, unique_texts.size());
    if (inserted) unique_texts.push_back(instructions[i].executable_rule);
    slot[i] = it->second;
  }

  auto vectors = gateway.embed_batch(unique_texts, embedder);
  std::vector<EmbeddedInstruction> points;
  points.reserve(instructions.size());
  for (size_t i = 0; i < instructions.size(); ++i)
    points.push_back(make_embedded(instructions[i].instruction_id, vectors[slot[i]].values));

  return summarize_clusters(instructions, points, dbscan(points, params));
}

}  // namespace distill
