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

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "distill/extraction.hpp"
#include "distill/gateway.hpp"

namespace distill {

inline constexpr int kNoise = -1;

/// 1 - (u.v)/(|u||v|) in double precision, clamped to [0, 2].
/// Throws Error(dimension_mismatch | zero_vector).
double cosine_distance(std::span<const double> u, std::span<const double> v);

struct EmbeddedInstruction {
  std::string instruction_id;
  std::vector<double> vector;  // unit length
  double norm_original = 0;
};

/// Unit-normalizes `raw`. Throws Error(zero_vector).
EmbeddedInstruction make_embedded(std::string instruction_id, std::vector<double> raw);

struct ClusteringParams {
  double epsilon = 0.4;
  size_t min_samples = 6;

  /// Throws Error(invalid_params).
  void validate() const;
};

struct ClusterAssignment {
  std::string instruction_id;
  int cluster_id = kNoise;

  bool is_noise() const { return cluster_id == kNoise; }
  friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;
};

struct Cluster {
  int cluster_id = 0;
  std::vector<std::string> member_ids;  // input order
  std::map<std::string, size_t> label_histogram;
  std::string medoid_id;
};

/// DBSCAN over unit vectors with cosine distance.
///
///  - A point is core when at least min_samples points, itself included,
///    lie within epsilon (distance <= epsilon).
///  - Clusters are connected components of the core-point graph; ids run
///    0..k-1 in order of each component's first core point in input order.
///  - A non-core point within epsilon of some core point is a border point
///    and joins the cluster of the lowest-index such core point.
///  - Everything else is noise.
///
/// Neighborhoods are computed exhaustively (O(n^2) distance evaluations).
std::vector<int> dbscan_labels(std::span<const std::vector<double>> unit_vectors,
                               const ClusteringParams& params);

std::vector<ClusterAssignment> dbscan(std::span<const EmbeddedInstruction> points,
                                      const ClusteringParams& params);

struct ClusteringResult {
  std::vector<Cluster> clusters;
  std::vector<std::string> noise_ids;
  std::vector<ClusterAssignment> assignments;  // one per instruction, input order
};

/// Groups assignments into clusters with label histograms and medoids.
ClusteringResult summarize_clusters(std::span<const MicroInstruction> instructions,
                                    std::span<const EmbeddedInstruction> points,
                                    std::vector<ClusterAssignment> assignments);

/// Embeds each instruction's executable_rule (identical texts are embedded
/// once), normalizes, and runs dbscan. Noise comes back separately.
ClusteringResult cluster_instructions(std::span<const MicroInstruction> instructions,
                                      const BackendConfig& embedder, const ClusteringParams& params,
                                      Gateway& gateway);

}  // namespace distill
