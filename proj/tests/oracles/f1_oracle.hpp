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

// Brute-force macro-F1: tally (gold, predicted) pairs, then for each gold class
// with support compute F1 = 2TP / (2TP + FP + FN). An abstention is the
// empty string and never equals a class.

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace distill::oracle {

inline double macro_f1(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  std::map<std::pair<std::string, std::string>, long> tally;
  std::set<std::string> classes(gold.begin(), gold.end());
  for (size_t i = 0; i < gold.size(); ++i) ++tally[{gold[i], pred[i]}];

  long double total = 0;
  for (const auto& c : classes) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& [key, count] : tally) {
      const bool g = key.first == c, p = key.second == c;
      if (g && p) tp += count;
      if (!g && p) fp += count;
      if (g && !p) fn += count;
    }
    const long denom = 2 * tp + fp + fn;
    total += denom ? static_cast<long double>(2 * tp) / denom : 0.0L;
  }
  return classes.empty() ? 0.0 : static_cast<double>(total / classes.size());
}

}  // namespace distill::oracle
