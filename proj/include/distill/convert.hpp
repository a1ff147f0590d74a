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

#include <cstdint>

#include "distill/corpus.hpp"

namespace distill {

/// Contract-NLI: one example per (document, hypothesis) annotation.
///   example_id  = "<document id>::<hypothesis key>"
///   sentence1   = document text
///   sentence2   = hypothesis text from the top-level "labels" map
///   gold_label  = annotation "choice" (Entailment, Contradiction, NotMentioned)
/// train.json, dev.json and test.json map to train, validation and test.
TaskSchema contract_nli_schema();
Dataset convert_contract_nli(const fs::path& dir);

/// StereoSet intrasentence items: context -> bias_type. The release only has a
/// dev file, so splits are drawn from it by a seeded shuffle: 40% train, 10%
/// validation (both rounded to nearest), remainder test.
TaskSchema stereoset_schema();
Dataset convert_stereoset(const fs::path& dev_json, uint64_t seed = 0);

}  // namespace distill
