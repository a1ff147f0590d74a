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

#include "distill/convert.hpp"

#include <algorithm>
#include <cmath>

#include "distill/digest.hpp"
#include "distill/errors.hpp"
#include "distill/random.hpp"

namespace distill {

TaskSchema contract_nli_schema() {
  TaskSchema s;
  s.task_id = "contract_nli";
  s.input_fields = {"sentence1", "sentence2"};
  s.label_set = {"Entailment", "Contradiction", "NotMentioned"};
  s.prompt_template_ids = {{"extract", "extract_contract_nli.v1"}};
  return s;
}

TaskSchema stereoset_schema() {
  TaskSchema s;
  s.task_id = "stereoset";
  s.input_fields = {"context"};
  s.label_set = {"gender", "profession", "race", "religion"};
  s.label_field = "bias_type";
  s.prompt_template_ids = {{"extract", "extract_stereoset.v1"}};
  return s;
}

namespace {

json parse_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_record, path.string() + ": " + e.what());
  }
}

std::string id_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

// nda-2 sorts before nda-10.
bool hypothesis_less(const std::string& a, const std::string& b) {
  auto num = [](const std::string& s) {
    auto pos = s.find_last_of('-');
    try {
      return pos == std::string::npos ? -1L : std::stol(s.substr(pos + 1));
    } catch (...) {
      return -1L;
    }
  };
  const long na = num(a), nb = num(b);
  return na != nb ? na < nb : a < b;
}

void finish(Dataset& ds) {
  // Round-trip through the loader so converted data obeys the same checks.
  const std::string text = serialize_dataset(ds);
  Dataset checked = parse_dataset(text, ds.schema);
  ds.examples = std::move(checked.examples);
  ds.source_digest = sha256_hex(text);
}

}  // namespace

Dataset convert_contract_nli(const fs::path& dir) {
  Dataset ds;
  ds.schema = contract_nli_schema();
  const std::pair<const char*, Split> files[] = {
      {"train.json", Split::train}, {"dev.json", Split::validation}, {"test.json", Split::test}};
  for (const auto& [name, split] : files) {
    const json doc = parse_file(dir / name);
    try {
      const json& labels = doc.at("labels");
      for (const auto& d : doc.at("documents")) {
        const std::string doc_id = id_string(d.at("id"));
        const auto& annotations = d.at("annotation_sets").at(0).at("annotations");
        std::vector<std::string> keys;
        for (const auto& [k, _] : annotations.items()) keys.push_back(k);
        std::sort(keys.begin(), keys.end(), hypothesis_less);
        for (const auto& k : keys) {
          LabeledExample ex;
          ex.example_id = doc_id + "::" + k;
          ex.inputs["sentence1"] = d.at("text").get<std::string>();
          ex.inputs["sentence2"] = labels.at(k).at("hypothesis").get<std::string>();
          ex.gold_label = annotations.at(k).at("choice").get<std::string>();
          ex.split = split;
          ds.examples.push_back(std::move(ex));
        }
      }
    } catch (const json::exception& e) {
      throw Error(Errc::malformed_record, (dir / name).string() + ": " + e.what());
    }
  }
  finish(ds);
  return ds;
}

Dataset convert_stereoset(const fs::path& dev_json, uint64_t seed) {
  Dataset ds;
  ds.schema = stereoset_schema();
  const json doc = parse_file(dev_json);
  try {
    for (const auto& item : doc.at("data").at("intrasentence")) {
      LabeledExample ex;
      ex.example_id = id_string(item.at("id"));
      ex.inputs["context"] = item.at("context").get<std::string>();
      ex.gold_label = item.at("bias_type").get<std::string>();
      ds.examples.push_back(std::move(ex));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_record, dev_json.string() + ": " + e.what());
  }

  const size_t n = ds.examples.size();
  const auto n_train = static_cast<size_t>(std::llround(0.4 * static_cast<double>(n)));
  const auto n_val = static_cast<size_t>(std::llround(0.1 * static_cast<double>(n)));
  const auto order = sample_indices(n, n, mix_seed(seed, 0x73746572ULL));
  for (size_t rank = 0; rank < n; ++rank) {
    ds.examples[order[rank]].split =
        rank < n_train ? Split::train : (rank < n_train + n_val ? Split::validation : Split::test);
  }
  finish(ds);
  return ds;
}

}  // namespace distill
