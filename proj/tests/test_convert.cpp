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

#include <gtest/gtest.h>

#include <cstdlib>

#include "distill/convert.hpp"
#include "distill/errors.hpp"
#include "distill/io.hpp"
#include "support/support.hpp"

using namespace distill;
using distill::testing::source_dir;

namespace {

fs::path fixture(const std::string& rel) { return source_dir() / "tests/fixtures" / rel; }

std::vector<std::string> ids_in(const Dataset& ds, Split split) {
  std::vector<std::string> out;
  for (const auto& ex : ds.examples)
    if (ex.split == split) out.push_back(ex.example_id);
  return out;
}

}  // namespace

TEST(ConvertContractNli, OneExamplePerAnnotation) {
  const auto ds = convert_contract_nli(fixture("contract_nli"));
  EXPECT_EQ(ids_in(ds, Split::train), (std::vector<std::string>{"11::nda-1", "11::nda-2", "11::nda-10", "12::nda-1",
                                                                 "12::nda-2"}));
  EXPECT_EQ(ids_in(ds, Split::validation), (std::vector<std::string>{"21::nda-1", "21::nda-10"}));
  EXPECT_EQ(ids_in(ds, Split::test).size(), 3u);

  const auto& ex = ds.examples[2];
  EXPECT_EQ(ex.gold_label, "Entailment");
  EXPECT_EQ(ex.inputs.at("sentence1").substr(0, 24), "The Recipient shall retu");
  EXPECT_EQ(ex.inputs.at("sentence2").substr(0, 33), "Receiving Party may retain some C");
  EXPECT_EQ(ds.schema, contract_nli_schema());
  EXPECT_EQ(ds.source_digest.size(), 64u);
}

TEST(ConvertContractNli, RoundTripsThroughLoader) {
  const auto ds = convert_contract_nli(fixture("contract_nli"));
  const auto back = parse_dataset(serialize_dataset(ds), ds.schema);
  EXPECT_EQ(back.examples, ds.examples);
}

TEST(ConvertContractNli, MissingFileIsAnError) {
  distill::testing::TempDir dir;
  EXPECT_THROW(convert_contract_nli(dir.path()), Error);
}

TEST(ConvertStereoSet, SeededSplit) {
  const auto ds = convert_stereoset(fixture("stereoset/dev.json"), 0);
  ASSERT_EQ(ds.examples.size(), 20u);
  EXPECT_EQ(ids_in(ds, Split::train).size(), 8u);
  EXPECT_EQ(ids_in(ds, Split::validation).size(), 2u);
  EXPECT_EQ(ids_in(ds, Split::test).size(), 10u);
  EXPECT_EQ(ds.examples.front().inputs.at("context"), "The nurse said BLANK would be late.");
  EXPECT_EQ(ds.examples.front().gold_label, "gender");

  const auto again = convert_stereoset(fixture("stereoset/dev.json"), 0);
  EXPECT_EQ(again.examples, ds.examples);
  EXPECT_EQ(again.source_digest, ds.source_digest);
  const auto other = convert_stereoset(fixture("stereoset/dev.json"), 1);
  EXPECT_NE(ids_in(other, Split::train), ids_in(ds, Split::train));
}

TEST(ConvertStereoSet, RejectsUnknownBiasType) {
  distill::testing::TempDir dir;
  write_file_atomic(dir.path() / "dev.json",
                    R"({"data":{"intrasentence":[{"id":"a","context":"x","bias_type":"age","sentences":[]}]}})");
  try {
    convert_stereoset(dir.path() / "dev.json");
    FAIL() << "expected UnknownLabel";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_label);
  }
}

TEST(ConvertCli, WritesLoadableDataset) {
  distill::testing::TempDir dir;
  const auto out = dir.path() / "stereoset.jsonl";
  const auto schema_out = dir.path() / "schema.json";
  const std::string cmd = std::string(DISTILL_CLI_PATH) + " convert --format stereoset --input " +
                          fixture("stereoset/dev.json").string() + " --output " + out.string() + " --schema-out " +
                          schema_out.string() + " > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  TaskSchema schema = json::parse(read_file(schema_out)).get<TaskSchema>();
  EXPECT_EQ(schema, stereoset_schema());
  const auto loaded = load_dataset(out, schema);
  EXPECT_EQ(loaded.examples, convert_stereoset(fixture("stereoset/dev.json"), 0).examples);
}
