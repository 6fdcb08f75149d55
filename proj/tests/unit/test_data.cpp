/*
 * Copyright (c) 2026, The desrec Authors.
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

#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include "desrec/criteo.hpp"
#include "desrec/errors.hpp"
#include "desrec/synthetic.hpp"
#include "desrec/trainer.hpp"

using namespace desrec;

namespace {

std::string criteo_line(const std::string& label, const std::vector<std::string>& ints,
                        const std::vector<std::string>& cats) {
  std::string s = label;
  for (const auto& i : ints) s += "\t" + i;
  for (const auto& c : cats) s += "\t" + c;
  return s;
}

const std::string kFixture = std::string(DESREC_TEST_DATA_DIR) + "/criteo_1000.tsv";

}  // namespace

TEST(ParseCriteo, FullRecord) {
  std::vector<std::string> ints, cats;
  for (int i = 0; i < 13; ++i) ints.push_back(std::to_string(i));
  for (int j = 0; j < 26; ++j) cats.push_back("a" + std::to_string(j));
  const auto r = parse_criteo(criteo_line("1", ints, cats));
  EXPECT_EQ(r.label, 1);
  for (int i = 0; i < 13; ++i) EXPECT_EQ(r.integers[i], i);
  for (int j = 0; j < 26; ++j) EXPECT_EQ(r.categories[j], "a" + std::to_string(j));
}

TEST(ParseCriteo, EmptySlotsAreAbsentAndEmitNoKeys) {
  std::vector<std::string> ints(13, ""), cats(26, "");
  ints[2] = "5";
  cats[7] = "deadbeef";
  const auto r = parse_criteo(criteo_line("0", ints, cats) + "\r");
  EXPECT_FALSE(r.integers[0]);
  EXPECT_EQ(r.integers[2], 5);
  const auto s = featurize(r, 1);
  ASSERT_EQ(s.features.size(), 2u);
  EXPECT_EQ(s.features[0].key.field, 2u);
  EXPECT_EQ(s.features[1].key.field, 13u + 7u);
}

TEST(ParseCriteo, MalformedLinesCarryLineNumber) {
  try {
    parse_criteo("1\t2\t3", 17);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 17u);
  }
  std::vector<std::string> ints(13, "1"), cats(26, "x");
  EXPECT_THROW(parse_criteo(criteo_line("2", ints, cats)), ParseError);
  ints[4] = "1.5";
  EXPECT_THROW(parse_criteo(criteo_line("0", ints, cats)), ParseError);
}

// Histogram of present feature columns per line, produced by
// tests/data/criteo_oracle.py splitting the fixture independently.
TEST(ParseCriteo, FixtureHistogramMatchesScriptedOracle) {
  const std::map<std::size_t, std::size_t> oracle{{24, 1},   {25, 2},   {26, 4},   {27, 12}, {28, 23}, {29, 45},
                                                  {30, 84},  {31, 128}, {32, 180}, {33, 172}, {34, 155},
                                                  {35, 101}, {36, 59},  {37, 24},  {38, 9},  {39, 1}};
  std::ifstream in(kFixture);
  ASSERT_TRUE(in) << kFixture;
  std::map<std::size_t, std::size_t> hist;
  std::size_t positives = 0, lines = 0, negative_lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    const auto r = parse_criteo(line, ++lines);
    std::size_t present = 0;
    bool negative = false;
    for (const auto& i : r.integers) {
      present += i.has_value();
      negative = negative || (i && *i < 0);
    }
    for (const auto& c : r.categories) present += c.has_value();
    ++hist[present];
    positives += r.label;
    negative_lines += negative;
    EXPECT_EQ(featurize(r, 0).features.size(), present);
  }
  EXPECT_EQ(lines, 1000u);
  EXPECT_EQ(positives, 280u);
  EXPECT_EQ(negative_lines, 484u);
  EXPECT_EQ(hist, oracle);
}

TEST(LoadCriteo, PositionalSplitAndFieldRange) {
  const auto split = load_criteo(kFixture, 3, 0, 0.95);
  EXPECT_EQ(split.train.size(), 950u);
  EXPECT_EQ(split.test.size(), 50u);
  for (const auto& s : split.train)
    for (const auto& f : s.features) EXPECT_LT(f.key.field, 39u);
  const auto head = load_criteo(kFixture, 3, 100, 0.5);
  EXPECT_EQ(head.train.size() + head.test.size(), 100u);
  EXPECT_EQ(head.train[0].features.size(), split.train[0].features.size());
}

TEST(Featurize, TransformsAndHashing) {
  std::vector<std::string> ints(13, ""), cats(26, "");
  ints[0] = "0";
  ints[1] = "-3";
  cats[0] = "abc";
  const auto a = featurize(parse_criteo(criteo_line("0", ints, cats)), 9);
  EXPECT_EQ(a.features[0].value, 0.0f);
  EXPECT_EQ(a.features[1].value, 0.0f);
  const auto b = featurize(parse_criteo(criteo_line("1", ints, cats)), 9);
  EXPECT_EQ(a.features[2].key, b.features[2].key);
  EXPECT_NE(a.features[2].key, featurize(parse_criteo(criteo_line("1", ints, cats)), 10).features[2].key);

  CriteoRecord r;
  r.integers[5] = 1;  // log(1 + 1)
  EXPECT_EQ(featurize(r, 0).features[0].value, static_cast<float>(std::log(2.0)));
  // x = e - 1 maps to 1; the integer column cannot hold it, so check the transform directly.
  EXPECT_NEAR(std::log1p(std::exp(1.0) - 1.0), 1.0, 1e-15);
}

TEST(Synthetic, SameSeedSameStream) {
  SyntheticSpec spec;
  spec.max_tokens = 3;
  spec.field_presence = 0.7;
  const auto a = gen_synthetic(spec, 2000, 11), b = gen_synthetic(spec, 2000, 11);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    ASSERT_EQ(a[i].features.size(), b[i].features.size());
    for (std::size_t j = 0; j < a[i].features.size(); ++j) {
      EXPECT_EQ(a[i].features[j].key, b[i].features[j].key);
      EXPECT_EQ(a[i].features[j].value, b[i].features[j].value);
      EXPECT_LT(a[i].features[j].key.field, spec.field_count);
    }
  }
  EXPECT_NE(gen_synthetic(spec, 50, 12)[0].features[0].key, a[0].features[0].key);
}

TEST(Synthetic, LabelMarginalWithinTwoPercent) {
  for (double rate : {0.5, 0.25}) {
    SyntheticSpec spec;
    spec.positive_rate = rate;
    const auto s = gen_synthetic(spec, 50000, 3);
    double pos = 0;
    for (const auto& x : s) pos += x.label;
    EXPECT_NEAR(pos / 50000.0, rate, 0.02) << rate;
  }
}

TEST(Synthetic, InvalidSpecRejected) {
  SyntheticSpec spec;
  spec.noise = 0.5;
  EXPECT_ANY_THROW(spec.validate());
  spec = SyntheticSpec{};
  spec.vocab_per_field = 0;
  EXPECT_ANY_THROW(spec.validate());
}

TEST(Synthetic, NoiselessSeparableIsLearnedByLr) {
  RunConfig cfg;
  cfg.model.kind = ModelKind::kLr;
  cfg.workers = 2;
  cfg.batch = 256;
  cfg.epochs = 10;
  cfg.synthetic.separable = true;
  cfg.synthetic.noise = 0.0;
  cfg.synthetic.vocab_per_field = 100;
  cfg.synthetic_samples = 20000;
  const auto series = train(cfg).metrics;
  EXPECT_GE(series.back().auc, 0.98);
}

TEST(Batching, PreservesSampleOrder) {
  const auto samples = gen_synthetic(SyntheticSpec{}, 1000, 5);
  const auto batches = make_batches(samples, 96);
  ASSERT_EQ(batches.size(), 11u);
  std::size_t i = 0;
  for (const auto& b : batches)
    for (const auto& s : b.samples) {
      EXPECT_EQ(s.features[0].key, samples[i].features[0].key);
      ++i;
    }
  EXPECT_EQ(i, samples.size());
}
