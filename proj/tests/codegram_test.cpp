// Copyright 2026 The maskgrid Authors
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

#include <cstdio>
#include <filesystem>

#include <gtest/gtest.h>

#include "maskgrid/binary_io.hpp"
#include "maskgrid/codegram.hpp"
#include "test_support.hpp"

namespace maskgrid {
namespace {

using testing::random_codegram;
using testing::random_mask;

TEST(CodebookSpec, DefaultsMatchCodecAndValidate) {
  CodebookSpec s;
  EXPECT_EQ(s.levels, 9);
  EXPECT_EQ(s.vocab_size, 1024);
  EXPECT_EQ(s.mask_token(), 1024);
  EXPECT_NO_THROW(s.validate());
  EXPECT_THROW((CodebookSpec{0, 4, 1, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((CodebookSpec{1, 1, 1, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((CodebookSpec{1, 4, 0, 1.0}.validate()), InvalidArgument);
}

TEST(Codegram, RejectsOutOfRangeTokensAndBadShapes) {
  const CodebookSpec s{2, 4, 2, 1.0};
  EXPECT_THROW(Codegram(s, 1, {0, 4}), TokenRangeError);
  EXPECT_THROW(Codegram(s, 1, {-1, 0}), TokenRangeError);
  EXPECT_THROW(Codegram(s, 2, {0, 1}), ShapeError);
  EXPECT_THROW(Codegram(s, 0, {}), InvalidArgument);
}

TEST(EmbedSum, SingleLevelFullyMaskedIsMaskRow) {
  const CodebookSpec s{1, 5, 3, 1.0};
  Rng rng(1);
  const auto table = EmbeddingTable::random(s, 0, rng);
  const Codegram cg = random_codegram(s, 4, rng);
  const Mat out = embed_sum(cg, MaskTensor(4, 1, true), table);
  for (int l = 0; l < 4; ++l) EXPECT_TRUE(out.row(l) == table.mask_rows.row(0));
}

TEST(EmbedSum, OneHotTablesSumBasisVectors) {
  const CodebookSpec s{2, 3, 6, 1.0};
  Rng rng(1);
  auto table = EmbeddingTable::random(s, 0, rng);
  for (int k = 0; k < 2; ++k) {
    table.levels[k].setZero();
    for (int d = 0; d < 3; ++d) table.levels[k](d, 3 * k + d) = 1.0;
  }
  const Codegram cg(s, 2, {0, 2, 1, 1});
  const Mat out = embed_sum(cg, MaskTensor(2, 2, false), table);
  Mat expected = Mat::Zero(2, 6);
  expected(0, 0) = expected(0, 5) = 1.0;
  expected(1, 1) = expected(1, 4) = 1.0;
  EXPECT_TRUE(out == expected);
}

TEST(EmbedSum, MatchesPositionLoopOracle) {
  const CodebookSpec s{9, 16, 5, 1.0};
  Rng rng(7);
  const auto table = EmbeddingTable::random(s, 2, rng);
  const Codegram cg = random_codegram(s, 4, rng);
  const MaskTensor m = random_mask(4, 9, rng, 0.3);
  const Mat out = embed_sum(cg, m, table);
  for (int l = 0; l < 4; ++l) {
    for (int e = 0; e < 5; ++e) {
      double acc = 0.0;
      for (int k = 0; k < 9; ++k) acc += m.at(l, k) ? table.mask_rows(k, e) : table.levels[k](cg.at(l, k), e);
      EXPECT_NEAR(out(l, e), acc, 1e-14);
    }
  }
}

TEST(EmbedSum, LinearInTables) {
  const CodebookSpec s{3, 6, 4, 1.0};
  Rng rng(3);
  auto table = EmbeddingTable::random(s, 0, rng);
  const Codegram cg = random_codegram(s, 5, rng);
  const MaskTensor m = random_mask(5, 3, rng);
  const Mat base = embed_sum(cg, m, table);
  for (auto& t : table.levels) t *= 2.5;
  table.mask_rows *= 2.5;
  EXPECT_LT((embed_sum(cg, m, table) - 2.5 * base).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EmbedSum, FullyMaskedIgnoresTokens) {
  const CodebookSpec s{3, 6, 4, 1.0};
  Rng rng(3);
  const auto table = EmbeddingTable::random(s, 0, rng);
  const MaskTensor all(5, 3, true);
  EXPECT_TRUE(embed_sum(random_codegram(s, 5, rng), all, table) ==
              embed_sum(random_codegram(s, 5, rng), all, table));
}

TEST(EmbedSum, ShapeMismatchNamesDimension) {
  const CodebookSpec s{3, 6, 4, 1.0};
  Rng rng(3);
  const auto table = EmbeddingTable::random(s, 0, rng);
  try {
    embed_sum(random_codegram(s, 5, rng), MaskTensor(4, 3), table);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("length"), std::string::npos) << e.what();
  }
}

TEST(ApplyMask, IdentityAllSentinelAndOracle) {
  const CodebookSpec s{4, 8, 2, 1.0};
  Rng rng(5);
  const Codegram cg = random_codegram(s, 6, rng);
  const auto none = apply_mask(cg, MaskTensor(6, 4, false));
  EXPECT_TRUE(std::equal(none.tokens.begin(), none.tokens.end(), cg.tokens().begin()));
  const auto all = apply_mask(cg, MaskTensor(6, 4, true));
  for (auto t : all.tokens) EXPECT_EQ(t, 8);
  const MaskTensor m = random_mask(6, 4, rng);
  const auto part = apply_mask(cg, m);
  for (int l = 0; l < 6; ++l)
    for (int k = 0; k < 4; ++k) EXPECT_EQ(part.at(l, k), m.at(l, k) ? 8 : cg.at(l, k));
  EXPECT_TRUE(unmask_with(part, cg) == cg);
  EXPECT_THROW(apply_mask(cg, MaskTensor(5, 4)), ShapeError);
}

TEST(CodegramFile, RoundTripIsBitExact) {
  const CodebookSpec s{9, 1024, 8, 86.1};
  Rng rng(9);
  const Codegram cg = random_codegram(s, 17, rng);
  const std::string bytes = encode_codegram(cg);
  const Codegram back = decode_codegram(bytes);
  EXPECT_TRUE(back == cg);
  EXPECT_EQ(back.spec().frame_rate, 86.1);
  EXPECT_EQ(encode_codegram(back), bytes);

  const auto path = (std::filesystem::temp_directory_path() / "maskgrid_rt.codegram").string();
  save_codegram(path, cg);
  EXPECT_TRUE(load_codegram(path) == cg);
  std::filesystem::remove(path);
}

TEST(CodegramFile, DistinctErrors) {
  const CodebookSpec s{2, 4, 2, 1.0};
  const std::string good = encode_codegram(Codegram(s, 2, {0, 1, 2, 3}));
  EXPECT_THROW(decode_codegram(""), TruncatedPayloadError);
  EXPECT_THROW(decode_codegram(good.substr(0, good.size() - 2)), TruncatedPayloadError);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_codegram(bad_magic), CorruptHeaderError);
  EXPECT_THROW(decode_codegram(good + "x"), CorruptHeaderError);

  // Last token := D.
  std::string bad_token = good;
  bad_token.replace(bad_token.size() - 4, 4, std::string("\x04\x00\x00\x00", 4));
  EXPECT_THROW(decode_codegram(bad_token), TokenRangeError);
  EXPECT_THROW(load_codegram("/nonexistent/dir/file.codegram"), IoError);
}

TEST(CodegramFile, TextDumpHasOneRowPerStep) {
  const CodebookSpec s{3, 10, 2, 1.0};
  const std::string text = codegram_to_text(Codegram(s, 2, {1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(text, "1 2 3\n4 5 6\n");
}

}  // namespace
}  // namespace maskgrid
