#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pbp/position.hpp"

using namespace pbp;

namespace {

// Independent enumeration of the id rule, used as the oracle.
std::vector<int> brute_ids(int n, int a, int b) {
  std::vector<int> ids;
  for (int j = 0; j < n; ++j) {
    if (j < a) {
      ids.push_back(j - a);
    } else if (j <= b) {
      ids.push_back(0);
    } else {
      ids.push_back(j - b);
    }
  }
  return ids;
}

}  // namespace

TEST_CASE("mask_relative_ids reproduces the three-mask enumerated example") {
  const std::vector<MaskSpan> spans{{0, 0}, {3, 3}, {6, 6}};
  CHECK(mask_relative_ids(7, spans, 0).ids ==
        std::vector<int>{0, 1, 2, 3, 4, 5, 6});
  CHECK(mask_relative_ids(7, spans, 1).ids ==
        std::vector<int>{-3, -2, -1, 0, 1, 2, 3});
  CHECK(mask_relative_ids(7, spans, 2).ids ==
        std::vector<int>{-6, -5, -4, -3, -2, -1, 0});
}

TEST_CASE("mask_relative_ids single-token and multi-token cases") {
  CHECK(mask_relative_ids(1, {{0, 0}}, 0).ids == std::vector<int>{0});
  CHECK(mask_relative_ids(6, {{2, 3}}, 0).ids ==
        std::vector<int>{-2, -1, 0, 0, 1, 2});
}

TEST_CASE("mask_relative_ids matches enumeration for all single spans n<=32") {
  for (int n = 1; n <= 32; ++n) {
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) {
        const auto seq = mask_relative_ids(n, {{a, b}}, 0);
        CHECK(seq.ids == brute_ids(n, a, b));
      }
    }
  }
}

TEST_CASE("invalid anchor index is a hard error") {
  CHECK_THROWS_AS(mask_relative_ids(5, {{1, 1}}, 1), std::out_of_range);
  CHECK_THROWS_AS(mask_relative_ids(5, {{1, 1}}, -1), std::out_of_range);
}

TEST_CASE("anchor span zeros count equals span length") {
  Rng rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(1, 40);
    const int a = rng.uniform_int(0, n - 1);
    const int b = rng.uniform_int(a, std::min(n - 1, a + 4));
    const auto seq = mask_relative_ids(n, {{a, b}}, 0);
    int zeros = 0;
    for (std::size_t j = 0; j < seq.ids.size(); ++j)
      if (seq.ids[j] == 0) {
        CHECK(static_cast<int>(j) >= a);
        CHECK(static_cast<int>(j) <= b);
        ++zeros;
      }
    CHECK(zeros == b - a + 1);
  }
}

TEST_CASE("shift covariance for single-token anchors") {
  for (int n = 1; n <= 20; ++n) {
    for (int i = 0; i < n; ++i) {
      const auto seq = mask_relative_ids(n, {{i, i}}, 0);
      for (int j = 0; j < n; ++j)
        CHECK(seq.ids[static_cast<std::size_t>(j)] == j - i);
    }
  }
}

TEST_CASE("all_mask_position_sequences: one per span, in span order") {
  PromptInstance p;
  p.tokens = {kMaskToken, "x", "x", kMaskToken, "x", "x", kMaskToken};
  p.mask_spans = {{0, 0}, {3, 3}, {6, 6}};
  p.prompt_type = PromptType::mixed;
  const auto seqs = all_mask_position_sequences(p);
  REQUIRE(seqs.size() == 3);
  CHECK(seqs[0].ids == std::vector<int>{0, 1, 2, 3, 4, 5, 6});
  CHECK(seqs[1].ids == std::vector<int>{-3, -2, -1, 0, 1, 2, 3});
  CHECK(seqs[2].ids == std::vector<int>{-6, -5, -4, -3, -2, -1, 0});

  PromptInstance single;
  single.tokens = {"x", kMaskToken, "x"};
  single.mask_spans = {{1, 1}};
  const auto one = all_mask_position_sequences(single);
  REQUIRE(one.size() == 1);
  CHECK(one[0].ids == mask_relative_ids(3, single.mask_spans, 0).ids);

  PromptInstance two;
  two.tokens = {kMaskToken, "x", "x", kMaskToken};
  two.mask_spans = {{0, 0}, {3, 3}};
  const auto pair = all_mask_position_sequences(two);
  REQUIRE(pair.size() == 2);
  // Distinct zero positions.
  CHECK(pair[0].ids[0] == 0);
  CHECK(pair[1].ids[3] == 0);
  CHECK(pair[0].ids[3] != 0);
  CHECK(pair[1].ids[0] != 0);

  PromptInstance blank;
  blank.tokens = {"x", "y"};
  CHECK_THROWS_AS(all_mask_position_sequences(blank), std::invalid_argument);
}

TEST_CASE("embedding lookup index map is the stated bijection") {
  PositionEmbeddingTable table(8, 4);
  CHECK(table.row_index(0) == 8);
  CHECK(table.row_index(-8) == 0);
  CHECK(table.row_index(7) == 15);
  CHECK_THROWS_AS(table.row_index(8), std::out_of_range);
  CHECK_THROWS_AS(table.row_index(-9), std::out_of_range);

  std::set<int> rows;
  for (int id = -8; id <= 7; ++id) rows.insert(table.row_index(id));
  CHECK(rows.size() == 16);
  CHECK(*rows.begin() == 0);
  CHECK(*rows.rbegin() == 15);
}

TEST_CASE("lookup_embeddings selects the mapped rows") {
  PositionEmbeddingTable table(4, 3);
  for (Eigen::Index r = 0; r < table.matrix.rows(); ++r)
    table.matrix.row(r).setConstant(static_cast<double>(r));
  PositionIdSequence seq;
  seq.ids = {-4, 0, 3};
  const auto P = lookup_embeddings(table, seq);
  CHECK(P(0, 0) == doctest::Approx(0.0));
  CHECK(P(1, 0) == doctest::Approx(4.0));
  CHECK(P(2, 0) == doctest::Approx(7.0));
}

TEST_CASE("random valid sequences always stay in table range") {
  PositionEmbeddingTable table(48, 2);
  Rng rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.uniform_int(1, 48);
    const int a = rng.uniform_int(0, n - 1);
    const int b = rng.uniform_int(a, n - 1);
    const auto seq = mask_relative_ids(n, {{a, b}}, 0);
    CHECK_NOTHROW(lookup_embeddings(table, seq));
  }
}
