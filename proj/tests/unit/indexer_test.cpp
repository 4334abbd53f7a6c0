// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "irr/error.hpp"
#include "irr/indexer.hpp"
#include "test_util.hpp"

namespace irr::index {
namespace {

using irr::testing::random_matrix;

TEST(KMeans, HandExecutedLloydOnLine) {
  const auto points = DenseMatrix::from_rows({{0}, {1}, {10}, {11}});
  const auto seeds = DenseMatrix::from_rows({{0}, {10}});
  const auto r = lloyd(points, seeds, 10);
  EXPECT_DOUBLE_EQ(r.centroids(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(r.centroids(1, 0), 10.5);
  EXPECT_EQ(r.assignments, (std::vector<std::size_t>{0, 0, 1, 1}));
  EXPECT_TRUE(r.converged);
}

TEST(KMeans, EachPointOwnCentroidWhenNEqualsK) {
  std::mt19937_64 rng(3);
  const auto points = random_matrix(6, 3, rng);
  const auto r = kmeans(points, 6, 20, 11);
  EXPECT_EQ(within_cluster_sum_of_squares(points, r.centroids, r.assignments), 0.0);
  std::set<std::size_t> used(r.assignments.begin(), r.assignments.end());
  EXPECT_EQ(used.size(), 6u);
}

TEST(KMeans, WcssNonIncreasingAcrossIterations) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto points = random_matrix(200, 4, rng);
    const auto r = kmeans(points, 8, 100, seed);
    ASSERT_GE(r.wcss_history.size(), 2u);
    for (std::size_t i = 1; i < r.wcss_history.size(); ++i) {
      EXPECT_LE(r.wcss_history[i], r.wcss_history[i - 1] + 1e-9) << "seed " << seed << " iter " << i;
    }
    for (double w : r.wcss_history) EXPECT_LE(r.wcss_history.back(), w + 1e-9);
  }
}

TEST(KMeans, Errors) {
  const auto points = DenseMatrix::from_rows({{0}, {1}});
  EXPECT_THROW(kmeans(points, 3, 10, 0), ConfigError);
  EXPECT_THROW(kmeans(points, 0, 10, 0), ConfigError);
  EXPECT_THROW(lloyd(points, DenseMatrix::from_rows({{0}}), 0), ConfigError);
  auto bad = points;
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(kmeans(bad, 1, 10, 0), DataError);
}

TEST(KMeans, TiesGoToLowestIndex) {
  // 5 is equidistant from both seeds
  const auto seeds = DenseMatrix::from_rows({{4}, {6}});
  const auto r = lloyd(DenseMatrix::from_rows({{5}, {1}, {9}}), seeds, 1);
  EXPECT_EQ(r.assignments, (std::vector<std::size_t>{0, 0, 1}));
}

TEST(KMeans, DistinctCentroidsAfterTraining) {
  std::mt19937_64 rng(9);
  const auto points = random_matrix(300, 5, rng);
  const auto r = kmeans(points, 16, 50, 1);
  for (std::size_t a = 0; a < 16; ++a) {
    for (std::size_t b = a + 1; b < 16; ++b) {
      double d = 0.0;
      for (std::size_t p = 0; p < 5; ++p) d += std::abs(r.centroids(a, p) - r.centroids(b, p));
      EXPECT_GT(d, 1e-9);
    }
  }
}

TEST(KMeans, Deterministic) {
  std::mt19937_64 rng(4);
  const auto points = random_matrix(120, 3, rng);
  const auto a = kmeans(points, 5, 30, 77);
  const auto b = kmeans(points, 5, 30, 77);
  EXPECT_TRUE(irr::testing::bit_identical(a.centroids, b.centroids));
  EXPECT_EQ(a.assignments, b.assignments);
}

TEST(ResidualQuantize, DegenerateCloud) {
  DenseMatrix points(20, 3, 1.5);
  ResidualOptions opts;
  opts.levels = 3;
  opts.codebook_size = 4;
  const auto rq = residual_quantize(points, opts);
  for (std::size_t i = 1; i < rq.codes.size(); ++i) EXPECT_EQ(rq.codes[i], rq.codes[0]);
  EXPECT_NEAR(rq.mean_residual_norm[1], 0.0, 1e-12);
}

TEST(ResidualQuantize, SeparatedClustersSplitAtLevelOne) {
  std::mt19937_64 rng(1);
  DenseMatrix points(40, 2);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (std::size_t i = 0; i < 40; ++i) {
    const double cx = i < 20 ? -10.0 : 10.0;
    points(i, 0) = cx + noise(rng);
    points(i, 1) = noise(rng);
  }
  ResidualOptions opts;
  opts.levels = 2;
  opts.codebook_size = 2;
  const auto rq = residual_quantize(points, opts);
  for (std::size_t i = 1; i < 20; ++i) EXPECT_EQ(rq.codes[i][0], rq.codes[0][0]);
  for (std::size_t i = 21; i < 40; ++i) EXPECT_EQ(rq.codes[i][0], rq.codes[20][0]);
  EXPECT_NE(rq.codes[0][0], rq.codes[20][0]);
  EXPECT_LT(rq.mean_residual_norm[2], rq.mean_residual_norm[1]);
}

TEST(ResidualQuantize, MeanResidualNormNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto points = random_matrix(500, 16, rng);
    for (std::size_t depth : {0u, 4u}) {
      ResidualOptions opts;
      opts.levels = 3;
      opts.codebook_size = 8;
      opts.seed = seed;
      opts.capacity_depth = depth;
      const auto rq = residual_quantize(points, opts);
      ASSERT_EQ(rq.mean_residual_norm.size(), 4u);
      for (std::size_t l = 1; l < 4; ++l) {
        EXPECT_LE(rq.mean_residual_norm[l], rq.mean_residual_norm[l - 1]) << "level " << l;
      }
    }
  }
}

TEST(ResidualQuantize, CapacityKeepsPrefixGroupsWithinK) {
  std::mt19937_64 rng(5);
  const auto points = random_matrix(500, 16, rng);
  ResidualOptions opts;
  opts.levels = 2;
  opts.codebook_size = 8;
  opts.capacity_depth = 3;
  const auto rq = residual_quantize(points, opts);
  std::map<std::vector<std::uint32_t>, int> groups;
  std::map<std::uint32_t, int> first;
  for (const auto& c : rq.codes) {
    ++groups[c];
    ++first[c[0]];
  }
  for (const auto& [code, n] : groups) EXPECT_LE(n, 8);
  for (const auto& [code, n] : first) EXPECT_LE(n, 64);
  EXPECT_THROW(residual_quantize(random_matrix(600, 4, rng), opts), CapacityError);
}

TEST(Dedup, DefaultsToIndexZeroAndNumbersCollisions) {
  const std::vector<std::string> ids{"C", "B", "A"};
  const std::vector<std::vector<std::uint32_t>> codes{{4, 5, 6}, {1, 2, 3}, {1, 2, 3}};
  const auto table = assign_dedup_level(ids, codes, 8);
  EXPECT_EQ(table.at("A").codes, (std::vector<std::uint32_t>{1, 2, 3, 0}));
  EXPECT_EQ(table.at("B").codes, (std::vector<std::uint32_t>{1, 2, 3, 1}));
  EXPECT_EQ(table.at("C").codes, (std::vector<std::uint32_t>{4, 5, 6, 0}));
  EXPECT_EQ(table.levels(), 4u);
}

TEST(Dedup, AllUniquePrefixesGetZero) {
  std::vector<std::string> ids;
  std::vector<std::vector<std::uint32_t>> codes;
  for (std::uint32_t i = 0; i < 20; ++i) {
    ids.push_back("item" + std::to_string(i));
    codes.push_back({i % 5, i / 5});
  }
  const auto table = assign_dedup_level(ids, codes, 8);
  for (const auto& [id, code] : table.entries()) EXPECT_EQ(code.codes.back(), 0u);
}

TEST(Dedup, OverflowIsCapacityError) {
  std::vector<std::string> ids;
  std::vector<std::vector<std::uint32_t>> codes;
  for (int i = 0; i < 5; ++i) {
    ids.push_back("i" + std::to_string(i));
    codes.push_back({3, 3});
  }
  EXPECT_NO_THROW(assign_dedup_level(std::span(ids).first(4), {codes.begin(), codes.begin() + 4}, 4));
  try {
    assign_dedup_level(ids, codes, 4);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("3,3"), std::string::npos);
  }
}

TEST(Dedup, GroupsAreGapFreeOnRealIndex) {
  std::mt19937_64 rng(8);
  ContentEmbeddings emb;
  emb.matrix = random_matrix(500, 16, rng);
  for (int i = 0; i < 500; ++i) emb.item_ids.push_back("item" + std::to_string(i));
  IndexerConfig cfg;
  cfg.levels = 3;
  cfg.codebook_size = 8;
  const auto table = build_sid_table(emb, cfg);
  EXPECT_EQ(table.size(), 500u);
  std::map<std::vector<std::uint32_t>, std::set<std::uint32_t>> groups;
  std::set<SidCode> unique;
  for (const auto& [id, code] : table.entries()) {
    groups[{code.codes.begin(), code.codes.end() - 1}].insert(code.codes.back());
    unique.insert(code);
  }
  EXPECT_EQ(unique.size(), 500u);
  for (const auto& [prefix, slots] : groups) {
    EXPECT_EQ(*slots.rbegin(), slots.size() - 1);
  }
  EXPECT_EQ(build_sid_table(emb, cfg), table);
}

TEST(Dedup, UnbalancedCollisionOverflowIsReported) {
  std::mt19937_64 rng(8);
  ContentEmbeddings emb;
  emb.matrix = random_matrix(500, 16, rng);
  for (int i = 0; i < 500; ++i) emb.item_ids.push_back("item" + std::to_string(i));
  IndexerConfig cfg;
  cfg.levels = 3;
  cfg.codebook_size = 8;
  cfg.balanced = false;
  EXPECT_THROW(build_sid_table(emb, cfg), CapacityError);
}

SidTable sample_table() {
  const std::vector<std::string> ids{"A", "B", "C"};
  return assign_dedup_level(ids, {{1, 2, 3}, {1, 2, 3}, {4, 5, 6}}, 8, "rkmeans", 42);
}

TEST(Trie, SingleItemPath) {
  SidTable table(3, 4);
  table.insert("only", SidCode{{1, 2, 3}});
  const auto trie = build_prefix_trie(table);
  EXPECT_EQ(trie.leaf_count(), 1u);
  EXPECT_EQ(trie.node_count(), 4u);
  const std::vector<std::uint32_t> full{1, 2, 3};
  ASSERT_NE(trie.find(full), nullptr);
  EXPECT_EQ(*trie.find(full), "only");
}

TEST(Trie, ChildCounts) {
  const auto trie = build_prefix_trie(sample_table());
  EXPECT_EQ(trie.children(std::vector<std::uint32_t>{1, 2, 3}).size(), 2u);
  EXPECT_EQ(trie.children(std::vector<std::uint32_t>{4, 5, 6}).size(), 1u);
  EXPECT_EQ(trie.children(std::vector<std::uint32_t>{}), (std::vector<std::uint32_t>{1, 4}));
  EXPECT_TRUE(trie.contains_prefix(std::vector<std::uint32_t>{}));
  EXPECT_FALSE(trie.contains_prefix(std::vector<std::uint32_t>{2}));
}

TEST(Trie, MembershipMatchesTable) {
  std::mt19937_64 rng(12);
  SidTable table(3, 6);
  std::uniform_int_distribution<std::uint32_t> code(0, 5);
  while (table.size() < 100) {
    SidCode c{{code(rng), code(rng), code(rng)}};
    bool clash = false;
    for (const auto& [id, existing] : table.entries()) clash |= existing == c;
    if (!clash) table.insert("it" + std::to_string(table.size()), c);
  }
  const auto trie = build_prefix_trie(table);
  EXPECT_EQ(trie.leaf_count(), 100u);
  for (const auto& [id, c] : table.entries()) {
    ASSERT_NE(trie.find(c.codes), nullptr);
    EXPECT_EQ(*trie.find(c.codes), id);
  }
  std::set<SidCode> stored;
  for (const auto& [c, id] : trie.leaves()) stored.insert(c);
  for (const auto& [id, c] : table.entries()) EXPECT_TRUE(stored.count(c));
  int absent = 0;
  for (int t = 0; t < 500; ++t) {
    SidCode c{{code(rng), code(rng), code(rng)}};
    if (stored.count(c)) continue;
    ++absent;
    EXPECT_EQ(trie.find(c.codes), nullptr);
  }
  EXPECT_GT(absent, 0);
}

TEST(SidFile, RoundTrip) {
  const auto table = sample_table();
  std::stringstream buf;
  write_sid_table(table, buf);
  EXPECT_EQ(read_sid_table(buf), table);

  const auto path = std::filesystem::temp_directory_path() / "irr_sid_roundtrip.tsv";
  save_sid_table(table, path);
  const auto loaded = load_sid_table(path);
  EXPECT_EQ(loaded, table);
  EXPECT_EQ(loaded.method(), "rkmeans");
  EXPECT_EQ(loaded.seed(), 42u);
  std::filesystem::remove(path);
}

TEST(SidFile, ShortLineIsParseErrorWithLine) {
  std::stringstream in("#sid L=4 K=8 method=rkmeans seed=1\nA\t1,2,3,0\nB\t1,2,3\n");
  try {
    read_sid_table(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(SidFile, DuplicateItemIsDataError) {
  std::stringstream in("#sid L=2 K=8 method=rkmeans seed=1\nA\t1,0\nA\t2,0\n");
  EXPECT_THROW(read_sid_table(in), DataError);
}

TEST(SidFile, ExternalProducerFixture) {
  std::stringstream in(
      "#sid L=3 K=256 method=rqvae seed=0\r\n"
      "B000123\t17,200,3\r\n"
      "B000456\t17,200,4\r\n"
      "\r\n"
      "B000789\t0,0,0\r\n");
  const auto table = read_sid_table(in);
  EXPECT_EQ(table.size(), 3u);
  EXPECT_EQ(table.method(), "rqvae");
  EXPECT_EQ(table.at("B000456").codes, (std::vector<std::uint32_t>{17, 200, 4}));
}

TEST(SidFile, RejectsBadHeaderAndCodes) {
  std::stringstream no_header("A\t1,2\n");
  EXPECT_THROW(read_sid_table(no_header), ParseError);
  std::stringstream out_of_range("#sid L=2 K=4 method=x seed=0\nA\t1,9\n");
  EXPECT_THROW(read_sid_table(out_of_range), ParseError);
  std::stringstream junk("#sid L=2 K=4 method=x seed=0\nA\t1,x\n");
  EXPECT_THROW(read_sid_table(junk), ParseError);
}

TEST(Embeddings, FileRoundTripAtFloatPrecision) {
  ContentEmbeddings emb;
  emb.matrix = DenseMatrix::from_rows({{1.0, -2.5}, {0.125, 3.0}});
  emb.item_ids = {"x", "y"};
  const auto path = std::filesystem::temp_directory_path() / "irr_emb.bin";
  save_embeddings(emb, path);
  const auto back = load_embeddings(path);
  EXPECT_EQ(back.item_ids, emb.item_ids);
  EXPECT_EQ(back.matrix, emb.matrix);
  std::filesystem::remove(path);
  std::filesystem::remove(ids_sidecar(path));
}

TEST(Embeddings, ValidateRejectsDuplicates) {
  ContentEmbeddings emb;
  emb.matrix = DenseMatrix(2, 1);
  emb.item_ids = {"x", "x"};
  EXPECT_THROW(emb.validate(), DataError);
}

}  // namespace
}  // namespace irr::index
