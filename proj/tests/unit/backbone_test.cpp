// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/backbone.hpp"

#include <gtest/gtest.h>

#include "irr/error.hpp"
#include "irr/model.hpp"
#include "test_util.hpp"

namespace irr::model {
namespace {

using irr::testing::bit_identical;
using irr::testing::random_matrix;

Backbone make(std::size_t d = 8, std::size_t max_seq = 6, std::uint64_t seed = 1) {
  Rng rng(seed);
  return Backbone({2, d, 2, max_seq}, rng);
}

DenseMatrix run(Backbone& bb, const DenseMatrix& in, std::size_t batch, std::size_t steps,
                std::vector<std::size_t> lengths) {
  ad::Tape tape;
  return bb.forward(tape, tape.constant(in), batch, steps, lengths).value();
}

TEST(Backbone, CausalPrefixOutputsAreBitIdentical) {
  auto bb = make();
  std::mt19937_64 g(2);
  DenseMatrix a = random_matrix(6, 8, g);
  DenseMatrix b = a;
  for (std::size_t t = 4; t < 6; ++t) {
    for (std::size_t j = 0; j < 8; ++j) b(t, j) += 1.0 + static_cast<double>(j);
  }
  auto oa = run(bb, a, 1, 6, {6});
  auto ob = run(bb, b, 1, 6, {6});
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(oa(t, j), ob(t, j));
  }
  bool later_differs = false;
  for (std::size_t j = 0; j < 8; ++j) later_differs |= oa(5, j) != ob(5, j);
  EXPECT_TRUE(later_differs);
}

TEST(Backbone, SingleItemDependsOnlyOnItsEmbedding) {
  auto bb = make();
  std::mt19937_64 g(3);
  DenseMatrix item = random_matrix(1, 8, g);
  DenseMatrix a(2 * 3, 8), b(2 * 3, 8);
  for (std::size_t j = 0; j < 8; ++j) {
    a(0, j) = item(0, j);
    b(3, j) = item(0, j);
  }
  for (std::size_t t = 1; t < 3; ++t) {
    for (std::size_t j = 0; j < 8; ++j) {
      a(t, j) = 100.0;  // padding
      b(3 + t, j) = -7.0;
    }
  }
  std::vector<std::size_t> one{1, 1};
  auto oa = run(bb, a, 2, 3, one);
  auto ob = run(bb, b, 2, 3, one);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(oa(0, j), ob(3, j));
}

TEST(Backbone, PaddingContentNeverLeaks) {
  auto bb = make();
  std::mt19937_64 g(4);
  DenseMatrix a = random_matrix(2 * 5, 8, g);
  DenseMatrix b = a;
  std::vector<std::size_t> lengths{3, 5};
  for (std::size_t j = 0; j < 8; ++j) {
    std::swap(b(3, j), b(4, j));
    b(4, j) = 1e3;
  }
  auto oa = run(bb, a, 2, 5, lengths);
  auto ob = run(bb, b, 2, 5, lengths);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(oa(t, j), ob(t, j));
  }
  for (std::size_t r = 5; r < 10; ++r) {
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(oa(r, j), ob(r, j));
  }
}

TEST(Backbone, GradientMatchesFiniteDifferences) {
  auto bb = make(8, 4, 5);
  std::mt19937_64 g(6);
  ad::Parameter x("x", random_matrix(2 * 4, 8, g));
  DenseMatrix w = random_matrix(2, 8, g);
  std::vector<ad::Parameter*> params = bb.parameters();
  params.push_back(&x);
  std::vector<std::size_t> lengths{4, 3};
  const double err = irr::testing::gradient_error(params, [&](ad::Tape& tape) {
    auto out = bb.forward(tape, tape.param(x), 2, 4, lengths);
    auto last = Backbone::last_states(out, 4, lengths);
    return ad::sum(ad::mul(last, tape.constant(w)));
  });
  EXPECT_LT(err, 1e-4);
}

TEST(Backbone, RejectsOverlongAndBadLengths) {
  auto bb = make(8, 3);
  ad::Tape tape;
  auto in4 = tape.constant(DenseMatrix(4, 8));
  std::vector<std::size_t> l4{4};
  EXPECT_THROW(bb.forward(tape, in4, 1, 4, l4), ContractError);
  auto in3 = tape.constant(DenseMatrix(3, 8));
  std::vector<std::size_t> l0{0};
  EXPECT_THROW(bb.forward(tape, in3, 1, 3, l0), ContractError);
  std::vector<std::size_t> two{1, 1};
  EXPECT_THROW(bb.forward(tape, in3, 1, 3, two), ContractError);
}

TEST(Backbone, ConfigValidation) {
  EXPECT_THROW((BackboneConfig{2, 8, 3, 4}.validate()), ConfigError);
  EXPECT_THROW((BackboneConfig{2, 8, 2, 0}.validate()), ConfigError);
  EXPECT_NO_THROW((BackboneConfig{2, 8, 2, 1}.validate()));
}

TEST(Backbone, CountsInvocationsAndPositions) {
  auto bb = make(8, 6);
  run(bb, DenseMatrix(6, 8), 1, 6, {6});
  run(bb, DenseMatrix(4, 8), 2, 2, {2, 1});
  EXPECT_EQ(bb.invocations(), 2u);
  EXPECT_EQ(bb.last_positions(), 2u);
  EXPECT_EQ(bb.peak_positions(), 6u);
  bb.reset_invocations();
  EXPECT_EQ(bb.invocations(), 0u);
  EXPECT_EQ(bb.peak_positions(), 0u);
}

index::SidTable four_level_table(std::size_t items, std::size_t k) {
  index::SidTable table(4, k);
  for (std::size_t i = 0; i < items; ++i) {
    table.insert("i" + std::to_string(i),
                 {{static_cast<std::uint32_t>(i % k), static_cast<std::uint32_t>((i / k) % k), 0,
                   static_cast<std::uint32_t>(i / (k * k))}});
  }
  return table;
}

TEST(Flattened, ThirtyItemsOfFourLevelsUse120Positions) {
  ModelConfig cfg{4, 8, 8, 1, 2, 30, true, true};
  FlattenedModel flat(cfg, 1);
  EXPECT_EQ(flat.backbone.config().max_seq, 120u);
  auto table = four_level_table(40, 8);
  std::vector<std::string> ids;
  for (const auto& [id, code] : table.entries()) ids.push_back(id);
  item::Catalog catalog(ids, table);
  std::vector<std::size_t> hist(30);
  for (std::size_t t = 0; t < 30; ++t) hist[t] = t;
  std::vector<std::vector<std::size_t>> streams{flatten_items(flat, catalog, hist)};
  ad::Tape tape;
  auto fwd = encode_flattened(tape, flat, streams);
  EXPECT_EQ(fwd.steps, 120u);
  EXPECT_EQ(flat.backbone.last_positions(), 120u);

  ModelConfig one = cfg;
  one.history = 1;
  FlattenedModel flat1(one, 1);
  std::vector<std::size_t> single{0};
  std::vector<std::vector<std::size_t>> s1{flatten_items(flat1, catalog, single)};
  ad::Tape tape1;
  EXPECT_EQ(encode_flattened(tape1, flat1, s1).steps, 4u);
  // Token ids carry their level.
  EXPECT_EQ(s1[0][0], 0u * 8 + catalog.sid(0)[0]);
  EXPECT_EQ(s1[0][3], 3u * 8 + catalog.sid(0)[3]);
}

TEST(Flattened, CausalityHoldsOnTokenStreams) {
  ModelConfig cfg{2, 4, 8, 2, 2, 3, true, true};
  FlattenedModel flat(cfg, 2);
  std::vector<std::vector<std::size_t>> a{{0, 4, 1, 5, 2, 6}};
  std::vector<std::vector<std::size_t>> b{{0, 4, 1, 7, 3, 5}};
  ad::Tape ta, tb;
  auto oa = encode_flattened(ta, flat, a).outputs.value();
  auto ob = encode_flattened(tb, flat, b).outputs.value();
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(oa(t, j), ob(t, j));
  }
}

TEST(AttentionMemory, AnalyticFormulaAndRatio) {
  EXPECT_DOUBLE_EQ(attention_memory_bytes(30, 2, 2), 30.0 * 30.0 * 2 * 2 * 8);
  EXPECT_DOUBLE_EQ(attention_memory_bytes(120, 2, 2) / attention_memory_bytes(30, 2, 2), 16.0);
}

}  // namespace
}  // namespace irr::model
