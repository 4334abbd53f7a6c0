// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/item_repr.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "irr/error.hpp"
#include "irr/trainer.hpp"
#include "test_util.hpp"

namespace irr::item {
namespace {

using irr::testing::random_matrix;

Catalog make_catalog(std::size_t levels, std::size_t k,
                     const std::vector<std::vector<std::uint32_t>>& codes) {
  index::SidTable table(levels, k);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    ids.push_back("item" + std::to_string(i));
    table.insert(ids.back(), {codes[i]});
  }
  return Catalog(ids, table);
}

ran::RanConfig small(std::size_t levels, std::size_t k, std::size_t d) {
  ran::RanConfig c;
  c.levels = levels;
  c.codebook_size = k;
  c.dim = d;
  return c;
}

TEST(Catalog, LookupAndUnknownItems) {
  auto catalog = make_catalog(2, 3, {{0, 1}, {2, 2}});
  EXPECT_EQ(catalog.index_of("item1"), 1u);
  EXPECT_EQ(catalog.sid(1).codes, (std::vector<std::uint32_t>{2, 2}));
  EXPECT_THROW(catalog.index_of("nope"), LookupError);
  EXPECT_THROW(catalog.sid(5), LookupError);
  index::SidTable empty(2, 3);
  EXPECT_THROW(Catalog({"x"}, empty), LookupError);
}

TEST(ItemEmbedding, TeacherForcingIsHardLookupSum) {
  Rng rng(1);
  ran::Ran ran(small(3, 4, 5), rng);
  auto catalog = make_catalog(3, 4, {{1, 2, 3}, {0, 0, 1}});
  auto uid_a = make_uid_table(2, 5, rng);
  auto uid_b = make_uid_table(2, 5, rng);
  std::vector<std::size_t> items{0, 1};
  ad::Tape tape;
  auto ea = synthesize_item_embeddings(tape, ran, uid_a, catalog, items, ran::RanMode::kTeacherForcing);
  auto eb = synthesize_item_embeddings(tape, ran, uid_b, catalog, items, ran::RanMode::kTeacherForcing);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < 5; ++j) {
      double want = 0.0;
      for (std::size_t l = 1; l <= 3; ++l) want += ran.codebook(l).value(catalog.sid(r)[l - 1], j);
      EXPECT_NEAR(ea.embeddings.value()(r, j), want, 1e-15);
    }
  }
  EXPECT_EQ(ea.embeddings.value(), eb.embeddings.value());
}

TEST(ItemEmbedding, ZeroCodebooksGiveZero) {
  Rng rng(2);
  ran::Ran ran(small(2, 3, 4), rng);
  for (std::size_t l = 1; l <= 2; ++l) ran.codebook(l).value.fill(0.0);
  auto catalog = make_catalog(2, 3, {{1, 2}});
  auto uid = make_uid_table(1, 4, rng);
  std::vector<std::size_t> items{0};
  for (auto mode : {ran::RanMode::kRedistribution, ran::RanMode::kTeacherForcing}) {
    ad::Tape tape;
    auto e = synthesize_item_embeddings(tape, ran, uid, catalog, items, mode);
    for (double v : e.embeddings.value().values()) EXPECT_EQ(v, 0.0);
  }
}

// Independent recomputation of E = z_1 + z_2 with plain loops.
TEST(ItemEmbedding, RedistributionMatchesRecomputation) {
  constexpr std::size_t d = 4, k = 3;
  Rng rng(3);
  ran::Ran ran(small(2, k, d), rng);
  for (double& v : ran.fusion(2).b1.value.values()) v = rng.normal(0.0, 0.3);
  for (double& v : ran.fusion(2).b2.value.values()) v = rng.normal(0.0, 0.3);
  auto catalog = make_catalog(2, k, {{2, 0}});
  auto uid = make_uid_table(1, d, rng);
  std::vector<std::size_t> items{0};
  ad::Tape tape;
  auto e = synthesize_item_embeddings(tape, ran, uid, catalog, items);

  auto distribution = [&](const std::vector<double>& h, const DenseMatrix& v) {
    std::vector<double> p(k);
    double norm = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += h[j] * v(c, j);
      p[c] = std::exp(s);
      norm += p[c];
    }
    for (auto& x : p) x /= norm;
    return p;
  };
  auto context = [&](const std::vector<double>& p, const DenseMatrix& v) {
    std::vector<double> z(d, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) z[j] += p[c] * v(c, j);
    }
    return z;
  };
  std::vector<double> x(uid.value.row(0).begin(), uid.value.row(0).end());
  const auto& v1 = ran.codebook(1).value;
  const auto& v2 = ran.codebook(2).value;
  auto z1 = context(distribution(x, v1), v1);
  const auto& f = ran.fusion(2);
  std::vector<double> hidden(d), h2(d);
  for (std::size_t o = 0; o < d; ++o) {
    double s = f.b1.value(0, o);
    for (std::size_t j = 0; j < d; ++j) s += x[j] * f.w1.value(j, o) + z1[j] * f.w1.value(d + j, o);
    hidden[o] = std::max(0.0, s);
  }
  for (std::size_t o = 0; o < d; ++o) {
    double s = f.b2.value(0, o);
    for (std::size_t j = 0; j < d; ++j) s += hidden[j] * f.w2.value(j, o);
    h2[o] = s;
  }
  auto z2 = context(distribution(h2, v2), v2);
  for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(e.embeddings.value()(0, j), z1[j] + z2[j], 1e-12);
}

TEST(AlignmentLoss, ZeroModelIsLLogK) {
  ran::Ran ran = ran::Ran::zeros(small(4, 16, 4));
  Rng rng(4);
  auto catalog = make_catalog(4, 16, {{1, 2, 3, 4}, {15, 0, 7, 9}});
  auto uid = make_uid_table(2, 4, rng);
  std::vector<std::size_t> items{0, 1};
  ad::Tape tape;
  auto e = synthesize_item_embeddings(tape, ran, uid, catalog, items);
  EXPECT_NEAR(alignment_loss(e).value()(0, 0), 4.0 * std::log(16.0), 1e-12);
}

TEST(AlignmentLoss, DuplicateItemsEqualSingle) {
  Rng rng(5);
  ran::Ran ran(small(3, 4, 6), rng);
  auto catalog = make_catalog(3, 4, {{1, 2, 3}});
  auto uid = make_uid_table(1, 6, rng);
  ad::Tape tape;
  std::vector<std::size_t> one{0}, two{0, 0};
  const double a = alignment_loss(synthesize_item_embeddings(tape, ran, uid, catalog, one)).value()(0, 0);
  const double b = alignment_loss(synthesize_item_embeddings(tape, ran, uid, catalog, two)).value()(0, 0);
  EXPECT_NEAR(a, b, 1e-15);
}

TEST(AlignmentLoss, OverfitsThreeItems) {
  Rng rng(6);
  ran::Ran ran(small(3, 4, 8), rng);
  auto catalog = make_catalog(3, 4, {{0, 1, 2}, {3, 3, 0}, {1, 0, 3}});
  auto uid = make_uid_table(3, 8, rng);
  std::vector<ad::Parameter*> params = ran.parameters();
  params.push_back(&uid);
  train::Adam adam(params);
  std::vector<std::size_t> items{0, 1, 2};
  double loss = 0.0;
  for (int step = 0; step < 1500; ++step) {
    train::zero_grads(params);
    ad::Tape tape;
    auto root = alignment_loss(synthesize_item_embeddings(tape, ran, uid, catalog, items));
    loss = root.value()(0, 0);
    if (loss < 0.01) break;
    tape.backward(root);
    adam.step(params, 0.03, 0.0);
  }
  EXPECT_LT(loss, 0.01);
}

TEST(AlignmentLoss, OneStepPullsTowardAnchor) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    ran::Ran ran(small(3, 4, 6), rng);
    std::vector<std::uint32_t> code{static_cast<std::uint32_t>(rng.below(4)),
                                    static_cast<std::uint32_t>(rng.below(4)),
                                    static_cast<std::uint32_t>(rng.below(4))};
    auto catalog = make_catalog(3, 4, {code});
    auto uid = make_uid_table(1, 6, rng);
    std::vector<ad::Parameter*> params = ran.parameters();
    params.push_back(&uid);
    std::vector<std::size_t> items{0};
    auto loss = [&] {
      ad::Tape tape;
      return alignment_loss(synthesize_item_embeddings(tape, ran, uid, catalog, items)).value()(0, 0);
    };
    train::zero_grads(params);
    double before = 0.0;
    {
      ad::Tape tape;
      auto root = alignment_loss(synthesize_item_embeddings(tape, ran, uid, catalog, items));
      before = root.value()(0, 0);
      tape.backward(root);
    }
    for (auto* p : params) {
      for (std::size_t i = 0; i < p->value.size(); ++i) p->value.values()[i] -= 1e-3 * p->grad.values()[i];
    }
    EXPECT_LT(loss(), before) << "seed " << seed;
  }
}

TEST(AlignmentLoss, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  ran::Ran ran(small(3, 4, 6), rng);
  auto catalog = make_catalog(3, 4, {{0, 1, 2}, {3, 3, 0}});
  auto uid = make_uid_table(2, 6, rng);
  std::vector<ad::Parameter*> params = ran.parameters();
  params.push_back(&uid);
  std::vector<std::size_t> items{0, 1};
  const double err = irr::testing::gradient_error(params, [&](ad::Tape& tape) {
    return alignment_loss(synthesize_item_embeddings(tape, ran, uid, catalog, items));
  });
  EXPECT_LT(err, 1e-4);
}

TEST(ItemEmbedding, SameSidDifferentUidsDiffer) {
  Rng rng(8);
  ran::Ran ran(small(2, 3, 4), rng);
  index::SidTable table(2, 3);
  table.insert("a", {{1, 0}});
  table.insert("b", {{1, 1}});
  Catalog catalog({"a", "b"}, table);
  auto uid = make_uid_table(2, 4, rng);
  std::vector<std::size_t> items{0, 1};
  ad::Tape tape;
  auto e = synthesize_item_embeddings(tape, ran, uid, catalog, items);
  // Same level-1 code: the level-1 contexts still differ because the UIDs do.
  double diff = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    diff += std::abs(e.trace.z[0].value()(0, j) - e.trace.z[0].value()(1, j));
  }
  EXPECT_GT(diff, 0.0);
}

TEST(ItemEmbedding, ZeroUidAndFusionCollapsesDistributions) {
  Rng rng(9);
  ran::Ran ran(small(3, 4, 5), rng);
  for (std::size_t l = 2; l <= 3; ++l) {
    auto& f = ran.fusion(l);
    for (auto* p : {&f.w1, &f.b1, &f.w2, &f.b2}) p->value.fill(0.0);
  }
  auto catalog = make_catalog(3, 4, {{1, 2, 0}, {1, 2, 1}, {1, 3, 0}});
  ad::Parameter uid("uid", DenseMatrix(3, 5));
  std::vector<std::size_t> items{0, 1, 2};
  ad::Tape tape;
  auto e = synthesize_item_embeddings(tape, ran, uid, catalog, items);
  for (const auto& p : e.trace.p) {
    for (std::size_t r = 1; r < 3; ++r) {
      for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(p.value()(r, k), p.value()(0, k));
    }
  }
}

TEST(ItemEmbedding, UnknownItemIsLookupError) {
  Rng rng(10);
  ran::Ran ran(small(2, 3, 4), rng);
  auto catalog = make_catalog(2, 3, {{1, 0}});
  auto uid = make_uid_table(1, 4, rng);
  std::vector<std::size_t> items{3};
  ad::Tape tape;
  EXPECT_THROW(synthesize_item_embeddings(tape, ran, uid, catalog, items), LookupError);
}

}  // namespace
}  // namespace irr::item
