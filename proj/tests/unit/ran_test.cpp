// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/ran.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "irr/error.hpp"
#include "test_util.hpp"

namespace irr::ran {
namespace {

using irr::testing::bit_identical;
using irr::testing::gradient_error;
using irr::testing::random_matrix;

RanConfig small(std::size_t levels, std::size_t k, std::size_t d) {
  RanConfig c;
  c.levels = levels;
  c.codebook_size = k;
  c.dim = d;
  return c;
}

index::SidCode sid(std::initializer_list<std::uint32_t> codes) { return {codes}; }

// Projects a node onto a scalar with fixed weights.
ad::Var project(ad::Tape& tape, ad::Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::mul(out, tape.constant(random_matrix(out.rows(), out.cols(), rng))));
}

TEST(FuseHidden, LevelOneIsPassThrough) {
  Rng rng(1);
  Ran ran(small(3, 4, 5), rng);
  std::mt19937_64 g(2);
  ad::Tape tape;
  auto x = tape.constant(random_matrix(3, 5, g));
  auto h = ran.fuse_hidden(tape, x, {}, 1);
  EXPECT_TRUE(bit_identical(h.value(), x.value()));
}

TEST(FuseHidden, ZeroFusionGivesZeroBias) {
  Ran ran = Ran::zeros(small(3, 4, 5));
  std::mt19937_64 g(3);
  ad::Tape tape;
  auto h = ran.fuse_hidden(tape, tape.constant(random_matrix(2, 5, g)),
                           tape.constant(random_matrix(2, 5, g)), 2);
  for (double v : h.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(FuseHidden, MissingPrefixIsContractError) {
  Rng rng(1);
  Ran ran(small(3, 4, 5), rng);
  ad::Tape tape;
  auto x = tape.constant(DenseMatrix(1, 5, 1.0));
  EXPECT_THROW(ran.fuse_hidden(tape, x, {}, 2), ContractError);
  EXPECT_THROW(ran.fuse_hidden(tape, x, x, 4), ContractError);
}

TEST(FuseHidden, LevelThreeGradientMatchesFiniteDifferences) {
  Rng rng(4);
  Ran ran(small(3, 4, 6), rng);
  std::mt19937_64 g(5);
  ad::Parameter x("x", random_matrix(2, 6, g));
  ad::Parameter z("z", random_matrix(2, 6, g));
  std::vector<ad::Parameter*> params{&x, &z};
  for (auto* p : ran.parameters()) params.push_back(p);
  const double err = gradient_error(params, [&](ad::Tape& tape) {
    return project(tape, ran.fuse_hidden(tape, tape.param(x), tape.param(z), 3), 9);
  });
  EXPECT_LT(err, 1e-5);
}

TEST(AssignDistribution, ZeroGuidanceIsUniform) {
  Rng rng(1);
  Ran ran(small(2, 5, 4), rng);
  ad::Tape tape;
  auto p = ran.assign_distribution(tape, tape.constant(DenseMatrix(1, 4)), 2);
  for (double v : p.value().values()) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(AssignDistribution, OrthogonalGuidanceIsUniform) {
  Ran ran = Ran::zeros(small(1, 3, 4));
  auto& v = ran.codebook(1).value;
  v(0, 0) = 1.0;
  v(1, 1) = 2.0;
  v(2, 0) = -3.0;
  ad::Tape tape;
  auto p = ran.assign_distribution(tape, tape.constant(DenseMatrix::from_rows({{0, 0, 1, 5}})), 1);
  for (double x : p.value().values()) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
}

TEST(AssignDistribution, DominantCodewordTakesTheMass) {
  Ran ran = Ran::zeros(small(1, 4, 3));
  DenseMatrix h = DenseMatrix::from_rows({{0.6, -0.2, 0.3}});
  for (std::size_t j = 0; j < 3; ++j) ran.codebook(1).value(2, j) = 50.0 * h(0, j);
  ran.codebook(1).value(0, 0) = 0.2;
  ran.codebook(1).value(0, 1) = 0.6;  // orthogonal to h
  ad::Tape tape;
  auto p = ran.assign_distribution(tape, tape.constant(h), 1);
  EXPECT_GT(p.value()(0, 2), 1.0 - 1e-9);
}

TEST(AssignDistribution, MatchesDirectSoftmax) {
  Rng rng(7);
  Ran ran(small(1, 4, 2), rng);
  std::mt19937_64 g(8);
  DenseMatrix h = random_matrix(1, 2, g);
  ad::Tape tape;
  auto p = ran.assign_distribution(tape, tape.constant(h), 1);
  const auto& v = ran.codebook(1).value;
  double scores[4], norm = 0.0;
  for (int k = 0; k < 4; ++k) {
    scores[k] = std::exp(h(0, 0) * v(k, 0) + h(0, 1) * v(k, 1));
    norm += scores[k];
  }
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(p.value()(0, k), scores[k] / norm, 1e-12);
}

TEST(AggregateContext, OneHotRedistributionEqualsTeacherForcing) {
  Rng rng(9);
  Ran ran(small(1, 4, 3), rng);
  for (std::size_t k = 0; k < 4; ++k) {
    DenseMatrix onehot(1, 4);
    onehot(0, k) = 1.0;
    ad::Tape tape;
    auto soft = ran.aggregate_context(tape, tape.constant(onehot), {}, 1, RanMode::kRedistribution);
    std::vector<std::size_t> t{k};
    auto hard = ran.aggregate_context(tape, tape.constant(onehot), t, 1, RanMode::kTeacherForcing);
    EXPECT_TRUE(bit_identical(soft.value(), hard.value()));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(hard.value()(0, j), ran.codebook(1).value(k, j));
  }
}

TEST(AggregateContext, UniformIsColumnMean) {
  Rng rng(10);
  Ran ran(small(1, 4, 3), rng);
  ad::Tape tape;
  auto z = ran.aggregate_context(tape, tape.constant(DenseMatrix(1, 4, 0.25)), {}, 1,
                                 RanMode::kRedistribution);
  const auto& v = ran.codebook(1).value;
  for (std::size_t j = 0; j < 3; ++j) {
    const double mean = (v(0, j) + v(1, j) + v(2, j) + v(3, j)) / 4.0;
    EXPECT_NEAR(z.value()(0, j), mean, 1e-15);
  }
}

TEST(AggregateContext, MatchesWeightedSum) {
  Rng rng(11);
  Ran ran(small(1, 4, 3), rng);
  DenseMatrix p = DenseMatrix::from_rows({{0.1, 0.4, 0.3, 0.2}});
  ad::Tape tape;
  auto z = ran.aggregate_context(tape, tape.constant(p), {}, 1, RanMode::kRedistribution);
  const auto& v = ran.codebook(1).value;
  for (std::size_t j = 0; j < 3; ++j) {
    double want = 0.0;
    for (std::size_t k = 0; k < 4; ++k) want += p(0, k) * v(k, j);
    EXPECT_NEAR(z.value()(0, j), want, 1e-12);
  }
}

TEST(AggregateContext, TeacherForcingNeedsValidTargets) {
  Rng rng(12);
  Ran ran(small(1, 4, 3), rng);
  ad::Tape tape;
  auto p = tape.constant(DenseMatrix(2, 4, 0.25));
  EXPECT_THROW(ran.aggregate_context(tape, p, {}, 1, RanMode::kTeacherForcing), ContractError);
  std::vector<std::size_t> bad{0, 4};
  EXPECT_THROW(ran.aggregate_context(tape, p, bad, 1, RanMode::kTeacherForcing), ContractError);
}

TEST(RunRecursive, SingleLevelTrace) {
  Rng rng(13);
  Ran ran(small(1, 3, 4), rng);
  std::mt19937_64 g(14);
  ad::Tape tape;
  auto x = tape.constant(random_matrix(1, 4, g));
  auto trace = ran.run_recursive(tape, x, RanMode::kRedistribution);
  ASSERT_EQ(trace.h.size(), 1u);
  ASSERT_EQ(trace.p.size(), 1u);
  ASSERT_EQ(trace.z.size(), 1u);
  EXPECT_TRUE(bit_identical(trace.h[0].value(), x.value()));
}

TEST(RunRecursive, TeacherForcingContextsAreCodebookRows) {
  Rng rng(15);
  Ran ran(small(3, 4, 5), rng);
  std::mt19937_64 g(16);
  ad::Tape tape;
  std::vector<index::SidCode> sids{sid({1, 3, 0}), sid({2, 2, 1})};
  auto trace = ran.run_recursive(tape, tape.constant(random_matrix(2, 5, g)),
                                 RanMode::kTeacherForcing, sids);
  for (std::size_t l = 1; l <= 3; ++l) {
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t j = 0; j < 5; ++j) {
        EXPECT_EQ(trace.z[l - 1].value()(r, j), ran.codebook(l).value(sids[r][l - 1], j));
      }
    }
  }
}

TEST(RunRecursive, DistributionsSumToOne) {
  Rng rng(17);
  Ran ran(small(3, 6, 4), rng);
  std::mt19937_64 g(18);
  ad::Tape tape;
  auto trace = ran.run_recursive(tape, tape.constant(random_matrix(5, 4, g, 3.0)),
                                 RanMode::kRedistribution);
  for (const auto& p : trace.p) {
    for (std::size_t r = 0; r < 5; ++r) {
      double s = 0.0;
      for (auto v : p.value().row(r)) s += v;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(RunRecursive, TeacherForcingWithoutSidIsContractError) {
  Rng rng(1);
  Ran ran(small(2, 3, 4), rng);
  ad::Tape tape;
  EXPECT_THROW(ran.run_recursive(tape, tape.constant(DenseMatrix(1, 4)), RanMode::kTeacherForcing),
               ContractError);
}

TEST(PathLogProb, ZeroModelIsMinusLLogK) {
  Ran ran = Ran::zeros(small(4, 16, 4));
  std::mt19937_64 g(19);
  ad::Tape tape;
  std::vector<index::SidCode> s{sid({3, 15, 0, 7})};
  auto trace =
      ran.run_recursive(tape, tape.constant(random_matrix(1, 4, g)), RanMode::kTeacherForcing, s);
  EXPECT_NEAR(path_log_prob(trace, s[0]), -4.0 * std::log(16.0), 1e-12);
  EXPECT_NEAR(-4.0 * std::log(16.0), -11.0904, 1e-4);
}

TEST(PathLogProb, SingleLevelHalf) {
  Ran ran = Ran::zeros(small(1, 2, 2));
  ran.codebook(1).value(0, 0) = 1.0;
  ran.codebook(1).value(1, 0) = 1.0;  // equal scores -> 0.5 each
  ad::Tape tape;
  std::vector<index::SidCode> s{sid({1})};
  auto trace = ran.run_recursive(tape, tape.constant(DenseMatrix::from_rows({{0.7, 0.0}})),
                                 RanMode::kTeacherForcing, s);
  EXPECT_NEAR(path_log_prob(trace, s[0]), std::log(0.5), 1e-15);
}

TEST(PathLogProb, ExhaustiveMassIsOne) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Ran ran(small(2, 3, 4), rng);
    std::mt19937_64 g(seed + 100);
    DenseMatrix x = random_matrix(1, 4, g, 2.0);
    double mass = 0.0;
    for (std::uint32_t a = 0; a < 3; ++a) {
      for (std::uint32_t b = 0; b < 3; ++b) {
        ad::Tape tape;
        std::vector<index::SidCode> s{sid({a, b})};
        auto trace = ran.run_recursive(tape, tape.constant(x), RanMode::kTeacherForcing, s);
        mass += std::exp(path_log_prob(trace, s[0]));
      }
    }
    EXPECT_NEAR(mass, 1.0, 1e-10);
  }
}

TEST(PathLogProb, RejectsMismatchedTrace) {
  Rng rng(1);
  Ran ran(small(2, 3, 4), rng);
  ad::Tape tape;
  auto x = tape.constant(DenseMatrix(1, 4, 0.1));
  auto soft = ran.run_recursive(tape, x, RanMode::kRedistribution);
  EXPECT_THROW(path_log_prob(soft, sid({0, 1})), ContractError);
  std::vector<index::SidCode> s{sid({0, 1})};
  auto hard = ran.run_recursive(tape, x, RanMode::kTeacherForcing, s);
  EXPECT_THROW(path_log_prob(hard, sid({1, 1})), ContractError);
}

TEST(RunRecursive, OneHotCollapseIsBitExact) {
  // Saturated codebooks make every assignment one-hot in float64.
  Rng rng(20);
  Ran ran(small(3, 4, 6), rng);
  for (std::size_t l = 1; l <= 3; ++l) {
    for (double& v : ran.codebook(l).value.values()) v *= 1e4;
  }
  std::mt19937_64 g(21);
  ad::Tape tape;
  auto x = tape.constant(random_matrix(4, 6, g));
  auto soft = ran.run_recursive(tape, x, RanMode::kRedistribution);
  std::vector<index::SidCode> argmax(4);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t l = 0; l < 3; ++l) {
      auto row = soft.p[l].value().row(r);
      std::uint32_t best = 0;
      for (std::uint32_t k = 0; k < 4; ++k) {
        if (row[k] > row[best]) best = k;
      }
      if (row[best] != 1.0) GTEST_SKIP() << "instance not saturated";
      argmax[r].codes.push_back(best);
    }
  }
  auto hard = ran.run_recursive(tape, x, RanMode::kTeacherForcing, argmax);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_TRUE(bit_identical(soft.z[l].value(), hard.z[l].value()));
    EXPECT_TRUE(bit_identical(soft.p[l].value(), hard.p[l].value()));
  }
}

TEST(RunRecursive, NonCumulativePrefixUsesPreviousContext) {
  RanConfig cfg = small(3, 4, 5);
  cfg.cumulative_prefix = false;
  Rng rng(22);
  Ran ran(cfg, rng);
  std::mt19937_64 g(23);
  ad::Tape tape;
  auto x = tape.constant(random_matrix(1, 5, g));
  auto trace = ran.run_recursive(tape, x, RanMode::kRedistribution);
  auto h3 = ran.fuse_hidden(tape, x, trace.z[1], 3);
  EXPECT_TRUE(bit_identical(h3.value(), trace.h[2].value()));
  auto h3_cum = ran.fuse_hidden(tape, x, ad::add(trace.z[0], trace.z[1]), 3);
  EXPECT_FALSE(bit_identical(h3_cum.value(), trace.h[2].value()));
}

class RanGradient : public ::testing::TestWithParam<RanMode> {};

TEST_P(RanGradient, FullForwardMatchesFiniteDifferences) {
  Rng rng(24);
  Ran ran(small(3, 4, 8), rng);
  std::mt19937_64 g(25);
  ad::Parameter x("x", random_matrix(3, 8, g));
  std::vector<index::SidCode> sids{sid({0, 1, 2}), sid({3, 3, 0}), sid({1, 0, 3})};
  std::vector<ad::Parameter*> params{&x};
  for (auto* p : ran.parameters()) params.push_back(p);
  const RanMode mode = GetParam();
  const double err = gradient_error(params, [&](ad::Tape& tape) {
    auto trace = ran.run_recursive(tape, tape.param(x), mode, sids);
    return ad::add(path_nll(trace, sids), project(tape, sum_contexts(trace), 26));
  });
  EXPECT_LT(err, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Modes, RanGradient,
                         ::testing::Values(RanMode::kRedistribution, RanMode::kTeacherForcing));

TEST(Ran, RenamedCopyHasEqualValuesAndNewNames) {
  Rng rng(27);
  Ran ran(small(2, 3, 4), rng);
  Ran copy = ran.renamed("user_ran");
  auto a = ran.parameters();
  auto b = copy.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->value, b[i]->value);
    EXPECT_EQ(b[i]->name.rfind("user_ran.", 0), 0u);
    EXPECT_NE(a[i], b[i]);
  }
}

TEST(Ran, LevelOneHasNoFusionParameters) {
  Rng rng(1);
  Ran ran(small(3, 4, 5), rng);
  EXPECT_EQ(ran.parameters().size(), 3u + 2u * 4u);
  EXPECT_THROW(ran.fusion(1), std::out_of_range);
}

}  // namespace
}  // namespace irr::ran
