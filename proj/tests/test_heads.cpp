#include <gtest/gtest.h>

#include "eattn/heads.hpp"
#include "test_support.hpp"

namespace eattn {
namespace {

using testing::mat;

ProjectionWeights<double> random_weights(std::uint64_t seed, Eigen::Index d, Eigen::Index dk,
                                         Eigen::Index dv, double scale = 1.0) {
  GaussianSource src(seed);
  ProjectionWeights<double> w;
  w.w_q = src.matrix(d, dk, scale);
  w.w_k = src.matrix(d, dk, scale);
  w.w_v = src.matrix(d, dv, scale);
  return w;
}

HeadSpec<double> spec_for(const ProjectionWeights<double>& w, EnergyForm form = EnergyForm::linear()) {
  HeadSpec<double> s;
  s.d = w.d();
  s.d_k = w.d_k();
  s.d_v = w.d_v();
  s.form = form;
  return s;
}

TEST(LinearHead, SingleTokenReturnsItsValue) {
  const auto w = random_weights(1, 3, 2, 2);
  const DenseMatrix x = mat({{0.3, -1.0, 2.0}});
  const auto out = linear_head(x, w, spec_for(w));
  EXPECT_EQ(out.context.a, mat({{1.0}}));
  EXPECT_EQ(out.z, DenseMatrix(x * w.w_v));
  EXPECT_TRUE(out.trace.converged);
  EXPECT_EQ(out.trace.iters, 0);
}

TEST(LinearHead, ZeroTokensGiveUniformAttentionAndZeroOutput) {
  const auto w = random_weights(2, 4, 2, 3);
  const DenseMatrix x = DenseMatrix::Zero(5, 4);
  const auto out = linear_head(x, w, spec_for(w));
  EXPECT_TRUE(out.context.a.isApprox(DenseMatrix::Constant(5, 5, 0.2)));
  EXPECT_TRUE(out.z.isZero(0));
}

TEST(LinearHead, MatchesAttentionOutputBitwise) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GaussianSource src(seed + 500);
    const DenseMatrix x = src.matrix(2 + seed % 9, 6, 1.0);
    const auto w = random_weights(seed, 6, 3, 2, 0.5);
    const auto out = linear_head(x, w, spec_for(w));
    const auto p = project(x, w);
    const DenseMatrix expected =
        attention_output(row_softmax(scaled_scores(p.q, p.k, w.d_k())), p.v);
    EXPECT_EQ(out.z, expected);
    EXPECT_EQ(out.trace.grad_norms.front(), 0.0);
  }
}

TEST(LinearHead, RejectsNonLinearForm) {
  const auto w = random_weights(3, 2, 2, 2);
  EXPECT_THROW(linear_head(DenseMatrix(DenseMatrix::Ones(2, 2)), w,
                           spec_for(w, EnergyForm::quadratic())),
               ConfigError);
}

TEST(NonlinearHead, UnperturbedStartIsStationary) {
  GaussianSource src(9);
  const DenseMatrix x = src.matrix(6, 5, 1.0);
  const auto w = random_weights(9, 5, 3, 2, 0.5);
  for (const auto& form : {EnergyForm::quadratic(), EnergyForm::polynomial(3),
                           EnergyForm::exponential()}) {
    const auto out = nonlinear_head(x, w, spec_for(w, form));
    EXPECT_TRUE(out.trace.converged) << form.name();
    EXPECT_EQ(out.trace.iters, 0);
    EXPECT_EQ(out.z, out.context.av);
  }
}

TEST(NonlinearHead, PerturbedStartDescends) {
  GaussianSource src(10);
  const DenseMatrix x = src.matrix(4, 5, 1.0);
  const auto w = random_weights(10, 5, 3, 2, 0.5);
  auto spec = spec_for(w, EnergyForm::quadratic());
  spec.perturb_sigma = 0.1;
  spec.seed = 44;
  spec.descent.eta = 1.0;
  spec.descent.max_iters = 200;
  const auto out = nonlinear_head(x, w, spec);
  EXPECT_GT(out.trace.iters, 0);
  EXPECT_LE(out.trace.energies.back(), out.trace.energies.front());
  EXPECT_LT(out.trace.grad_norms.back(), out.trace.grad_norms.front());
}

TEST(NonlinearHead, LinearFormDelegatesToClosedForm) {
  GaussianSource src(11);
  const DenseMatrix x = src.matrix(4, 3, 1.0);
  const auto w = random_weights(11, 3, 2, 2);
  auto spec = spec_for(w);
  spec.perturb_sigma = 0.5;
  EXPECT_EQ(nonlinear_head(x, w, spec).z, linear_head(x, w, spec).z);
}

TEST(NonlinearHead, ExponentialOverflowIsReported) {
  const DenseMatrix x = mat({{1.0, 0.0}, {0.0, 1.0}});
  ProjectionWeights<double> w;
  w.w_q = DenseMatrix::Identity(2, 2);
  w.w_k = DenseMatrix::Identity(2, 2);
  w.w_v = DenseMatrix::Identity(2, 2) * 100.0;
  EXPECT_THROW(nonlinear_head(x, w, spec_for(w, EnergyForm::exponential())), OverflowError);
}

TEST(NonlinearHead, WeightShapeMismatch) {
  const auto w = random_weights(12, 4, 2, 2);
  auto spec = spec_for(w);
  spec.d_v = 3;
  EXPECT_THROW(linear_head(DenseMatrix(DenseMatrix::Ones(3, 4)), w, spec), DimensionError);
  EXPECT_THROW(linear_head(DenseMatrix(DenseMatrix::Ones(3, 5)), w, spec_for(w)),
               DimensionError);
}

TEST(MultiHead, SingleHeadEqualsHead) {
  GaussianSource src(13);
  const DenseMatrix x = src.matrix(5, 4, 1.0);
  const auto w = random_weights(13, 4, 2, 3);
  const std::vector<HeadDefinition<double>> heads{{w, spec_for(w)}};
  EXPECT_EQ(multi_head(x, heads), linear_head(x, w, spec_for(w)).z);
}

TEST(MultiHead, IdenticalHeadsRepeatBlocks) {
  GaussianSource src(14);
  const DenseMatrix x = src.matrix(5, 4, 1.0);
  const auto w = random_weights(14, 4, 2, 3);
  const std::vector<HeadDefinition<double>> heads{{w, spec_for(w)}, {w, spec_for(w)}};
  const DenseMatrix out = multi_head(x, heads);
  ASSERT_EQ(out.cols(), 6);
  EXPECT_EQ(out.leftCols(3), out.rightCols(3));
}

TEST(MultiHead, MixedWidthsConcatenate) {
  GaussianSource src(15);
  const DenseMatrix x = src.matrix(7, 4, 1.0);
  const auto w1 = random_weights(15, 4, 2, 2);
  const auto w2 = random_weights(16, 4, 3, 3);
  auto s2 = spec_for(w2, EnergyForm::quadratic());
  s2.perturb_sigma = 0.1;
  s2.descent.eta = 1.0;
  const std::vector<HeadDefinition<double>> heads{{w1, spec_for(w1)}, {w2, s2}};
  const DenseMatrix out = multi_head(x, heads);
  EXPECT_EQ(out.rows(), 7);
  EXPECT_EQ(out.cols(), 5);
  EXPECT_EQ(out.leftCols(2), linear_head(x, w1, spec_for(w1)).z);
  EXPECT_EQ(out.rightCols(3), nonlinear_head(x, w2, s2).z);
}

TEST(MultiHead, HeadsAreIsolated) {
  GaussianSource src(17);
  const DenseMatrix x = src.matrix(6, 4, 1.0);
  const auto w1 = random_weights(17, 4, 2, 2);
  const auto w2 = random_weights(18, 4, 2, 2);
  const auto w3 = random_weights(19, 4, 2, 2);
  const DenseMatrix a = multi_head(x, std::vector<HeadDefinition<double>>{
                                          {w1, spec_for(w1)}, {w2, spec_for(w2)}});
  const DenseMatrix b = multi_head(x, std::vector<HeadDefinition<double>>{
                                          {w1, spec_for(w1)}, {w3, spec_for(w3)}});
  EXPECT_EQ(a.leftCols(2), b.leftCols(2));
  EXPECT_NE(a.rightCols(2), b.rightCols(2));
}

TEST(MultiHead, InconsistentEmbeddingWidth) {
  const auto w1 = random_weights(20, 4, 2, 2);
  const auto w2 = random_weights(21, 5, 2, 2);
  const std::vector<HeadDefinition<double>> heads{{w1, spec_for(w1)}, {w2, spec_for(w2)}};
  EXPECT_THROW(multi_head(DenseMatrix(DenseMatrix::Ones(3, 4)), heads), DimensionError);
  EXPECT_THROW(multi_head(DenseMatrix(DenseMatrix::Ones(3, 4)),
                          std::vector<HeadDefinition<double>>{}),
               ConfigError);
}

}  // namespace
}  // namespace eattn
