#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "support/grad_cases.hpp"
#include "vimlab/errors.hpp"
#include "vimlab/objectives.hpp"
#include "vimlab/optim.hpp"

using namespace vimlab;
using namespace testing_support;

namespace {

Tensor filled(Shape shape, double v) { return Tensor(std::move(shape), v); }

Tensor normal(std::size_t rows, std::size_t cols, double mean, double sd, std::mt19937_64& rng) {
  Tensor t({rows, cols});
  std::normal_distribution<double> d(mean, sd);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

double kl_value(const Tensor& mu, const Tensor& lv, double sigma) {
  Graph g(Graph::Mode::inference);
  return gauss_kl(g, mu, lv, sigma).item();
}

// 99th percentile of the null MMD (both sets from N(0, I)) over 100 reseeds.
double null_p99(std::size_t n, std::size_t k) {
  std::vector<double> vals;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 rng(1000 + s);
    Tensor a = normal(n, k, 0, 1, rng), b = normal(n, k, 0, 1, rng);
    vals.push_back(mmd_value(a, b));
  }
  std::sort(vals.begin(), vals.end());
  return vals[98];
}

}  // namespace

TEST(Nll, UniformLogitsGiveLogClasses) {
  Graph g;
  Tensor logits({4, 10}, 0.3);
  const int y[] = {0, 3, 9, 5};
  EXPECT_NEAR(nll(g, logits, y).item(), std::log(10.0), 1e-12);
}

TEST(Nll, ConfidentCorrectLogitsGoToZero) {
  Graph g;
  Tensor logits({2, 3}, 0.0);
  logits.at(0, 1) = 60;
  logits.at(1, 2) = 60;
  const int y[] = {1, 2};
  EXPECT_LT(nll(g, logits, y).item(), 1e-20);
}

TEST(Nll, MatchesLongDoubleReference) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 7, c = 2 + trial % 9;
    Tensor logits = uniform({n, c}, rng, -20, 20, false);
    std::vector<int> y(n);
    for (auto& v : y) v = std::uniform_int_distribution<int>(0, static_cast<int>(c) - 1)(rng);
    long double ref = 0;
    for (std::size_t r = 0; r < n; ++r) {
      long double z = 0;
      for (std::size_t j = 0; j < c; ++j) z += std::exp(static_cast<long double>(logits.at(r, j)));
      ref += std::log(z) - logits.at(r, static_cast<std::size_t>(y[r]));
    }
    ref /= static_cast<long double>(n);
    Graph g;
    EXPECT_NEAR(nll(g, logits, y).item(), static_cast<double>(ref), 1e-12);
  }
}

TEST(GaussKl, ZeroWhenPosteriorEqualsPrior) {
  EXPECT_LE(std::abs(kl_value(filled({3, 5}, 0), filled({3, 5}, 0), 1.0)), 1e-12);
  EXPECT_LE(std::abs(kl_value(filled({2, 4}, 0), filled({2, 4}, 2 * std::log(1.7)), 1.7)), 1e-12);
}

TEST(GaussKl, HandValues) {
  EXPECT_NEAR(kl_value(filled({1, 1}, 1), filled({1, 1}, 0), 1.0), 0.5, 1e-12);
  const double expected = 0.5 * (0.25 - 1 + 2 * std::log(2.0));
  EXPECT_NEAR(kl_value(filled({1, 1}, 0), filled({1, 1}, 0), 2.0), expected, 1e-12);
  EXPECT_NEAR(expected, 0.3181, 1e-4);
}

TEST(GaussKl, NonNegativeOnRandomInputs) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> s(0.05, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t b = 1 + i % 4, k = 1 + i % 6;
    Tensor mu = uniform({b, k}, rng, -3, 3, false), lv = uniform({b, k}, rng, -8, 8, false);
    EXPECT_GE(kl_value(mu, lv, s(rng)), 0.0);
  }
}

TEST(GaussKl, SigmaOrdering) {
  const double k05 = kl_value(filled({1, 1}, 0), filled({1, 1}, 0), 0.5);
  const double k1 = kl_value(filled({1, 1}, 0), filled({1, 1}, 0), 1.0);
  const double k2 = kl_value(filled({1, 1}, 0), filled({1, 1}, 0), 2.0);
  EXPECT_LT(k1, k2);
  EXPECT_LT(k2, k05);
  EXPECT_LE(std::abs(k1), 1e-12);
}

TEST(GaussKl, AgreesWithMonteCarlo) {
  std::mt19937_64 cfg_rng(23);
  constexpr int kDraws = 1000000;
  for (int c = 0; c < 10; ++c) {
    const std::size_t k = 1 + c % 3;
    Tensor mu = uniform({1, k}, cfg_rng, -1.5, 1.5, false);
    Tensor lv = uniform({1, k}, cfg_rng, -2, 1.5, false);
    const double sigma = std::uniform_real_distribution<double>(0.5, 2.0)(cfg_rng);
    const double closed = kl_value(mu, lv, sigma);

    std::mt19937_64 rng(100 + c);
    std::normal_distribution<double> n01(0, 1);
    double sum = 0, sum_sq = 0;
    for (int i = 0; i < kDraws; ++i) {
      double log_ratio = 0;
      for (std::size_t d = 0; d < k; ++d) {
        const double sd = std::exp(0.5 * lv[d]);
        const double e = n01(rng);
        const double z = mu[d] + sd * e;
        // log q(z) - log p(z)
        log_ratio += -0.5 * e * e - std::log(sd) + 0.5 * (z / sigma) * (z / sigma) + std::log(sigma);
      }
      sum += log_ratio;
      sum_sq += log_ratio * log_ratio;
    }
    const double mean = sum / kDraws;
    const double se = std::sqrt((sum_sq / kDraws - mean * mean) / kDraws);
    EXPECT_LE(std::abs(mean - closed), 3 * se) << "config " << c << ": closed " << closed << " mc " << mean;
  }
}

TEST(Kernel, HandValuesAndSymmetry) {
  const double a[] = {1, 2}, b[] = {2, 3};
  EXPECT_EQ(imq_kernel(a, a), 1.0);
  EXPECT_DOUBLE_EQ(imq_kernel(a, b), 0.5);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    Tensor x = uniform({1, 6}, rng, -3, 3, false), y = uniform({1, 6}, rng, -3, 3, false);
    EXPECT_EQ(imq_kernel(x.data(), y.data()), imq_kernel(y.data(), x.data()));
    const double v = imq_kernel(x.data(), y.data());
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Mmd, ZeroOnIdenticalSamples) {
  std::mt19937_64 rng(4);
  Tensor z = normal(64, 8, 0, 1, rng);
  EXPECT_LE(std::abs(mmd_value(z, z.clone())), 1e-12);
}

TEST(Mmd, NonNegative) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 300; ++i) {
    const std::size_t b = 2 + i % 30, m = 2 + (i * 7) % 30, k = 1 + i % 9;
    Tensor z = normal(b, k, (i % 5) * 0.3, 1 + (i % 3), rng), p = normal(m, k, 0, 1, rng);
    // Rounding can leave the V-statistic a hair below zero when the sets coincide.
    EXPECT_GE(mmd_value(z, p), -1e-12);
  }
}

TEST(Mmd, NullCalibrationAndSeparation) {
  const double p99 = null_p99(512, 8);
  EXPECT_LE(p99, 0.02);
  std::mt19937_64 rng(77);
  Tensor shifted = normal(512, 8, 5, 1, rng), prior = normal(512, 8, 0, 1, rng);
  EXPECT_GE(mmd_value(shifted, prior), 10 * p99);
}

TEST(Mmd, MonotoneUnderMeanShift) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    double last = -1;
    for (double c : {0.0, 1.0, 2.0, 4.0}) {
      std::mt19937_64 rng(seed);
      Tensor z = normal(128, 8, 0, 1, rng), p = normal(128, 8, 0, 1, rng);
      for (auto& v : z.data()) v += c;
      const double m = mmd_value(z, p);
      EXPECT_GE(m, last);
      last = m;
    }
  }
}

TEST(Mmd, PermutationInvariant) {
  std::mt19937_64 rng(8);
  Tensor z = normal(50, 6, 0.5, 1, rng), p = normal(50, 6, 0, 1, rng);
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor zp({50, 6});
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t j = 0; j < 6; ++j) zp.at(i, j) = z.at(perm[i], j);
  }
  EXPECT_NEAR(mmd_value(z, p), mmd_value(zp, p), 1e-12);
}

TEST(Mmd, Preconditions) {
  Graph g;
  EXPECT_THROW(mmd(g, Tensor({1, 3}), Tensor({4, 3})), ContractError);
  EXPECT_THROW(mmd(g, Tensor({4, 3}), Tensor({1, 3})), ContractError);
  EXPECT_THROW(mmd(g, Tensor({4, 3}), Tensor({4, 2})), ShapeError);
  Tensor p({4, 3});
  p.set_requires_grad(true);
  EXPECT_THROW(mmd(g, Tensor({4, 3}), p), ContractError);
}

TEST(Objectives, AggregateVersusPerExamplePenalty) {
  // Means spread like the prior, per-example variances collapsed.
  const double sigma = 1.5;
  std::mt19937_64 rng(31);
  Tensor mu = normal(512, 8, 0, sigma, rng);
  Tensor lv({512, 8}, kLogvarFloor);
  Tensor z = mu.clone();
  std::normal_distribution<double> n01(0, 1);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += std::exp(0.5 * lv[i]) * n01(rng);
  Tensor prior = sample_prior(512, 8, sigma, rng);
  EXPECT_LE(mmd_value(z, prior), null_p99(512, 8));
  EXPECT_GT(kl_value(mu, lv, sigma), 1.0);
}

TEST(Objectives, UnknownVariantIsContractError) {
  EXPECT_THROW(parse_variant("infomax"), ContractError);
  EXPECT_EQ(parse_variant("VIM"), Variant::vim);
}

class CompositeLoss : public ::testing::TestWithParam<Variant> {};

TEST_P(CompositeLoss, MatchesCentralDifferences) {
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    const auto c = composite_case(GetParam(), inst);
    const auto r = grad_check(c.build, c.params);
    EXPECT_LE(r.max_rel_err, 1e-4) << variant_name(GetParam()) << " instance " << inst << ": " << r.worst;
  }
}

INSTANTIATE_TEST_SUITE_P(Variants, CompositeLoss, ::testing::Values(Variant::baseline, Variant::vib, Variant::vim),
                         [](const auto& info) { return std::string(variant_name(info.param)); });

namespace {

StochasticClassifier small_model(std::uint64_t seed) { return std::move(*composite_case(Variant::baseline, seed).model); }

ObjectiveStreams streams(std::uint64_t seed) { return {make_stream(seed, Stream::latent), make_stream(seed, Stream::prior)}; }

}  // namespace

TEST(Objectives, ZeroBetaMatchesBaselineExactly) {
  std::mt19937_64 rng(9);
  Tensor x = uniform({12, 5}, rng, 0, 1, false);
  std::vector<int> y(12);
  for (auto& v : y) v = std::uniform_int_distribution<int>(0, 2)(rng);
  auto run = [&](Variant v) {
    auto model = small_model(1);
    Graph g;
    auto s = streams(4);
    auto terms = loss({v, 0.0, 2.0, 0}, model, g, x, y, s);
    g.backward(terms.total);
    std::vector<double> out{terms.total.item()};
    for (auto& p : model.parameters()) out.insert(out.end(), p.tensor.grad().begin(), p.tensor.grad().end());
    return out;
  };
  const auto base = run(Variant::baseline);
  EXPECT_EQ(run(Variant::vib), base);
  EXPECT_EQ(run(Variant::vim), base);
}

TEST(Objectives, AllVariantsShareTheSampledPath) {
  std::mt19937_64 rng(10);
  Tensor x = uniform({8, 5}, rng, 0, 1, false);
  std::vector<int> y(8, 1);
  auto model = small_model(2);
  std::vector<double> nlls;
  for (Variant v : {Variant::baseline, Variant::vib, Variant::vim}) {
    Graph g;
    auto s = streams(3);
    nlls.push_back(loss({v, 0.5, 1.0, 0}, model, g, x, y, s).nll.item());
  }
  EXPECT_EQ(nlls[0], nlls[1]);
  EXPECT_EQ(nlls[0], nlls[2]);
}
