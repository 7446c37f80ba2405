#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "dpa/gaussmath.hpp"
#include "dpa/gdpa.hpp"
#include "oracles.hpp"

namespace ad = dpa::ad;
namespace gdpa = dpa::gdpa;
using dpa::Domain;
using dpa::EventKind;

TEST(MemoryBank, FirstUpdateInitializes) {
  gdpa::MemoryBank bank(2);
  EXPECT_FALSE(bank.initialized(Domain::kSource));
  EXPECT_THROW(bank.centroid(Domain::kSource), std::logic_error);
  const std::vector<double> m = {1.0, 0.0};
  const auto u = bank.update(Domain::kSource, m);
  EXPECT_TRUE(u.first);
  EXPECT_TRUE(bank.initialized(Domain::kSource));
  EXPECT_FALSE(bank.initialized(Domain::kTarget));
}

TEST(MemoryBank, MomentumExamples) {
  gdpa::MemoryBank bank(2);
  bank.update(Domain::kTarget, std::vector<double>{1.0, 0.0});

  const auto same = bank.update(Domain::kTarget, std::vector<double>{1.0, 0.0});
  EXPECT_DOUBLE_EQ(same.pi, 1.0);
  EXPECT_DOUBLE_EQ(bank.centroid(Domain::kTarget)[0], 1.0);

  const auto u = bank.update(Domain::kTarget, std::vector<double>{0.6, 0.8});
  EXPECT_NEAR(u.pi, 0.6, 1e-15);
  EXPECT_NEAR(bank.centroid(Domain::kTarget)[0], 0.84, 1e-15);
  EXPECT_NEAR(bank.centroid(Domain::kTarget)[1], 0.32, 1e-15);

  gdpa::MemoryBank other(2);
  other.update(Domain::kSource, std::vector<double>{1.0, 0.0});
  other.update(Domain::kSource, std::vector<double>{0.0, 2.0});
  EXPECT_DOUBLE_EQ(other.centroid(Domain::kSource)[0], 0.0);
  EXPECT_DOUBLE_EQ(other.centroid(Domain::kSource)[1], 2.0);
}

TEST(MemoryBank, ZeroNormMeanIsSkipped) {
  gdpa::MemoryBank bank(3);
  dpa::EventLog log;
  const auto u = bank.update(Domain::kSource, std::vector<double>{0.0, 0.0, 0.0}, &log);
  EXPECT_FALSE(u.applied);
  EXPECT_FALSE(bank.initialized(Domain::kSource));
  EXPECT_TRUE(log.has(EventKind::kZeroNormBatchMean));
}

TEST(MemoryBank, UpdateIsBoundedConvexCombination) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    gdpa::MemoryBank bank(4);
    std::vector<double> c(4), x(4);
    for (auto& v : c) v = n(rng);
    for (auto& v : x) v = n(rng);
    bank.update(Domain::kSource, c);
    const auto u = bank.update(Domain::kSource, x);
    const auto nc = bank.centroid(Domain::kSource);
    double norm_old = 0, norm_x = 0, norm_new = 0;
    for (int k = 0; k < 4; ++k) {
      norm_old += c[k] * c[k];
      norm_x += x[k] * x[k];
      norm_new += nc[k] * nc[k];
      if (u.pi >= 0.0) {
        EXPECT_GE(nc[k], std::min(c[k], x[k]) - 1e-12);
        EXPECT_LE(nc[k], std::max(c[k], x[k]) + 1e-12);
      }
    }
    EXPECT_LE(std::sqrt(norm_new),
              std::abs(u.pi) * std::sqrt(norm_old) + (1 - u.pi) * std::sqrt(norm_x) + 1e-12);
  }
}

TEST(LearnableRadius, Softplus) {
  gdpa::LearnableRadius r;
  EXPECT_NEAR(r.radius(Domain::kSource), 0.693147, 1e-6);
  r.raw = {-20.0, 1.0};
  EXPECT_GT(r.radius(Domain::kSource), 0.0);
  EXPECT_NEAR(r.radius(Domain::kSource), 2.06e-9, 1e-11);
  EXPECT_NEAR(r.radius(Domain::kTarget), 1.3132617, 1e-7);
  r.raw = {-800.0, 800.0};
  EXPECT_GT(r.radius(Domain::kSource), 0.0);
  EXPECT_DOUBLE_EQ(r.radius(Domain::kTarget), 800.0);
}

TEST(GlobalSample, Examples) {
  const std::vector<double> far = {2.0, 2.0, 2.0};
  auto s = gdpa::global_sample(far, 1.0);
  EXPECT_TRUE(s.pos.empty());
  EXPECT_EQ(s.neg.size(), 3u);

  const std::vector<double> edge = {1.0};
  s = gdpa::global_sample(edge, 1.0);
  EXPECT_EQ(s.pos.size(), 1u);

  const std::vector<double> mixed = {0.5, 1.5, 0.5, 1.5, 0.5, 1.5, 0.5, 1.5};
  s = gdpa::global_sample(mixed, 1.0);
  EXPECT_EQ(s.pos.size(), 4u);
  EXPECT_EQ(s.neg.size(), 4u);
}

TEST(GlobalSample, FromBank) {
  gdpa::MemoryBank bank(2);
  const auto x = ad::Tensor::from_rows({{0.0, 0.0}, {3.0, 4.0}});
  EXPECT_THROW(gdpa::global_sample(x, bank, Domain::kSource, 1.0), std::logic_error);
  bank.update(Domain::kSource, std::vector<double>{3.0, 4.0});
  const auto s = gdpa::global_sample(x, bank, Domain::kSource, 1.0);
  EXPECT_EQ(s.pos, std::vector<std::size_t>{1});
  EXPECT_EQ(s.neg, std::vector<std::size_t>{0});
}

TEST(GlobalSample, AlwaysPartitions) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> dist(1 + trial % 17);
    for (auto& d : dist) d = u(rng);
    const double d = u(rng);
    const auto s = gdpa::global_sample(dist, d);
    std::set<std::size_t> all(s.pos.begin(), s.pos.end());
    all.insert(s.neg.begin(), s.neg.end());
    EXPECT_EQ(all.size(), dist.size());
    EXPECT_EQ(s.pos.size() + s.neg.size(), dist.size());
    for (auto i : s.pos) EXPECT_LE(dist[i], d);
    for (auto i : s.neg) EXPECT_GT(dist[i], d);
  }
}

TEST(BoundaryLoss, ExamplesAndGradient) {
  {
    ad::Tape tape;
    const std::vector<double> dist = {1.0, 1.0};
    auto d = tape.parameter(ad::Tensor::scalar(1.0));
    EXPECT_DOUBLE_EQ(gdpa::boundary_loss(dist, gdpa::global_sample(dist, 1.0), d).item(), 0.0);
  }
  {
    ad::Tape tape;
    const std::vector<double> dist = {2.0};
    auto d = tape.parameter(ad::Tensor::scalar(1.0));
    EXPECT_DOUBLE_EQ(gdpa::boundary_loss(dist, gdpa::global_sample(dist, 1.0), d).item(), -1.0);
  }
  {
    const std::vector<double> dist = {2.0, 3.0, 4.0, 0.5};
    const auto split = gdpa::global_sample(dist, 1.0);
    auto r = dpa::oracle::check_gradients(
        {ad::Tensor::scalar(1.0)}, [&](ad::Tape&, const std::vector<ad::Var>& v) {
          return gdpa::boundary_loss(dist, split, v[0]);
        });
    EXPECT_LT(r.max_abs_error, 1e-9);
    ad::Tape tape;
    auto d = tape.parameter(ad::Tensor::scalar(1.0));
    EXPECT_DOUBLE_EQ(tape.backward(gdpa::boundary_loss(dist, split, d)).of(d).item(), 0.5);
  }
}

TEST(BoundaryLoss, DescentStabilizesSplit) {
  // Two separated distance bands; plain gradient descent on raw radius.
  std::vector<double> dist;
  for (int i = 0; i < 6; ++i) dist.push_back(0.5 + 0.01 * i);
  for (int i = 0; i < 10; ++i) dist.push_back(2.0 + 0.01 * i);
  double raw = 0.0;
  std::vector<std::size_t> last;
  int stable = 0;
  for (int step = 0; step < 2000 && stable < 100; ++step) {
    ad::Tape tape;
    auto r = tape.parameter(ad::Tensor::scalar(raw));
    auto d = ad::softplus(r);
    const auto split = gdpa::global_sample(dist, d.item());
    raw -= 0.1 * tape.backward(gdpa::boundary_loss(dist, split, d)).of(r).item();
    stable = split.neg == last ? stable + 1 : 0;
    last = split.neg;
  }
  EXPECT_GE(stable, 100);
}

TEST(GdpaWeights, SumToOneAndSymmetry) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> ps(8), pt(8);
    for (auto& p : ps) p = u(rng);
    for (auto& p : pt) p = u(rng);
    const auto w = gdpa::gdpa_weights(ps, pt);
    if (w.fallback) continue;
    EXPECT_EQ(w.w_s + w.w_t, 1.0);
    EXPECT_GT(w.w_s, 0.0);
    EXPECT_LT(w.w_s, 1.0);
  }
  // Mirror-image batches around z = 0.5 give phi_s = 1 - phi_t.
  const std::vector<double> ps = {0.3, 0.4, 0.45};
  const std::vector<double> pt = {0.7, 0.6, 0.55};
  const auto w = gdpa::gdpa_weights(ps, pt, {gdpa::ZMode::kFixed, 0.5});
  EXPECT_NEAR(w.phi_s, 1.0 - w.phi_t, 1e-12);
  EXPECT_NEAR(w.w_s, 0.5, 1e-12);
}

TEST(GdpaWeights, MatchesCdfOracle) {
  const std::vector<double> ps = {0.55, 0.6, 0.7};
  const std::vector<double> pt = {0.4, 0.5, 0.45};
  const auto w = gdpa::gdpa_weights(ps, pt);
  double z = 0.0;
  for (double p : ps) z += p;
  for (double p : pt) z += p;
  z /= 6.0;
  auto phi = [&](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    s = std::sqrt(s / v.size());
    return 0.5 * (1.0 + dpa::oracle::erf((z - m) / (s * std::sqrt(2.0))));
  };
  EXPECT_NEAR(w.z, z, 1e-15);
  EXPECT_NEAR(w.phi_s, phi(ps), 3e-7);
  EXPECT_NEAR(w.phi_t, phi(pt), 3e-7);
  EXPECT_NEAR(w.w_s, phi(ps) / (phi(ps) + 1.0 - phi(pt)), 1e-6);
}

TEST(GdpaWeights, SeparatedClustersFallBack) {
  const std::vector<double> ps = {0.8, 0.8001, 0.7999};
  const std::vector<double> pt = {0.2, 0.2001, 0.1999};
  dpa::EventLog log;
  const auto w = gdpa::gdpa_weights(ps, pt, {gdpa::ZMode::kFixed, 0.5}, &log);
  EXPECT_TRUE(w.fallback);
  EXPECT_EQ(w.w_s, 0.5);
  EXPECT_EQ(w.w_t, 0.5);
  EXPECT_TRUE(log.has(EventKind::kWeightFallback));
}

TEST(GdpaLoss, HandValue) {
  ad::Tape tape;
  auto ps = tape.parameter(ad::Tensor::column({0.5}));
  auto pt = tape.parameter(ad::Tensor::column({0.5}));
  const std::size_t all[] = {0};
  const auto loss = gdpa::gdpa_loss(ps, all, pt, all, 0.5, 0.5, {0.0, false});
  // Two negatives, each contributing 0.5 * -log 0.5.
  EXPECT_NEAR(loss.item(), 0.5 * (0.5 * std::log(2.0) + 0.5 * std::log(2.0)), 1e-15);
  EXPECT_NEAR(loss.item(), 0.3466, 1e-4);
}

TEST(GdpaLoss, FocalFactorVanishesForConfidentSource) {
  ad::Tape tape;
  auto ps = tape.parameter(ad::Tensor::column({1.0 - 1e-9}));
  auto pt = tape.parameter(ad::Tensor::column({0.5}));
  const std::size_t one[] = {0};
  const auto loss = gdpa::gdpa_loss(ps, one, pt, {}, 1.0, 0.0);
  EXPECT_LT(std::abs(loss.item()), 1e-15);
}

TEST(GdpaLoss, EmptyNegativesGiveZeroAndEvent) {
  ad::Tape tape;
  auto ps = tape.parameter(ad::Tensor::column({0.3, 0.4}));
  auto pt = tape.parameter(ad::Tensor::column({0.6}));
  dpa::EventLog log;
  const auto loss = gdpa::gdpa_loss(ps, {}, pt, {}, 0.5, 0.5, {}, &log);
  EXPECT_EQ(loss.item(), 0.0);
  EXPECT_TRUE(log.has(EventKind::kEmptyGlobalNegative));
  EXPECT_EQ(tape.backward(loss).of(ps), ad::Tensor(2, 1, 0.0));
}

TEST(GdpaLoss, LiteralFormDiffers) {
  ad::Tape tape;
  auto ps = tape.parameter(ad::Tensor::column({0.4}));
  auto pt = tape.parameter(ad::Tensor::column({0.3}));
  const std::size_t one[] = {0};
  const double standard = gdpa::gdpa_loss(ps, one, pt, one, 0.5, 0.5, {2.0, false}).item();
  const double literal = gdpa::gdpa_loss(ps, one, pt, one, 0.5, 0.5, {2.0, true}).item();
  const double src = -0.5 * std::pow(0.6, 2) * std::log(0.4);
  EXPECT_NEAR(standard, (src - 0.5 * std::pow(0.3, 2) * std::log(0.7)) / 2.0, 1e-14);
  EXPECT_NEAR(literal, (src - 0.5 * std::pow(0.3, 2) * (1.0 - std::log(0.3))) / 2.0, 1e-14);
}

TEST(GdpaLoss, FiniteDifference) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ps = dpa::oracle::random_tensor(rng, 5, 1, 0.05, 0.95);
    const auto pt = dpa::oracle::random_tensor(rng, 4, 1, 0.05, 0.95);
    const std::size_t neg_s[] = {0, 2, 4};
    const std::size_t neg_t[] = {1, 3};
    auto r = dpa::oracle::check_gradients({ps, pt}, [&](ad::Tape&, const std::vector<ad::Var>& v) {
      return gdpa::gdpa_loss(v[0], neg_s, v[1], neg_t, 0.3, 0.7);
    });
    EXPECT_LT(r.max_rel_error, 1e-5);
  }
}
