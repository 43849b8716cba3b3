#include "dronenav/uwb.hpp"

#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>

using namespace dronenav;

namespace {

const std::vector<Vec3> kSquare{{0, 0, 0}, {10, 0, 0}, {10, 10, 0}, {0, 10, 0}};

// Forward oracle written straight from the range-difference definitions.
TdoaSample forward_oracle(const Vec3& tag, const std::vector<Vec3>& anchors) {
  TdoaSample s;
  s.base_range = (tag - anchors[0]).norm();
  s.range_differences.resize(static_cast<Eigen::Index>(anchors.size() - 1));
  for (std::size_t i = 1; i < anchors.size(); ++i) {
    s.range_differences(static_cast<Eigen::Index>(i - 1)) = (tag - anchors[i]).norm() - s.base_range;
  }
  return s;
}

struct Geometry {
  std::vector<Vec3> anchors;
  Vec3 tag;
};

// 4-8 anchors spread over a pad-sized patch with some height variation, tag
// above them inside the operating radius.
Geometry random_geometry(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(4, 8);
  std::uniform_real_distribution<double> xy(-5, 5), z(0, 0.6), txy(-4, 4), tz(1.0, 7.0);
  for (;;) {
    Geometry g;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) g.anchors.emplace_back(xy(rng), xy(rng), z(rng));
    g.tag = Vec3(txy(rng), txy(rng), tz(rng));
    try {
      const AnchorSet set(g.anchors, kSpeedOfLight, 20.0);
      // Keep clear of layouts whose anchors nearly line up.
      Eigen::MatrixXd m(3, n);
      for (int i = 0; i < n; ++i) m.col(i) = g.anchors[static_cast<std::size_t>(i)] - set.centroid();
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
      if (svd.singularValues()(1) < 1.0) continue;
      if ((g.tag - set.centroid()).dot(set.plane_normal()) < 0.5) continue;
      return g;
    } catch (const DegenerateGeometryError&) {
    }
  }
}

}  // namespace

TEST(AnchorSet, RejectsDegenerateLayouts) {
  EXPECT_THROW(AnchorSet({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}), DegenerateGeometryError);
  EXPECT_THROW(AnchorSet({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {5, 5, 5}}), DegenerateGeometryError);
  const AnchorSet square(kSquare);
  EXPECT_TRUE(square.coplanar());
  EXPECT_LT((square.plane_normal() - Vec3::UnitZ()).norm(), 1e-12);
  EXPECT_LT((square.centroid() - Vec3(5, 5, 0)).norm(), 1e-12);
}

TEST(TdoaForward, Examples) {
  const AnchorSet square(kSquare, kSpeedOfLight, 20.0);
  auto s = tdoa_forward(kSquare[0], square);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->base_range, 0.0);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(s->range_differences(i - 1), kSquare[static_cast<std::size_t>(i)].norm(), 1e-12);

  s = tdoa_forward(Vec3(5, 5, 3), square);
  ASSERT_TRUE(s);
  EXPECT_NEAR(s->base_range, std::sqrt(59.0), 1e-12);
  EXPECT_NEAR(s->base_range, 7.681, 1e-3);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s->range_differences(i), 0.0, 1e-12);

  // Equidistant from the first two anchors.
  s = tdoa_forward(Vec3(5, -3, 2), square);
  ASSERT_TRUE(s);
  EXPECT_NEAR(s->range_differences(0), 0.0, 1e-12);
}

TEST(TdoaForward, DropsOutBeyondOperatingRadius) {
  const AnchorSet set(kSquare, kSpeedOfLight, 10.0);
  EXPECT_TRUE(tdoa_forward(Vec3(5, 5, 3), set));
  EXPECT_FALSE(tdoa_forward(Vec3(5, 5, 12), set));
}

TEST(TdoaFromArrivalTimes, MatchesGeometry) {
  const Vec3 tag(2, 3, 4);
  const double c = kSpeedOfLight;
  const double t0 = 0.0;
  Eigen::VectorXd t(4);
  for (int i = 0; i < 4; ++i) t(i) = t0 + (tag - kSquare[static_cast<std::size_t>(i)]).norm() / c;
  const TdoaSample s = tdoa_from_arrival_times(t, t0, c, 1.5);
  const TdoaSample oracle = forward_oracle(tag, kSquare);
  EXPECT_NEAR(s.base_range, oracle.base_range, 1e-7);
  EXPECT_LT((s.range_differences - oracle.range_differences).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_EQ(s.timestamp, 1.5);
}

TEST(Multilaterate, SquareRoundTrip) {
  const AnchorSet set(kSquare, kSpeedOfLight, 20.0);
  const MultilaterationResult r = multilaterate(forward_oracle(Vec3(5, 5, 3), kSquare), set);
  EXPECT_LT((r.position - Vec3(5, 5, 3)).norm(), 1e-6);
  EXPECT_LT(r.residual, 1e-9);
  EXPECT_TRUE(r.mirror_ambiguous);
}

TEST(Multilaterate, SymmetryAxis) {
  const AnchorSet set(kSquare, kSpeedOfLight, 20.0);
  TdoaSample s;
  s.range_differences = Eigen::VectorXd::Zero(3);
  s.base_range = 9.0;
  const MultilaterationResult r = multilaterate(s, set);
  EXPECT_NEAR(r.position.x(), 5.0, 1e-9);
  EXPECT_NEAR(r.position.y(), 5.0, 1e-9);
  EXPECT_NEAR(r.position.z(), std::sqrt(81.0 - 50.0), 1e-9);
}

TEST(Multilaterate, OracleEquivalenceOnRandomGeometries) {
  std::mt19937_64 rng(107);
  for (int i = 0; i < 10000; ++i) {
    const Geometry g = random_geometry(rng);
    const AnchorSet set(g.anchors, kSpeedOfLight, 20.0);
    const auto sample = tdoa_forward(g.tag, set);
    ASSERT_TRUE(sample);
    const MultilaterationResult r = multilaterate(*sample, set);
    ASSERT_LT((r.position - g.tag).norm(), 1e-6) << "trial " << i;
  }
}

TEST(Multilaterate, CostHistoryNonIncreasing) {
  std::mt19937_64 rng(109);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int i = 0; i < 500; ++i) {
    const Geometry g = random_geometry(rng);
    const AnchorSet set(g.anchors, kSpeedOfLight, 20.0);
    TdoaSample s = forward_oracle(g.tag, g.anchors);
    for (Eigen::Index k = 0; k < s.range_differences.size(); ++k) s.range_differences(k) += noise(rng);
    const MultilaterationResult r = multilaterate(s, set);
    ASSERT_FALSE(r.cost_history.empty());
    for (std::size_t k = 1; k < r.cost_history.size(); ++k) EXPECT_LE(r.cost_history[k], r.cost_history[k - 1]);
  }
}

TEST(Multilaterate, TranslationEquivariance) {
  std::mt19937_64 rng(113);
  std::uniform_real_distribution<double> off(-1000, 1000);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int i = 0; i < 500; ++i) {
    const Geometry g = random_geometry(rng);
    const Vec3 shift(off(rng), off(rng), off(rng) / 10);
    const AnchorSet set(g.anchors, kSpeedOfLight, 20.0);
    TdoaSample s = forward_oracle(g.tag, g.anchors);
    for (Eigen::Index k = 0; k < s.range_differences.size(); ++k) s.range_differences(k) += noise(rng);
    const MultilaterationResult a = multilaterate(s, set);
    const MultilaterationResult b = multilaterate(s, set.translated(shift));
    EXPECT_LT((b.position - (a.position + shift)).norm(), 1e-9) << "trial " << i;
  }
}

TEST(Multilaterate, NoisyMedianError) {
  std::mt19937_64 rng(127);
  std::normal_distribution<double> noise(0.0, 0.05);
  const AnchorSet set(kSquare, kSpeedOfLight, 20.0);
  const Vec3 tag(5, 5, 3);
  std::vector<double> errors;
  for (int i = 0; i < 1000; ++i) {
    TdoaSample s = forward_oracle(tag, kSquare);
    for (Eigen::Index k = 0; k < s.range_differences.size(); ++k) s.range_differences(k) += noise(rng);
    errors.push_back((multilaterate(s, set).position - tag).norm());
  }
  std::nth_element(errors.begin(), errors.begin() + 500, errors.end());
  EXPECT_LT(errors[500], 0.25);
}

TEST(Multilaterate, RejectsMalformedSamples) {
  const AnchorSet set(kSquare);
  TdoaSample s;
  s.range_differences = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(multilaterate(s, set), std::invalid_argument);
  s.range_differences = Eigen::VectorXd::Constant(3, std::nan(""));
  EXPECT_THROW(multilaterate(s, set), std::invalid_argument);
}
