#include <random>

#include "doctest.h"
#include "kiw/geometry.hpp"

using namespace kiw;

TEST_CASE("euclidean atlas has one chart covering everything") {
  const ChartAtlas a = ChartAtlas::euclidean(3);
  CHECK(locate_chart(a, Vec{{1e5, -3.0, 2.0}}, 0) == 0);
}

TEST_CASE("sphere: point near the chart origin stays in its chart") {
  const ChartAtlas a = ChartAtlas::sphere2();
  CHECK(locate_chart(a, Vec{{0.1, -0.2}}, 0) == 0);
  CHECK(locate_chart(a, Vec{{0.1, -0.2}}, 1) == 1);
  // Far out in chart 0 is only covered by chart 1.
  CHECK(locate_chart(a, Vec{{3.0, 0.5}}, 0) == 1);
}

TEST_CASE("lowest id wins when W-balls overlap") {
  const ChartAtlas a = ChartAtlas::euclidean_patches(2, {Vec{{5.0, 0.0}}, Vec{{0.0, 0.0}},
                                                         Vec{{0.5, 0.0}}}, 1.0);
  CHECK(locate_chart(a, Vec{{0.3, 0.0}}, 2) == 1);
  CHECK(locate_chart(a, Vec{{5.2, 0.0}}, 1) == 0);
  CHECK_THROWS_AS(locate_chart(a, Vec{{20.0, 0.0}}, 0), NoCoveringChart);
}

TEST_CASE("transitions") {
  const ChartAtlas s = ChartAtlas::sphere2();
  const Vec x{{0.6, -0.8}};
  CHECK((transition(s, 0, 0, x) - x).norm() == 0.0);
  CHECK((transition(s, 0, 1, x) - x / x.squaredNorm()).norm() <= 1e-15);
  CHECK_THROWS_AS(transition(s, 0, 1, Vec::Zero(2)), OutsideOverlap);
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const Vec p{{u(gen), u(gen)}};
    if (p.norm() < 0.05) continue;
    const Vec back = transition(s, 1, 0, transition(s, 0, 1, p));
    CHECK((back - p).norm() <= 1e-12 * (1.0 + p.norm()));
  }
}

TEST_CASE("charts invert their coordinate maps") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> g;
  const ChartAtlas s = ChartAtlas::sphere2();
  for (int i = 0; i < 100; ++i) {
    Vec p{{g(gen), g(gen), g(gen)}};
    p.normalize();
    for (ChartId c : {0, 1}) {
      if ((c == 0 && p[2] > 0.99) || (c == 1 && p[2] < -0.99)) continue;
      CHECK((s.from_coords(c, s.to_coords(c, p)) - p).norm() <= 1e-12);
    }
    const ChartId c = locate_chart(s, s.to_coords(0, p[2] > 0.99 ? -p : p), 0);
    CHECK((c == 0 || c == 1));
  }
  for (int n = 1; n <= 3; ++n) {
    const ChartAtlas t = ChartAtlas::torus(n);
    CHECK(t.size() == (1 << n));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      Vec p(n);
      for (int k = 0; k < n; ++k) p[k] = u(gen);
      for (ChartId c = 0; c < t.size(); ++c)
        CHECK((t.from_coords(c, t.to_coords(c, p)) - p).norm() <= 1e-12);
      // W-balls cover the torus.
      CHECK_NOTHROW(locate_chart(t, t.to_coords(0, p), 0));
    }
  }
}

TEST_CASE("chart radii are (r, 2r, 3r)") {
  for (const ChartAtlas& a : {ChartAtlas::sphere2(), ChartAtlas::torus(2)}) {
    for (ChartId c = 0; c < a.size(); ++c) {
      const Chart& ch = a.chart(c);
      CHECK(ch.r > 0.0);
      CHECK(ch.radius_v() == 2.0 * ch.r);
      CHECK(ch.radius_u() == 3.0 * ch.r);
    }
  }
}

TEST_CASE("transition Jacobian matches finite differences") {
  const ChartAtlas s = ChartAtlas::sphere2();
  const Vec x{{0.7, 1.1}};
  const Mat J = s.transition_jacobian(0, 1, x);
  const double e = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Vec d = Vec::Zero(2);
    d[j] = e;
    const Vec fd = (s.transition(0, 1, Vec(x + d)) - s.transition(0, 1, Vec(x - d))) / (2 * e);
    CHECK((J.col(j) - fd).norm() <= 1e-8);
  }
  const ChartAtlas t = ChartAtlas::torus(2);
  CHECK((t.transition_jacobian(0, 3, Vec{{0.4, 0.3}}) - Mat::Identity(2, 2)).norm() == 0.0);
  CHECK((t.transition(0, 3, Vec{{0.1, 0.3}}) - Vec{{0.1, 0.3}}).norm() == 0.0);
  CHECK((t.transition(0, 3, Vec{{-0.3, 0.2}}) - Vec{{0.7, 0.2}}).norm() <= 1e-15);
}
