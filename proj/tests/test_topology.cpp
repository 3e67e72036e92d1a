#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "wk/error.hpp"
#include "wk/kramers.hpp"
#include "wk/topology.hpp"

using namespace wk;

namespace {

struct Fixture {
  std::string source;
  double lo, hi;
  std::function<double(double)> f, df;
};

// Interior local maxima of f on (lo, hi), by sign changes of f' and bisection.
std::vector<double> analytic_merge_levels(const Fixture& fx) {
  std::vector<double> levels;
  const int n = 19997;  // keeps sample points off the symmetric critical points
  double step = (fx.hi - fx.lo) / n;
  for (int i = 1; i < n - 1; ++i) {
    double a = fx.lo + i * step, b = a + step;
    if (fx.df(a) > 0 && fx.df(b) <= 0) {
      for (int it = 0; it < 100; ++it) {
        double m = 0.5 * (a + b);
        (fx.df(m) > 0 ? a : b) = m;
      }
      levels.push_back(fx.f(0.5 * (a + b)));
    }
  }
  std::sort(levels.begin(), levels.end());
  return levels;
}

Topology topo1(const char* src, double lo, double hi, int n, const TopologyOptions& opt = {}) {
  Grid g(Domain(1, {lo}, {hi}), {n});
  return analyze_topology(parse_field(src, 1), g, opt);
}

bool disjoint(const std::vector<char>& a, const std::vector<char>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && b[i]) return false;
  return true;
}

bool subset(const std::vector<char>& a, const std::vector<char>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

void check_labeling(const Topology& t) {
  const auto& W = t.labeling.wells;
  std::set<int> mins;
  std::set<std::vector<int>> jsets;
  std::set<std::vector<char>> masks;
  for (const auto& w : W) {
    CHECK(w.energy > 0.0);
    for (int z : w.saddles) CHECK(std::abs(t.crits[z].f - w.level) <= t.labeling.tol_level + 1e-12);
    mins.insert(w.minimum);
    auto s = w.saddles;
    std::sort(s.begin(), s.end());
    jsets.insert(s);
    masks.insert(w.member);
  }
  CHECK(mins.size() == W.size());
  CHECK(jsets.size() == W.size());
  CHECK(masks.size() == W.size());
  for (std::size_t a = 0; a < W.size(); ++a)
    for (std::size_t b = a + 1; b < W.size(); ++b) {
      std::vector<int> common;
      auto sa = W[a].saddles, sb = W[b].saddles;
      std::sort(sa.begin(), sa.end());
      std::sort(sb.begin(), sb.end());
      std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
      if (common.empty()) {
        bool ok = disjoint(W[a].member, W[b].member) || (subset(W[a].member, W[b].member) && W[a].member != W[b].member) ||
                  (subset(W[b].member, W[a].member) && W[a].member != W[b].member);
        CHECK(ok);
      } else {
        CHECK(std::abs(W[a].level - W[b].level) <= t.labeling.tol_level + 1e-12);
        CHECK(disjoint(W[a].member, W[b].member));
      }
    }
}

}  // namespace

TEST_SUITE("topology") {

TEST_CASE("critical points of the double well") {
  auto t = topo1("(x1^2-1)^2", -1.7, 1.7, 1025);
  int minima = 0, saddles = 0;
  for (const auto& c : t.crits) {
    if (c.kind != CritKind::interior) continue;
    if (c.index == 0) {
      ++minima;
      CHECK(std::abs(std::abs(c.x[0]) - 1.0) < 1e-10);
    } else {
      ++saddles;
      CHECK(std::abs(c.x[0]) < 1e-10);
      CHECK(c.mu_d == doctest::Approx(-4.0));
    }
  }
  CHECK(minima == 2);
  CHECK(saddles == 1);
}

TEST_CASE("critical points in 2-D") {
  Grid g(Domain(2, {-1.7, -1}, {1.7, 1}), {129, 65});
  auto crits = find_critical_points(parse_field("(x1^2-1)^2 + x2^2", 2), g);
  int interior = 0;
  for (const auto& c : crits) {
    if (c.kind != CritKind::interior) continue;
    ++interior;
    if (c.index == 1) {
      CHECK(c.x.norm() < 1e-10);
      CHECK(c.eigenvalues[0] == doctest::Approx(-4.0));
      CHECK(c.eigenvalues[1] == doctest::Approx(2.0));
    } else {
      CHECK(std::abs(std::abs(c.x[0]) - 1) < 1e-10);
    }
  }
  CHECK(interior == 3);
}

TEST_CASE("merge events match sublevel intervals on 1-D fixtures") {
  using oracle::sextic;
  using oracle::sextic_d1;
  std::vector<Fixture> fixtures = {
      {"(x1^2-1)^2", -1.7, 1.7, oracle::dw, oracle::dw_d1},
      {"x1^2", -1, 1, [](double x) { return x * x; }, [](double x) { return 2 * x; }},
      {"(x1^2-1)^2", -1.7, 0, oracle::dw, oracle::dw_d1},
      {"(x1^2-1)^2 + 0.3*x1", -1.8, 1.8, [](double x) { return oracle::dw(x) + 0.3 * x; },
       [](double x) { return oracle::dw_d1(x) + 0.3; }},
      {"x1^6/6 - 5*x1^4/4 + 2*x1^2 + 0.1*x1", -2.6, 2.6, [](double x) { return sextic(x, 0.1); },
       [](double x) { return sextic_d1(x, 0.1); }},
  };
  std::vector<std::size_t> expected_events = {1, 0, 0, 1, 2};
  for (std::size_t k = 0; k < fixtures.size(); ++k) {
    const auto& fx = fixtures[k];
    CAPTURE(fx.source);
    Grid g(Domain(1, {fx.lo}, {fx.hi}), {2049});
    auto data = evaluate_on_grid(parse_field(fx.source, 1), g);
    auto ms = build_merge_structure(g, data);
    auto levels = analytic_merge_levels(fx);
    REQUIRE(levels.size() == expected_events[k]);
    REQUIRE(ms.events.size() == levels.size());
    for (std::size_t e = 0; e < levels.size(); ++e) {
      CHECK(std::abs(ms.events[e].level - levels[e]) < 1e-4);
      if (e > 0) CHECK(ms.events[e].level >= ms.events[e - 1].level);
    }
    CHECK(ms.births.size() == levels.size() + 1);
    if (k == 0) CHECK(std::abs(g.coords(ms.events[0].witness)[0]) < 2 * g.dx(0));
  }
}

TEST_CASE("separating saddles and boundary classification") {
  auto dw = topo1("(x1^2-1)^2", -1.7, 1.7, 1025);
  REQUIRE(dw.ssp.interior.size() == 1);
  CHECK(std::abs(dw.crits[dw.ssp.interior[0]].x[0]) < 1e-10);
  REQUIRE(dw.ssp.boundary.size() == 2);
  for (const auto& b : dw.ssp.boundary) {
    CHECK(b.kase == 'a');
    CHECK(dw.crits[b.crit].dn_f == doctest::Approx(oracle::dw_dnf));
  }

  auto sw = topo1("x1^2", -1, 1, 257);
  CHECK(sw.ssp.interior.empty());
  CHECK(sw.ssp.boundary.size() == 2);

  auto hw = topo1("(x1^2-1)^2", -1.7, 0, 1025);
  REQUIRE(hw.ssp.boundary.size() == 1);
  CHECK(hw.ssp.boundary[0].kase == 'b');
  CHECK(hw.crits[hw.ssp.boundary[0].crit].mu_d == doctest::Approx(-4.0));
}

TEST_CASE("well labeling of the reference fixtures") {
  auto dw = topo1("(x1^2-1)^2", -1.7, 1.7, 2049);
  REQUIRE(dw.labeling.wells.size() == 2);
  const auto& w1 = dw.labeling.wells[0];
  const auto& w2 = dw.labeling.wells[1];
  CHECK(w1.tier == 1);
  CHECK(dw.crits[w1.minimum].x[0] == doctest::Approx(-1.0));
  CHECK(w1.energy == doctest::Approx(oracle::dw_E1));
  CHECK(w1.saddles.size() == 2);
  CHECK(w2.tier == 2);
  CHECK(dw.crits[w2.minimum].x[0] == doctest::Approx(1.0));
  CHECK(w2.energy == doctest::Approx(1.0));
  REQUIRE(w2.saddles.size() == 1);
  CHECK(std::abs(dw.crits[w2.saddles[0]].x[0]) < 1e-10);
  check_labeling(dw);

  auto sw = topo1("x1^2", -1, 1, 257);
  REQUIRE(sw.labeling.wells.size() == 1);
  CHECK(sw.labeling.wells[0].energy == doctest::Approx(1.0));
  CHECK(sw.labeling.wells[0].saddles.size() == 2);
  check_labeling(sw);

  auto hw = topo1("(x1^2-1)^2", -1.7, 0, 1025);
  REQUIRE(hw.labeling.wells.size() == 1);
  CHECK(hw.labeling.wells[0].energy == doctest::Approx(1.0));
  CHECK(hw.hypotheses.pass());
  check_labeling(hw);

  auto three = topo1("x1^6/6 - 5*x1^4/4 + 2*x1^2", -2.6, 2.6, 2049);
  CHECK(three.labeling.wells.size() == 3);
  check_labeling(three);

  auto tilted = topo1("x1^6/6 - 5*x1^4/4 + 2*x1^2 + 0.1*x1", -2.6, 2.6, 2049);
  CHECK(tilted.labeling.wells.size() == 3);
  check_labeling(tilted);

  Grid g2(Domain(2, {-1.7, -1.5}, {1.7, 1.5}), {129, 97});
  auto dw2 = analyze_topology(parse_field("(x1^2-1)^2 + x2^2", 2), g2);
  CHECK(dw2.labeling.wells.size() == 2);
  check_labeling(dw2);
}

TEST_CASE("the choice of argmin representative does not change the predictions") {
  for (const char* src : {"(x1^2-1)^2", "x1^6/6 - 5*x1^4/4 + 2*x1^2"}) {
    CAPTURE(src);
    TopologyOptions lo, hi;
    lo.tie_break = TieBreak::lexicographic_min;
    hi.tie_break = TieBreak::lexicographic_max;
    auto a = topo1(src, -2.6, 2.6, 2049, lo);
    auto b = topo1(src, -2.6, 2.6, 2049, hi);
    CHECK(a.crits[a.labeling.wells[0].minimum].x[0] < 0);
    CHECK(b.crits[b.labeling.wells[0].minimum].x[0] > 0);
    auto pa = build_prediction(a.labeling, a.crits);
    auto pb = build_prediction(b.labeling, b.crits);
    REQUIRE(pa.predictions.size() == pb.predictions.size());
    std::multiset<std::pair<double, double>> ma, mb;
    for (const auto& k : pa.predictions) ma.emplace(std::round(k.energy * 1e9) / 1e9, k.gamma);
    for (const auto& k : pb.predictions) mb.emplace(std::round(k.energy * 1e9) / 1e9, k.gamma);
    CHECK(ma == mb);
  }
}

TEST_CASE("tier-1 wells are disjoint") {
  auto t = topo1("x1^6/6 - 5*x1^4/4 + 2*x1^2 + 0.1*x1", -2.6, 2.6, 2049);
  std::vector<const WellRecord*> tier1;
  for (const auto& w : t.labeling.wells)
    if (w.tier == 1) tier1.push_back(&w);
  for (std::size_t a = 0; a < tier1.size(); ++a)
    for (std::size_t b = a + 1; b < tier1.size(); ++b) CHECK(disjoint(tier1[a]->member, tier1[b]->member));
  for (const auto* w : tier1) {
    for (std::size_t n = 0; n < w->member.size(); ++n)
      if (w->member[n]) CHECK_FALSE(t.grid.is_boundary(n));
  }
}

TEST_CASE("energies converge under refinement") {
  const char* src = "(x1^2-1)^2 + 0.3*x1";
  double e[3];
  int n[3] = {257, 513, 1025};
  for (int k = 0; k < 3; ++k) {
    auto t = topo1(src, -1.8, 1.8, n[k]);
    e[k] = t.labeling.wells.back().energy;
  }
  CHECK(std::abs(e[1] - e[2]) <= std::abs(e[0] - e[1]) + 1e-12);
  CHECK(std::abs(e[2] - e[1]) < 1e-8);
}

TEST_CASE("hypotheses") {
  auto hw = topo1("(x1^2-1)^2", -1.7, 0, 1025);
  CHECK(hw.hypotheses.h1);

  Grid half(Domain(2, {-1.7, -1}, {0, 1}), {129, 65});
  auto t = analyze_topology(parse_field("(x1^2-1)^2 + x2^2", 2), half);
  CHECK(t.hypotheses.h1);
  bool saw_saddle = false;
  for (const auto& item : t.hypotheses.items)
    if (item.hypothesis == "H1") {
      saw_saddle = true;
      CHECK(item.angle < 1e-12);
    }
  CHECK(saw_saddle);

  Grid rot(Domain(2, {-2, -1}, {0, 1}), {129, 65});
  auto r = analyze_topology(parse_field("x1^2/2 + x2^2/2 - 2*x1*x2 + (x1+x2)^4/8", 2), rot);
  CHECK_FALSE(r.hypotheses.h1);
  CHECK_FALSE(r.hypotheses.pass());
  CHECK_FALSE(r.hypotheses.violations.empty());
  bool quarter = false;
  for (const auto& item : r.hypotheses.items)
    if (!item.pass) quarter = quarter || std::abs(item.angle - oracle::pi / 4) < 1e-6;
  CHECK(quarter);
}

TEST_CASE("degenerate and empty inputs are rejected") {
  try {
    topo1("x1^4", -1, 1, 257);
    FAIL("expected a degenerate critical point");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate);
  }
  CHECK_THROWS_AS(topo1("x1", -1, 1, 257), Error);
}

TEST_CASE("topology serializes") {
  auto t = topo1("(x1^2-1)^2", -1.7, 1.7, 513);
  auto j = to_json(t);
  CHECK(j.contains("critical_points"));
  CHECK(j.contains("hypotheses"));
  CHECK(j["hypotheses"]["pass"].get<bool>());
}

}
