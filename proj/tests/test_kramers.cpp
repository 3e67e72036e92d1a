#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wk/kramers.hpp"

using namespace wk;

namespace {

Topology topo1(const char* src, double lo, double hi, int n) {
  return analyze_topology(parse_field(src, 1), Grid(Domain(1, {lo}, {hi}), {n}));
}

Topology topo2(const char* src, std::vector<double> lo, std::vector<double> hi, std::vector<int> n) {
  return analyze_topology(parse_field(src, 2), Grid(Domain(2, lo, hi), n));
}

}  // namespace

TEST_SUITE("kramers") {

TEST_CASE("saddle constants of the double well") {
  auto t = topo1("(x1^2-1)^2", -1.7, 1.7, 2049);
  auto p = build_prediction(t.labeling, t.crits);
  REQUIRE(p.predictions.size() == 2);
  const auto& k1 = p.predictions[0];
  const auto& k2 = p.predictions[1];

  CHECK(k1.energy == doctest::Approx(oracle::dw_E1).epsilon(1e-12));
  CHECK(k1.gamma == 0.5);
  CHECK(k1.p == 0.25);
  CHECK(k1.K2 == 0.0);
  REQUIRE(k1.contributions.size() == 2);
  for (const auto& c : k1.contributions) {
    CHECK(c.kind == SaddleKind::boundary_noncritical);
    CHECK(c.h_power == 0.5);
    CHECK(c.c == doctest::Approx(oracle::dw_c_boundary).epsilon(1e-10));
  }
  CHECK(k1.contributions[0].c == doctest::Approx(k1.contributions[1].c).epsilon(1e-13));

  CHECK(k2.energy == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(k2.gamma == 1.0);
  CHECK(k2.K1 == 0.0);
  REQUIRE(k2.contributions.size() == 1);
  CHECK(k2.contributions[0].kind == SaddleKind::interior);
  CHECK(k2.K2 == doctest::Approx(oracle::dw_c_interior).epsilon(1e-10));
  CHECK_FALSE(k2.sqrt_h_remainder);
  CHECK(p.cross.empty());
}

TEST_CASE("boundary saddle carries the doubled constant") {
  auto t = topo1("(x1^2-1)^2", -1.7, 0, 1025);
  auto p = build_prediction(t.labeling, t.crits);
  REQUIRE(p.predictions.size() == 1);
  const auto& k = p.predictions[0];
  REQUIRE(k.contributions.size() == 1);
  CHECK(k.contributions[0].kind == SaddleKind::boundary_critical);
  CHECK(k.K2 == doctest::Approx(oracle::hw_c).epsilon(1e-10));
  CHECK(k.gamma == 1.0);
  CHECK(k.sqrt_h_remainder);
  CHECK(p.m_star == 1);
}

TEST_CASE("single well") {
  auto t = topo1("x1^2", -1, 1, 257);
  auto p = build_prediction(t.labeling, t.crits);
  REQUIRE(p.predictions.size() == 1);
  const auto& k = p.predictions[0];
  CHECK(k.gamma == 0.5);
  CHECK(k.K1 == doctest::Approx(oracle::sw_K1).epsilon(1e-10));
  for (double h : {0.3, 0.1, 0.01})
    CHECK(k.lambda(h) == doctest::Approx(std::sqrt(h) * oracle::sw_K1 * std::exp(-2 / h)).epsilon(1e-10));
}

TEST_CASE("evaluator identities") {
  auto t = topo1("x1^6/6 - 5*x1^4/4 + 2*x1^2 + 0.1*x1", -2.6, 2.6, 2049);
  auto p = build_prediction(t.labeling, t.crits);
  REQUIRE(p.predictions.size() == 3);
  for (const auto& k : p.predictions) {
    CHECK((k.K1 != 0.0 || k.K2 != 0.0));
    CHECK((k.gamma == 0.5) == (k.K1 != 0.0));
    double pref = k.lambda(0.2) * std::pow(0.2, -k.gamma) * std::exp(2 * k.energy / 0.2);
    for (double h : {0.3, 0.1, 0.05}) {
      CHECK(k.lambda(h) ==
            doctest::Approx((std::sqrt(h) * k.K1 + h * k.K2) * std::exp(-2 * k.energy / h)).epsilon(1e-13));
      CHECK(k.lambda_from_a(h) == doctest::Approx(k.lambda(h)).epsilon(1e-12));
      if (k.K1 == 0.0 || k.K2 == 0.0)
        CHECK(k.lambda(h) * std::pow(h, -k.gamma) * std::exp(2 * k.energy / h) == doctest::Approx(pref).epsilon(1e-12));
    }
  }
  // predictions come in the order of the eigenvalues they describe
  const double h = 1e-3;
  for (std::size_t j = 1; j < p.predictions.size(); ++j) {
    const auto& a = p.predictions[j - 1];
    const auto& b = p.predictions[j];
    CHECK(std::log(std::pow(h, 2 * a.p)) - 2 * a.energy / h <= std::log(std::pow(h, 2 * b.p)) - 2 * b.energy / h);
  }
}

TEST_CASE("shared saddles produce cross terms") {
  auto t = topo1("x1^6/6 - 5*x1^4/4 + 2*x1^2", -2.6, 2.6, 2049);
  auto p = build_prediction(t.labeling, t.crits);
  REQUIRE(p.predictions.size() == 3);
  REQUIRE_FALSE(p.cross.empty());
  for (const auto& c : p.cross) {
    const KramersPrediction *kx = nullptr, *ky = nullptr;
    for (const auto& k : p.predictions) {
      if (k.minimum == c.x) kx = &k;
      if (k.minimum == c.y) ky = &k;
    }
    REQUIRE(kx);
    REQUIRE(ky);
    double expected = 0.0, mirrored = 0.0;
    for (const auto& a : kx->contributions)
      for (const auto& b : ky->contributions)
        if (a.saddle == b.saddle) {
          expected += std::sqrt(a.c * b.c);
          mirrored += std::sqrt(b.c * a.c);
        }
    CHECK(c.K > 0.0);
    CHECK(c.K == doctest::Approx(expected).epsilon(1e-14));
    CHECK(mirrored == expected);
  }
  CHECK(p.m_star < 3);
  CHECK_FALSE(p.prefix_failures.empty());
}

TEST_CASE("double well prefix") {
  auto t = topo1("(x1^2-1)^2", -1.7, 1.7, 2049);
  auto p = build_prediction(t.labeling, t.crits);
  // both minima share the lowest value, so the strict nesting condition stops at 1
  CHECK(p.m_star == 1);
  CHECK(p.prefix_failures.size() == 1);
}

TEST_CASE("principal eigenvalue formula") {
  auto t = topo2("(x1^2-1)^2 + x2^2", {-1.7, -1.5}, {0, 1.5}, {129, 97});
  auto f = principal_eigenvalue_formula(t);
  REQUIRE(f.applicable);
  CHECK(f.energy == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.prefactor == doctest::Approx(oracle::half_domain_prefactor).epsilon(1e-10));
  auto p = build_prediction(t.labeling, t.crits);
  REQUIRE(p.predictions.size() == 1);
  for (double h : {0.5, 0.3, 0.1, 0.03}) CHECK(f.lambda(h) == doctest::Approx(p.predictions[0].lambda(h)).epsilon(1e-12));

  auto dw = topo1("(x1^2-1)^2", -1.7, 1.7, 1025);
  auto g = principal_eigenvalue_formula(dw);
  CHECK_FALSE(g.applicable);
  CHECK_FALSE(g.reason.empty());

  // corners at the saddle level on the narrow domain
  auto narrow = topo2("(x1^2-1)^2 + x2^2", {-1.7, -1}, {0, 1}, {129, 65});
  CHECK_FALSE(principal_eigenvalue_formula(narrow).applicable);
}

TEST_CASE("predictions serialize") {
  auto t = topo1("(x1^2-1)^2", -1.7, 1.7, 513);
  auto j = to_json(build_prediction(t.labeling, t.crits));
  REQUIRE(j["predictions"].size() == 2);
  for (const char* key : {"E", "gamma", "K1", "K2", "A1", "A2", "B"}) CHECK(j["predictions"][0].contains(key));
}

}
