#include "wk/kramers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "wk/error.hpp"

namespace wk {

namespace {
const double kPi = 3.14159265358979323846;
}

const char* to_string(SaddleKind k) {
  switch (k) {
    case SaddleKind::boundary_noncritical:
      return "boundary_noncritical";
    case SaddleKind::boundary_critical:
      return "boundary_critical";
    case SaddleKind::interior:
      return "interior";
  }
  return "?";
}

double KramersPrediction::lambda(double h) const {
  return (std::sqrt(h) * K1 + h * K2) * std::exp(-2.0 * energy / h);
}

double KramersPrediction::lambda_from_a(double h) const {
  return ((A1 + std::sqrt(h) * A2) / B) * std::sqrt(h / kPi) * std::exp(-2.0 * energy / h);
}

double PrincipalFormula::lambda(double h) const { return prefactor * h * std::exp(-2.0 * energy / h); }

namespace {

double well_b(const WellRecord& well, const std::vector<CriticalPoint>& crits) {
  double b = 0.0;
  for (int q : well.argmin) {
    double det = crits[q].det_hessian;
    if (!(det > 0.0)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "non-positive Hessian determinant %.6g at the minimum %d", det, q);
      throw Error(ErrorKind::numeric, buf);
    }
    b += 1.0 / std::sqrt(det);
  }
  return b;
}

}  // namespace

SaddleContribution saddle_constant(const WellRecord& well, const CriticalPoint& z,
                                   const std::vector<CriticalPoint>& crits) {
  SaddleContribution s;
  s.saddle = z.id;
  const double B = well_b(well, crits);
  if (z.kind == CritKind::boundary_tangential) {
    s.kind = SaddleKind::boundary_noncritical;
    s.h_power = 0.5;
    s.c = (2.0 * z.dn_f / std::sqrt(kPi)) / std::sqrt(z.det_tangential()) / B;
  } else {
    if (!(z.mu_d < 0.0)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "critical point %d in j(x) has no negative Hessian eigenvalue", z.id);
      throw Error(ErrorKind::numeric, buf);
    }
    double m = std::abs(z.mu_d) / std::sqrt(std::abs(z.det_hessian));
    if (z.kind == CritKind::boundary_critical) {
      s.kind = SaddleKind::boundary_critical;
      s.c = 2.0 * m / kPi / B;
    } else {
      s.kind = SaddleKind::interior;
      s.c = m / kPi / B;
    }
    s.h_power = 1.0;
  }
  return s;
}

PredictionSet build_prediction(const WellLabeling& labeling, const std::vector<CriticalPoint>& crits) {
  PredictionSet out;
  std::vector<const WellRecord*> wells;
  for (const auto& w : labeling.wells) {
    KramersPrediction k;
    k.minimum = w.minimum;
    k.tier = w.tier;
    k.energy = w.energy;
    k.B = well_b(w, crits);
    for (int id : w.saddles) {
      const CriticalPoint& z = crits[id];
      SaddleContribution s = saddle_constant(w, z, crits);
      if (s.kind == SaddleKind::boundary_noncritical) {
        k.K1 += s.c;
        k.A1 += 2.0 * z.dn_f / std::sqrt(z.det_tangential());
      } else {
        k.K2 += s.c;
        double mult = s.kind == SaddleKind::boundary_critical ? 2.0 : 1.0;
        k.A2 += mult * std::abs(z.mu_d) / std::sqrt(std::abs(z.det_hessian)) / std::sqrt(kPi);
        if (s.kind == SaddleKind::boundary_critical) k.sqrt_h_remainder = true;
      }
      k.contributions.push_back(s);
    }
    k.p = k.K1 != 0.0 ? 0.25 : 0.5;
    k.gamma = 2.0 * k.p;
    out.predictions.push_back(k);
    wells.push_back(&w);
  }

  std::vector<std::size_t> order(out.predictions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const double tol = labeling.tol_level;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = out.predictions[a];
    const auto& pb = out.predictions[b];
    if (std::abs(pa.energy - pb.energy) > tol) return pa.energy > pb.energy;
    return pa.p > pb.p;
  });
  std::vector<KramersPrediction> sorted;
  std::vector<const WellRecord*> sw;
  for (auto i : order) {
    sorted.push_back(out.predictions[i]);
    sw.push_back(wells[i]);
  }
  out.predictions = std::move(sorted);

  const std::size_t m0 = out.predictions.size();
  for (std::size_t a = 0; a < m0; ++a) {
    for (std::size_t b = a + 1; b < m0; ++b) {
      double K = 0.0;
      for (const auto& ca : out.predictions[a].contributions)
        for (const auto& cb : out.predictions[b].contributions)
          if (ca.saddle == cb.saddle) K += std::sqrt(ca.c * cb.c);
      if (K > 0.0) out.cross.push_back({out.predictions[a].minimum, out.predictions[b].minimum, K});
    }
  }

  auto shares = [&](std::size_t j) {
    for (std::size_t i = 0; i < m0; ++i) {
      if (i == j) continue;
      for (int s : sw[j]->saddles)
        if (std::find(sw[i]->saddles.begin(), sw[i]->saddles.end(), s) != sw[i]->saddles.end()) return true;
    }
    return false;
  };
  auto nested = [&](std::size_t l, std::size_t k) {
    const auto& ml = sw[l]->member;
    const auto& mk = sw[k]->member;
    for (std::size_t n = 0; n < ml.size(); ++n)
      if (ml[n] && !mk[n]) return false;
    return true;
  };
  for (std::size_t m = m0; m >= 1; --m) {
    std::string why;
    double rest = 0.0;
    for (std::size_t i = m; i < m0; ++i) rest = std::max(rest, out.predictions[i].energy);
    if (!(out.predictions[m - 1].energy > rest + tol)) why = "no strict energy gap after position " + std::to_string(m);
    for (std::size_t j = 0; j < m && why.empty(); ++j)
      if (shares(j)) why = "saddle set of minimum " + std::to_string(out.predictions[j].minimum) + " is shared";
    for (std::size_t k = 0; k < m && why.empty(); ++k)
      for (std::size_t l = 0; l < m && why.empty(); ++l) {
        if (k == l || !nested(l, k)) continue;
        const auto& crit_l = crits[out.predictions[l].minimum];
        const auto& crit_k = crits[out.predictions[k].minimum];
        if (!(crit_l.f > crit_k.f + tol))
          why = "well of minimum " + std::to_string(crit_l.id) + " is nested in the well of minimum " +
                std::to_string(crit_k.id) + " at equal depth";
      }
    if (why.empty()) {
      out.m_star = static_cast<int>(m);
      break;
    }
    out.prefix_failures.push_back("m=" + std::to_string(m) + ": " + why);
  }
  return out;
}

PrincipalFormula principal_eigenvalue_formula(const Topology& topo, const TopologyOptions& opt) {
  PrincipalFormula r;
  const auto& crits = topo.crits;
  const auto& lab = topo.labeling;
  double fmin = std::numeric_limits<double>::infinity();
  int nmin = 0;
  for (const auto& c : crits)
    if (c.kind == CritKind::interior && c.index == 0) {
      fmin = std::min(fmin, c.f);
      ++nmin;
    }
  double bmin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < topo.grid.node_count(); ++k)
    if (topo.grid.is_boundary(k)) bmin = std::min(bmin, topo.data.f[k]);
  for (const auto& c : crits)
    if (c.on_boundary()) bmin = std::min(bmin, c.f);

  std::vector<const WellRecord*> tier1;
  for (const auto& w : lab.wells)
    if (w.tier == 1) tier1.push_back(&w);
  if (nmin == 0) {
    r.reason = "no interior minimum";
    return r;
  }
  if (tier1.size() != 1) {
    r.reason = "the sublevel set below the boundary minimum is not connected";
    return r;
  }
  const WellRecord& w = *tier1[0];
  if (static_cast<int>(w.minima.size()) != nmin) {
    r.reason = "the principal well does not contain every interior minimum";
    return r;
  }
  if (std::abs(w.level - bmin) > std::max(lab.tol_level, 1e-9)) {
    r.reason = "the principal well is not cut at the minimum of f over the boundary";
    return r;
  }
  double num = 0.0;
  for (int id : w.saddles) {
    const CriticalPoint& z = crits[id];
    if (z.kind != CritKind::boundary_critical) {
      r.reason = "the well closure meets the boundary at a point that is not a critical point of f";
      return r;
    }
    if (z.index != 1 || z.alignment_angle > opt.angle_tol) {
      r.reason = "a boundary saddle of the well has a normal that is not its unstable direction";
      return r;
    }
    num += std::abs(z.mu_d) / std::sqrt(std::abs(z.det_hessian));
  }
  double den = 0.0;
  for (int q : w.argmin) den += 1.0 / std::sqrt(crits[q].det_hessian);
  r.applicable = true;
  r.energy = bmin - fmin;
  r.prefactor = (2.0 / kPi) * num / den;
  return r;
}

nlohmann::json to_json(const PredictionSet& p) {
  using nlohmann::json;
  json a = json::array();
  for (const auto& k : p.predictions) {
    json c = json::array();
    for (const auto& s : k.contributions)
      c.push_back({{"saddle", s.saddle}, {"kind", to_string(s.kind)}, {"c", s.c}, {"h_power", s.h_power}});
    a.push_back({{"minimum", k.minimum},
                 {"tier", k.tier},
                 {"E", k.energy},
                 {"gamma", k.gamma},
                 {"p", k.p},
                 {"K1", k.K1},
                 {"K2", k.K2},
                 {"A1", k.A1},
                 {"A2", k.A2},
                 {"B", k.B},
                 {"remainder", k.sqrt_h_remainder ? "O(sqrt h)" : "O(h)"},
                 {"contributions", c}});
  }
  json x = json::array();
  for (const auto& c : p.cross) x.push_back({{"x", c.x}, {"y", c.y}, {"K", c.K}});
  return {{"predictions", a}, {"cross_terms", x}, {"m_star", p.m_star}, {"prefix_failures", p.prefix_failures}};
}

nlohmann::json to_json(const PrincipalFormula& p) {
  if (!p.applicable) return {{"applicable", false}, {"reason", p.reason}};
  return {{"applicable", true}, {"E", p.energy}, {"prefactor", p.prefactor}};
}

}  // namespace wk
