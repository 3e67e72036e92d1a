#include "wk/quasimode.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <random>
#include <set>

#include "wk/error.hpp"

namespace wk {

namespace {

const double kPi = 3.14159265358979323846;
const double kInf = std::numeric_limits<double>::infinity();

double smooth5(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

double smooth5_prime(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return 30.0 * s * s * (1.0 - s) * (1.0 - s);
}

template <class F>
void for_each_edge(const Grid& grid, F&& fn) {
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    auto ij = grid.ij(n);
    if (ij[0] + 1 < grid.n(0)) fn(n, grid.index(ij[0] + 1, ij[1]), 0);
    if (grid.dim() == 2 && ij[1] + 1 < grid.n(1)) fn(n, grid.index(ij[0], ij[1] + 1), 1);
  }
}

bool boundary_adjacent(const Grid& grid, std::size_t node) {
  std::array<std::size_t, 4> nb;
  int c = grid.neighbors(node, nb);
  for (int i = 0; i < c; ++i)
    if (grid.is_boundary(nb[static_cast<std::size_t>(i)])) return true;
  return false;
}

double well_b(const Topology& topo, const WellRecord& well) {
  double b = 0.0;
  for (int q : well.argmin) b += 1.0 / std::sqrt(topo.crits[static_cast<std::size_t>(q)].det_hessian);
  return b;
}

// Geometry only; the axis sign is fixed by the well when one is given.
Cylinder make_cylinder(const Topology& topo, const CriticalPoint& z, const WellRecord* well, double d1, double d2) {
  Cylinder c;
  c.saddle = z.id;
  c.center = z.x;
  c.delta1 = d1;
  c.delta2 = d2;
  const Grid& grid = topo.grid;
  if (z.on_boundary()) {
    c.axis = topo.grid.domain().normal(z.face);
    c.kind = z.kind == CritKind::boundary_tangential ? SaddleKind::boundary_noncritical : SaddleKind::boundary_critical;
    c.rate = z.kind == CritKind::boundary_tangential ? z.dn_f : std::abs(z.mu_d);
  } else {
    c.kind = SaddleKind::interior;
    c.rate = std::abs(z.mu_d);
    c.axis = z.eigenvectors.col(0);
    if (grid.dim() == 1) c.axis = Vec2(1.0, 0.0);
    if (well) {
      auto inside = [&](const Vec2& p) {
        if (!grid.domain().contains(p)) return false;
        return well->member[grid.nearest_node(p)] != 0;
      };
      bool minus = inside(z.x - d1 * c.axis);
      bool plus = inside(z.x + d1 * c.axis);
      if (plus && !minus) {
        c.axis = -c.axis;
      } else if (plus == minus) {
        const Vec2& xm = topo.crits[static_cast<std::size_t>(well->minimum)].x;
        if (c.axis.dot(xm - z.x) > 0.0) c.axis = -c.axis;
      }
    }
  }
  if (grid.dim() == 2) c.lateral = Vec2(-c.axis.y(), c.axis.x());
  c.wall_margin = kInf;
  if (grid.dim() == 2) {
    const double band = 1.5 * grid.max_dx();
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      Vec2 p = grid.coords(n);
      if (!c.in_box(p) || std::abs(c.vt(p)) < d2 - band) continue;
      c.wall_margin = std::min(c.wall_margin, topo.data.f[n] - z.f);
    }
  }
  return c;
}

template <class G>
double panel(G&& g, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, a, b, 0);
}

struct Flood {
  std::vector<double> priority;  // inf where never reached
  double lstar = kInf;
  int hit_saddle = -1;  // foreign cylinder that stopped the flood, if any
};

Flood support_flood(const Topology& topo, const WellRecord& well, const std::vector<Cylinder>& own,
                    const std::vector<Cylinder>& foreign) {
  const Grid& grid = topo.grid;
  const auto& f = topo.data.f;
  const std::size_t N = grid.node_count();
  std::vector<char> is_min(N, 0);
  for (const auto& c : topo.crits)
    if (c.kind == CritKind::interior && c.index == 0) {
      std::size_t n = grid.nearest_node(c.x);
      if (!well.member[n]) is_min[n] = 1;
    }
  int hit = -1;
  auto forbidden = [&](std::size_t n) {
    if (is_min[n]) return true;
    Vec2 p = grid.coords(n);
    for (const auto& c : foreign)
      if (c.in_transition(p)) {
        hit = c.saddle;
        return true;
      }
    if (boundary_adjacent(grid, n)) {
      for (const auto& c : own)
        if (c.kind != SaddleKind::interior && c.in_box(p)) return false;
      return true;
    }
    return false;
  };
  auto gated = [&](std::size_t n) {
    Vec2 p = grid.coords(n);
    for (const auto& c : own)
      if (c.kind == SaddleKind::interior && c.in_box(p) && c.vd(p) >= c.delta1) return true;
    return false;
  };
  Flood out;
  out.priority.assign(N, kInf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  std::vector<char> seen(N, 0);
  std::size_t s = grid.nearest_node(topo.crits[static_cast<std::size_t>(well.minimum)].x);
  pq.emplace(f[s], s);
  seen[s] = 1;
  std::array<std::size_t, 4> nb;
  while (!pq.empty()) {
    auto [pr, n] = pq.top();
    pq.pop();
    if (forbidden(n)) {
      out.lstar = pr;
      out.hit_saddle = hit;
      break;
    }
    out.priority[n] = pr;
    int cnt = grid.neighbors(n, nb);
    for (int i = 0; i < cnt; ++i) {
      std::size_t m = nb[static_cast<std::size_t>(i)];
      if (seen[m] || grid.is_boundary(m) || gated(m)) continue;
      seen[m] = 1;
      pq.emplace(std::max(pr, f[m]), m);
    }
  }
  return out;
}

std::vector<Cylinder> foreign_cylinders(const Topology& topo, const WellRecord& well, const CutoffProfile& prof) {
  std::set<int> ids;
  const double tol = topo.labeling.tol_level;
  for (const auto& w : topo.labeling.wells)
    for (int z : w.saddles)
      if (std::find(well.saddles.begin(), well.saddles.end(), z) == well.saddles.end() &&
          topo.crits[static_cast<std::size_t>(z)].f >= well.level - tol)
        ids.insert(z);
  std::vector<Cylinder> out;
  for (int z : ids) out.push_back(make_cylinder(topo, topo.crits[static_cast<std::size_t>(z)], nullptr, prof.d1(z), prof.d2(z)));
  return out;
}

}  // namespace

double CutoffProfile::chi(double t) const {
  double a = std::abs(t);
  if (a <= 0.5 * delta1) return 1.0;
  if (a >= delta1) return 0.0;
  return 1.0 - smooth5((a - 0.5 * delta1) / (0.5 * delta1));
}

bool Cylinder::in_box(const Vec2& p) const {
  const double eps = 1e-12 * std::max(1.0, delta2);
  double v = vd(p);
  if (std::abs(vt(p)) > delta2 + eps) return false;
  if (kind == SaddleKind::interior) return std::abs(v) <= 2.0 * delta1 + eps;
  return v >= -2.0 * delta1 - eps && v <= eps;
}

bool Cylinder::in_transition(const Vec2& p) const {
  if (!in_box(p)) return false;
  double v = vd(p);
  return kind == SaddleKind::interior ? std::abs(v) < delta1 : v > -delta1;
}

double Cylinder::weight(double t) const {
  CutoffProfile cp;
  cp.delta1 = delta1;
  double w = kind == SaddleKind::boundary_noncritical ? std::exp(2.0 * rate * t / h) : std::exp(-rate * t * t / h);
  return cp.chi(t) * w;
}

void Cylinder::tabulate(double hh) {
  h = hh;
  const double end = kind == SaddleKind::interior ? delta1 : 0.0;
  const double a = -delta1;
  const int K = kPanels;
  tail.assign(K + 1, 0.0);
  auto g = [this](double t) { return weight(t); };
  for (int k = K - 1; k >= 0; --k)
    tail[static_cast<std::size_t>(k)] =
        tail[static_cast<std::size_t>(k) + 1] + panel(g, a + (end - a) * k / K, a + (end - a) * (k + 1) / K);
  denominator = tail[0];
}

double Cylinder::profile(double v) const {
  const double end = kind == SaddleKind::interior ? delta1 : 0.0;
  if (v <= -delta1) return 1.0;
  if (v >= end) return 0.0;
  const double a = -delta1;
  const int K = kPanels;
  double pos = (v - a) / (end - a) * K;
  int k = std::clamp(static_cast<int>(pos), 0, K - 1);
  double right = a + (end - a) * (k + 1) / K;
  auto g = [this](double t) { return weight(t); };
  return (panel(g, v, right) + tail[static_cast<std::size_t>(k) + 1]) / denominator;
}

std::vector<Cylinder> well_cylinders(const Topology& topo, const WellRecord& well, const CutoffProfile& prof,
                                     double h) {
  std::vector<Cylinder> out;
  for (int id : well.saddles) {
    Cylinder c = make_cylinder(topo, topo.crits[static_cast<std::size_t>(id)], &well, prof.d1(id), prof.d2(id));
    if (h > 0.0) c.tabulate(h);
    out.push_back(c);
  }
  return out;
}

double CutoffProfile::d1(int saddle) const {
  auto it = sizes.find(saddle);
  return it == sizes.end() ? delta1 : it->second.d1;
}

double CutoffProfile::d2(int saddle) const {
  auto it = sizes.find(saddle);
  return it == sizes.end() ? delta2 : it->second.d2;
}

CutoffProfile choose_profile(const Topology& topo) {
  const Grid& grid = topo.grid;
  const Domain& dom = grid.domain();
  std::set<int> ids;
  for (const auto& w : topo.labeling.wells) ids.insert(w.saddles.begin(), w.saddles.end());
  std::vector<int> pts(ids.begin(), ids.end());
  double d = kInf;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    const auto& za = topo.crits[static_cast<std::size_t>(pts[a])];
    if (!za.on_boundary()) d = std::min(d, dom.boundary_distance(za.x));
    for (std::size_t b = a + 1; b < pts.size(); ++b)
      d = std::min(d, (za.x - topo.crits[static_cast<std::size_t>(pts[b])].x).norm());
  }
  if (!std::isfinite(d)) {
    d = dom.hi[0] - dom.lo[0];
    if (grid.dim() == 2) d = std::min(d, dom.hi[1] - dom.lo[1]);
  }
  CutoffProfile prof;
  prof.delta2 = d / 3.0;
  prof.delta1 = prof.delta2 / 2.0;
  for (int z : pts) {
    const auto& cz = topo.crits[static_cast<std::size_t>(z)];
    double d1 = prof.delta1;
    if (!cz.on_boundary()) {
      // let the Gaussian profile of an interior saddle reach most of the way
      // to the nearest minimum; delta2/2 alone truncates it at moderate h
      double rho = dom.boundary_distance(cz.x);
      for (const auto& q : topo.crits)
        if (q.kind == CritKind::interior && q.index == 0) rho = std::min(rho, (q.x - cz.x).norm());
      d1 = std::max(d1, 0.45 * rho);
    }
    prof.sizes[z] = {d1, prof.delta2, 0};
  }

  // Halves the chosen sizes of one saddle; false once it has been halved six times.
  auto shrink = [&](int z, bool h1, bool h2, const std::string& why) {
    auto& s = prof.sizes[z];
    if (s.halvings >= 6) return false;
    if (h1) s.d1 *= 0.5;
    if (h2) {
      s.d2 *= 0.5;
      s.d1 = std::min(s.d1, 0.5 * s.d2);
    }
    ++s.halvings;
    prof.halvings = std::max(prof.halvings, s.halvings);
    char buf[200];
    std::snprintf(buf, sizeof buf, "saddle %d: %s; delta1=%.4g delta2=%.4g", z, why.c_str(), s.d1, s.d2);
    prof.adjustments.push_back(buf);
    return true;
  };
  auto fail = [](const std::string& why) {
    throw Error(ErrorKind::numeric, "cylinder validation failed after 6 halvings: " + why);
  };

  for (;;) {
    std::vector<Cylinder> all;
    for (int id : pts) all.push_back(make_cylinder(topo, topo.crits[static_cast<std::size_t>(id)], nullptr, prof.d1(id), prof.d2(id)));

    // disjoint cylinders
    std::vector<int> owner(grid.node_count(), -1);
    int ca = -1, cb = -1;
    for (std::size_t c = 0; c < all.size() && ca < 0; ++c)
      for (std::size_t n = 0; n < grid.node_count(); ++n) {
        if (!all[c].in_box(grid.coords(n))) continue;
        if (owner[n] >= 0) {
          ca = owner[n];
          cb = static_cast<int>(c);
          break;
        }
        owner[n] = static_cast<int>(c);
      }
    if (ca >= 0) {
      std::string why = "cylinders overlap";
      bool a = shrink(all[static_cast<std::size_t>(ca)].saddle, false, true, why);
      bool b = shrink(all[static_cast<std::size_t>(cb)].saddle, false, true, why);
      if (!a && !b) fail(why);
      continue;
    }

    // no minimum inside a cylinder, and cylinders stay above the well bottom
    bool again = false;
    for (std::size_t c = 0; c < all.size() && !again; ++c) {
      std::string why;
      for (const auto& q : topo.crits)
        if (q.kind == CritKind::interior && q.index == 0 && all[c].in_box(q.x)) why = "a minimum lies in the cylinder";
      double fmin_box = kInf;
      for (std::size_t n = 0; n < grid.node_count(); ++n)
        if (owner[n] == static_cast<int>(c)) fmin_box = std::min(fmin_box, topo.data.f[n]);
      for (const auto& w : topo.labeling.wells)
        if (std::find(w.saddles.begin(), w.saddles.end(), all[c].saddle) != w.saddles.end() &&
            !(fmin_box > topo.crits[static_cast<std::size_t>(w.minimum)].f))
          why = "the cylinder reaches the bottom of its well";
      if (!why.empty()) {
        if (!shrink(all[c].saddle, true, true, why)) fail(why);
        again = true;
      }
    }
    if (again) continue;

    // lateral walls above f(z)
    for (const auto& c : all)
      if (!(c.wall_margin > 0.0)) {
        std::string why = "the cylinder wall dips below f(z)";
        if (!shrink(c.saddle, true, false, why)) fail(why);
        again = true;
        break;
      }
    if (again) continue;

    // every well keeps a level margin before reaching anything it must not touch
    for (const auto& w : topo.labeling.wells) {
      auto own = well_cylinders(topo, w, prof, 0.0);
      auto fl = support_flood(topo, w, own, foreign_cylinders(topo, w, prof));
      if (fl.lstar - w.level >= 0.25 * w.energy) continue;
      std::string why = "support margin of minimum " + std::to_string(w.minimum) + " is too small";
      if (fl.hit_saddle >= 0) {
        if (!shrink(fl.hit_saddle, true, false, why)) fail(why);
      } else {
        bool any = false;
        for (int z : w.saddles) any = shrink(z, true, false, why) || any;
        if (!any) fail(why);
      }
      again = true;
      break;
    }
    if (again) continue;
    return prof;
  }
}

Eigen::VectorXd QuasiMode::interior(const Grid& grid) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid.interior_count()));
  for (std::size_t k = 0; k < grid.interior_count(); ++k) v[static_cast<Eigen::Index>(k)] = psi[grid.node_of_interior(k)];
  return v;
}

QuasiMode build_quasimode(const Topology& topo, const WellRecord& well, double h, const CutoffProfile& prof) {
  if (!(h > 0.0)) throw Error(ErrorKind::config, "h must be positive");
  const Grid& grid = topo.grid;
  const auto& f = topo.data.f;
  QuasiMode q;
  q.minimum = well.minimum;
  q.h = h;
  q.f_min = topo.crits[static_cast<std::size_t>(well.minimum)].f;
  q.level = well.level;
  q.cylinders = well_cylinders(topo, well, prof, h);
  Flood fl = support_flood(topo, well, q.cylinders, foreign_cylinders(topo, well, prof));
  q.margin = fl.lstar - well.level;
  double room = q.margin;
  for (const auto& c : q.cylinders) room = std::min(room, c.wall_margin);
  q.c1 = 0.6 * room;
  q.c2 = 0.9 * room;
  const double top = well.level + q.c2;

  const std::size_t N = grid.node_count();
  q.phi.assign(N, 0.0);
  q.psi.assign(N, 0.0);
  q.support.assign(N, 0);
  for (std::size_t n = 0; n < N; ++n) {
    if (!(fl.priority[n] < top)) continue;
    q.support[n] = 1;
    double v = 1.0;
    if (std::isfinite(room)) v = 1.0 - smooth5((f[n] - well.level - q.c1) / (q.c2 - q.c1));
    Vec2 p = grid.coords(n);
    for (const auto& c : q.cylinders)
      if (v > 0.0 && c.in_box(p)) v *= c.profile(c.vd(p));
    q.phi[n] = v;
    if (v == 1.0) ++q.plateau_nodes;
  }
  const double vol = grid.cell_volume();
  double z2 = 0.0;
  for (std::size_t n = 0; n < N; ++n)
    if (q.phi[n] != 0.0) z2 += q.phi[n] * q.phi[n] * std::exp(-2.0 * (f[n] - q.f_min) / h);
  q.z_hat = std::sqrt(vol * z2);
  for (std::size_t n = 0; n < N; ++n)
    if (q.phi[n] != 0.0) q.psi[n] = q.phi[n] * std::exp(-(f[n] - q.f_min) / h) / q.z_hat;
  q.z_hat_predicted = std::pow(kPi * h, grid.dim() / 4.0) * std::sqrt(well_b(topo, well));
  return q;
}

EnergyBreakdown dirichlet_energy(const QuasiMode& qm, const Topology& topo) {
  const Grid& grid = topo.grid;
  const auto& f = topo.data.f;
  const double vol = grid.cell_volume();
  const double h = qm.h;
  EnergyBreakdown e;
  for (const auto& c : qm.cylinders) e.cylinders.emplace_back(c.saddle, 0.0);
  for_each_edge(grid, [&](std::size_t a, std::size_t b, int axis) {
    double d = qm.phi[b] - qm.phi[a];
    if (d == 0.0) return;
    double fe = 0.5 * (f[a] + f[b]);
    double w = vol * h * h / (grid.dx(axis) * grid.dx(axis)) * d * d * std::exp(-2.0 * (fe - qm.f_min) / h) /
               (qm.z_hat * qm.z_hat);
    e.total += w;
    Vec2 pa = grid.coords(a), pb = grid.coords(b);
    for (std::size_t c = 0; c < qm.cylinders.size(); ++c)
      if (qm.cylinders[c].in_box(pa) || qm.cylinders[c].in_box(pb)) {
        e.cylinders[c].second += w;
        return;
      }
    e.collar += w;
  });
  return e;
}

InteractionMatrices interaction_matrix(const std::vector<QuasiMode>& qms, const Topology& topo,
                                       const PredictionSet& pred) {
  const Grid& grid = topo.grid;
  const auto& f = topo.data.f;
  const double vol = grid.cell_volume();
  const auto m = static_cast<Eigen::Index>(qms.size());
  InteractionMatrices im;
  im.E = Eigen::MatrixXd::Zero(m, m);
  im.gram = Eigen::MatrixXd::Zero(m, m);
  if (m == 0) return im;
  const double h = qms[0].h;
  std::vector<double> d(qms.size());
  for_each_edge(grid, [&](std::size_t a, std::size_t b, int axis) {
    bool any = false;
    for (std::size_t i = 0; i < qms.size(); ++i) {
      d[i] = qms[i].phi[b] - qms[i].phi[a];
      any = any || d[i] != 0.0;
    }
    if (!any) return;
    const double fe = 0.5 * (f[a] + f[b]);
    const double c = vol * h * h / (grid.dx(axis) * grid.dx(axis));
    for (Eigen::Index i = 0; i < m; ++i) {
      if (d[static_cast<std::size_t>(i)] == 0.0) continue;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (d[static_cast<std::size_t>(j)] == 0.0) continue;
        const auto& qi = qms[static_cast<std::size_t>(i)];
        const auto& qj = qms[static_cast<std::size_t>(j)];
        im.E(i, j) += c * d[static_cast<std::size_t>(i)] * d[static_cast<std::size_t>(j)] *
                      std::exp(-(2.0 * fe - qi.f_min - qj.f_min) / h) / (qi.z_hat * qj.z_hat);
      }
    }
  });
  for (std::size_t n = 0; n < grid.node_count(); ++n)
    for (Eigen::Index i = 0; i < m; ++i) {
      double pi = qms[static_cast<std::size_t>(i)].psi[n];
      if (pi == 0.0) continue;
      for (Eigen::Index j = 0; j < m; ++j) im.gram(i, j) += vol * pi * qms[static_cast<std::size_t>(j)].psi[n];
    }
  im.S.resize(m, m);
  im.gram_theta.resize(m, m);
  im.p.resize(m);
  im.D = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    im.minima.push_back(qms[static_cast<std::size_t>(i)].minimum);
    for (Eigen::Index j = 0; j < m; ++j) {
      im.S(i, j) = im.E(j, i) / std::sqrt(im.E(i, i));
      im.gram_theta(i, j) = im.E(i, j) / std::sqrt(im.E(i, i) * im.E(j, j));
    }
    const auto& k = pred.predictions[static_cast<std::size_t>(i)];
    im.p[i] = k.p;
    im.D(i, i) = std::pow(h, k.p) * std::exp(-k.energy / h);
  }
  im.T = im.S * im.D.inverse();
  im.singular_values = Eigen::JacobiSVD<Eigen::MatrixXd>(im.S).singularValues();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(im.E, im.gram);
  im.ritz = ges.eigenvalues();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const auto* wi = topo.labeling.find(im.minima[static_cast<std::size_t>(i)]);
      const auto* wj = topo.labeling.find(im.minima[static_cast<std::size_t>(j)]);
      bool disjoint = true;
      for (int z : wi->saddles)
        if (std::find(wj->saddles.begin(), wj->saddles.end(), z) != wj->saddles.end()) disjoint = false;
      if (!disjoint) continue;
      im.structural_zeros.emplace_back(static_cast<int>(i), static_cast<int>(j));
      if (im.S(i, j) != 0.0 || im.S(j, i) != 0.0) im.zeros_exact = false;
    }
  return im;
}

ProjectorReport projector_diagnostics(const std::vector<QuasiMode>& qms, const InteractionMatrices& im,
                                      const SpectrumResult& spectrum, const Grid& grid) {
  ProjectorReport r;
  const int m = static_cast<int>(qms.size());
  if (spectrum.cluster.count != m) {
    r.verdict = "cluster has " + std::to_string(spectrum.cluster.count) + " eigenvalues but there are " +
                std::to_string(m) + " quasi-modes; skipped";
    return r;
  }
  if (spectrum.eigenvectors.cols() < m || static_cast<int>(spectrum.eigenvalues.size()) <= m) {
    r.verdict = "eigenvectors of the cluster are not available; skipped";
    return r;
  }
  r.ran = true;
  r.verdict = "ok";
  const double vol = grid.cell_volume();
  const Eigen::MatrixXd U = spectrum.eigenvectors.leftCols(m);
  const double lam_next = spectrum.eigenvalues[static_cast<std::size_t>(m)];
  Eigen::MatrixXd C(m, m);
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd psi = qms[static_cast<std::size_t>(i)].interior(grid);
    Eigen::VectorXd c = U.transpose() * psi;
    C.col(i) = c;
    double leak = std::sqrt(vol) * (psi - U * c).norm();
    double dpsi = std::sqrt(im.E(i, i));
    r.leak.push_back(leak);
    r.leak_ratio.push_back(leak / dpsi);
    r.leak_bound.push_back(10.0 * dpsi / std::sqrt(lam_next));
    if (leak > r.leak_bound.back()) r.bound_holds = false;
  }
  Eigen::MatrixXd G = vol * C.transpose() * C;
  Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(G).singularValues();
  r.gram_condition = sv[0] / sv[m - 1];
  std::vector<double> s2;
  for (int i = 0; i < m; ++i) s2.push_back(im.singular_values[i] * im.singular_values[i]);
  std::sort(s2.begin(), s2.end());
  r.sv_squared = s2;
  for (int i = 0; i < m; ++i) {
    double lam = spectrum.eigenvalues[static_cast<std::size_t>(i)];
    r.lambdas.push_back(lam);
    r.sv_rel_error.push_back(std::abs(s2[static_cast<std::size_t>(i)] / lam - 1.0));
    r.ritz_rel_error.push_back(std::abs(im.ritz[i] / lam - 1.0));
  }
  return r;
}

std::vector<CutoffFunction> two_piece_partition(double a, double b) {
  auto theta = [a, b](const Vec2& p) { return 0.5 * kPi * smooth5((p.x() - a) / (b - a)); };
  auto dtheta = [a, b](const Vec2& p) { return 0.5 * kPi * smooth5_prime((p.x() - a) / (b - a)) / (b - a); };
  std::vector<CutoffFunction> out(2);
  out[0].value = [theta](const Vec2& p) { return std::cos(theta(p)); };
  out[0].gradient = [theta, dtheta](const Vec2& p) { return Vec2(-std::sin(theta(p)) * dtheta(p), 0.0); };
  out[1].value = [theta](const Vec2& p) { return std::sin(theta(p)); };
  out[1].gradient = [theta, dtheta](const Vec2& p) { return Vec2(std::cos(theta(p)) * dtheta(p), 0.0); };
  return out;
}

ImsResult ims_identity_check(const Grid& grid, const GridData& data, double h,
                             const std::vector<CutoffFunction>& partition, int trials, unsigned seed) {
  const std::size_t N = grid.node_count();
  const std::size_t J = partition.size();
  std::vector<std::vector<double>> chi(J, std::vector<double>(N));
  std::vector<double> grad_sq(N, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    Vec2 p = grid.coords(n);
    double s = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      chi[j][n] = partition[j].value(p);
      s += chi[j][n] * chi[j][n];
      if (partition[j].gradient) grad_sq[n] += partition[j].gradient(p).squaredNorm();
    }
    if (std::abs(s - 1.0) > 1e-12) throw Error(ErrorKind::config, "cut-offs do not square-sum to one");
  }
  const auto& f = data.f;
  const double vol = grid.cell_volume();
  auto Q = [&](const std::vector<double>& u) {
    double q = 0.0;
    for_each_edge(grid, [&](std::size_t a, std::size_t b, int axis) {
      double fe = 0.5 * (f[a] + f[b]);
      double d = std::exp((f[b] - fe) / h) * u[b] - std::exp((f[a] - fe) / h) * u[a];
      q += h * h / (grid.dx(axis) * grid.dx(axis)) * d * d;
    });
    return vol * q;
  };
  const Domain& dom = grid.domain();
  const int modes = 4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ImsResult res;
  std::vector<double> u(N), cu(N);
  for (int t = 0; t < trials; ++t) {
    std::vector<double> a(static_cast<std::size_t>(modes * modes));
    for (auto& x : a) x = g(rng);
    for (std::size_t n = 0; n < N; ++n) {
      if (grid.is_boundary(n)) {
        u[n] = 0.0;
        continue;
      }
      Vec2 p = grid.coords(n);
      double s = 0.0;
      for (int k1 = 1; k1 <= modes; ++k1) {
        double sx = std::sin(k1 * kPi * (p.x() - dom.lo[0]) / (dom.hi[0] - dom.lo[0]));
        if (grid.dim() == 1) {
          s += a[static_cast<std::size_t>(k1 - 1)] * sx;
          continue;
        }
        for (int k2 = 1; k2 <= modes; ++k2)
          s += a[static_cast<std::size_t>((k1 - 1) * modes + k2 - 1)] * sx *
               std::sin(k2 * kPi * (p.y() - dom.lo[1]) / (dom.hi[1] - dom.lo[1]));
      }
      u[n] = s;
    }
    double q0 = Q(u), qs = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t n = 0; n < N; ++n) cu[n] = chi[j][n] * u[n];
      qs += Q(cu);
    }
    double pointwise = 0.0, norm = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      pointwise += h * h * grad_sq[n] * u[n] * u[n];
      norm += u[n] * u[n];
    }
    double exact = 0.0;
    for_each_edge(grid, [&](std::size_t a2, std::size_t b, int axis) {
      double s = 0.0;
      for (std::size_t j = 0; j < J; ++j) s += (chi[j][b] - chi[j][a2]) * (chi[j][b] - chi[j][a2]);
      exact += h * h / (grid.dx(axis) * grid.dx(axis)) * s * u[a2] * u[b];
    });
    res.max_residual = std::max(res.max_residual, std::abs(q0 - qs + vol * pointwise));
    res.max_exact_residual = std::max(res.max_exact_residual, std::abs(q0 - qs + vol * exact));
    res.max_norm_sq = std::max(res.max_norm_sq, vol * norm);
  }
  return res;
}

FanResult fan_inequality_check(int trials, int m, unsigned seed) {
  if (m < 1 || m > 12) throw Error(ErrorKind::config, "Fan check needs 1 <= m <= 12");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  auto rnd = [&]() {
    Eigen::MatrixXd M(m, m);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) M(i, j) = g(rng);
    return M;
  };
  FanResult r;
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd A = rnd(), B = rnd(), C = rnd();
    Eigen::VectorXd sb = Eigen::JacobiSVD<Eigen::MatrixXd>(B).singularValues();
    Eigen::VectorXd sabc = Eigen::JacobiSVD<Eigen::MatrixXd>(A * B * C).singularValues();
    double na = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()[0];
    double nc = Eigen::JacobiSVD<Eigen::MatrixXd>(C).singularValues()[0];
    for (int j = 0; j < m; ++j) {
      double v = sabc[j] - na * nc * sb[j];
      r.max_violation = std::max(r.max_violation, v);
      if (v > 1e-10) r.pass = false;
    }
  }
  return r;
}

namespace {
nlohmann::json vec(const Vec2& v, int dim) {
  return dim == 1 ? nlohmann::json::array({v.x()}) : nlohmann::json::array({v.x(), v.y()});
}
nlohmann::json mat(const Eigen::MatrixXd& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    a.push_back(r);
  }
  return a;
}
nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace

nlohmann::json to_json(const QuasiMode& q, const EnergyBreakdown& e) {
  int dim = q.cylinders.empty() || q.cylinders[0].lateral.squaredNorm() > 0 ? 2 : 1;
  nlohmann::json cyl = nlohmann::json::array();
  for (std::size_t i = 0; i < q.cylinders.size(); ++i) {
    const auto& c = q.cylinders[i];
    cyl.push_back({{"saddle", c.saddle},
                   {"kind", to_string(c.kind)},
                   {"center", vec(c.center, dim)},
                   {"axis", vec(c.axis, dim)},
                   {"delta1", c.delta1},
                   {"delta2", c.delta2},
                   {"wall_margin", finite_or_null(c.wall_margin)},
                   {"energy", i < e.cylinders.size() ? e.cylinders[i].second : 0.0}});
  }
  std::size_t support = 0;
  for (char s : q.support) support += s ? 1 : 0;
  return {{"minimum", q.minimum},
          {"h", q.h},
          {"z_hat", q.z_hat},
          {"z_hat_predicted", q.z_hat_predicted},
          {"support_nodes", support},
          {"plateau_nodes", q.plateau_nodes},
          {"margin", finite_or_null(q.margin)},
          {"c1", finite_or_null(q.c1)},
          {"c2", finite_or_null(q.c2)},
          {"energy", e.total},
          {"collar_energy", e.collar},
          {"cylinders", cyl}};
}

nlohmann::json to_json(const InteractionMatrices& im) {
  std::vector<double> sv(im.singular_values.data(), im.singular_values.data() + im.singular_values.size());
  std::vector<double> ritz(im.ritz.data(), im.ritz.data() + im.ritz.size());
  nlohmann::json zeros = nlohmann::json::array();
  for (auto [i, j] : im.structural_zeros) zeros.push_back({i, j});
  return {{"minima", im.minima},      {"E", mat(im.E)},         {"S", mat(im.S)},
          {"D", mat(im.D)},           {"T", mat(im.T)},         {"gram", mat(im.gram)},
          {"gram_theta", mat(im.gram_theta)}, {"singular_values", sv}, {"ritz_values", ritz},
          {"structural_zeros", zeros}, {"zeros_exact", im.zeros_exact}};
}

nlohmann::json to_json(const ProjectorReport& p) {
  if (!p.ran) return {{"ran", false}, {"verdict", p.verdict}};
  return {{"ran", true},
          {"verdict", p.verdict},
          {"leak", p.leak},
          {"leak_ratio", p.leak_ratio},
          {"leak_bound", p.leak_bound},
          {"bound_holds", p.bound_holds},
          {"gram_condition", p.gram_condition},
          {"lambdas", p.lambdas},
          {"sv_squared", p.sv_squared},
          {"sv_rel_error", p.sv_rel_error},
          {"ritz_rel_error", p.ritz_rel_error}};
}

}  // namespace wk
