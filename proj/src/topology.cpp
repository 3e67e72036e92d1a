#include "wk/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numeric>

#include "wk/error.hpp"

namespace wk {

const char* to_string(CritKind k) {
  switch (k) {
    case CritKind::interior:
      return "interior";
    case CritKind::boundary_critical:
      return "boundary_critical";
    case CritKind::boundary_tangential:
      return "boundary_tangential";
  }
  return "?";
}

double CriticalPoint::det_tangential() const {
  double d = 1.0;
  for (double e : tangential_eigenvalues) d *= e;
  return d;
}

const WellRecord* WellLabeling::find(int minimum) const {
  for (const auto& w : wells)
    if (w.minimum == minimum) return &w;
  return nullptr;
}

namespace {

std::string fmt_point(const Vec2& p, int dim) {
  char buf[80];
  if (dim == 1)
    std::snprintf(buf, sizeof buf, "(%.6g)", p[0]);
  else
    std::snprintf(buf, sizeof buf, "(%.6g, %.6g)", p[0], p[1]);
  return buf;
}

double extent(const Grid& g) {
  double e = 0.0;
  for (int a = 0; a < g.dim(); ++a) e = std::max(e, g.domain().hi[a] - g.domain().lo[a]);
  return e;
}

void fill_spectrum(CriticalPoint& c, const Mat2& H, int dim) {
  if (dim == 1) {
    c.eigenvalues = Vec2(H(0, 0), 0.0);
    c.eigenvectors = Mat2::Identity();
    c.det_hessian = H(0, 0);
  } else {
    Eigen::SelfAdjointEigenSolver<Mat2> es(H);
    c.eigenvalues = es.eigenvalues();
    c.eigenvectors = es.eigenvectors();
    c.det_hessian = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
  }
  c.mu_d = c.eigenvalues[0] < 0.0 ? c.eigenvalues[0] : 0.0;
}

void require_nondegenerate(const CriticalPoint& c, int dim, double tol) {
  for (int a = 0; a < dim; ++a) {
    if (std::abs(c.eigenvalues[a]) < tol) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "degenerate critical point at %s: Hessian eigenvalue %.3e below %.1e",
                    fmt_point(c.x, dim).c_str(), c.eigenvalues[a], tol);
      throw Error(ErrorKind::degenerate, buf);
    }
  }
}

struct NewtonResult {
  Vec2 x;
  bool converged = false;
  bool escaped = false;
};

// Newton iteration for grad f = 0 (axis < 0) or for the tangential derivative
// along `axis` with the other coordinate frozen.
NewtonResult newton(const ScalarField& field, const Grid& grid, Vec2 x, int axis, double radius, int maxit) {
  const int dim = grid.dim();
  const Vec2 seed = x;
  const double step_tol = 1e-13 * extent(grid);
  NewtonResult r;
  for (int it = 0; it < maxit; ++it) {
    Jet j = field.jet(x);
    Vec2 step = Vec2::Zero();
    if (axis >= 0) {
      double g = axis == 0 ? j.g0 : j.g1;
      double h = axis == 0 ? j.h00 : j.h11;
      if (g == 0.0) {
        r.converged = true;
        break;
      }
      if (h == 0.0) break;
      step[axis] = -g / h;
    } else if (dim == 1) {
      if (j.g0 == 0.0) {
        r.converged = true;
        break;
      }
      if (j.h00 == 0.0) break;
      step[0] = -j.g0 / j.h00;
    } else {
      Mat2 H;
      H << j.h00, j.h01, j.h01, j.h11;
      Vec2 g(j.g0, j.g1);
      if (g.norm() == 0.0) {
        r.converged = true;
        break;
      }
      double det = H.determinant();
      if (det == 0.0 || !std::isfinite(det)) break;
      step = -H.inverse() * g;
    }
    if (!step.allFinite()) break;
    x += step;
    if ((x - seed).norm() > radius || !grid.domain().contains(x, 1e-12 * extent(grid))) {
      r.escaped = true;
      break;
    }
    if (step.norm() <= step_tol) {
      r.converged = true;
      break;
    }
  }
  // Snap points that land on a face within rounding.
  for (int a = 0; a < dim; ++a) {
    double tol = 1e-12 * extent(grid);
    if (std::abs(x[a] - grid.domain().lo[a]) < tol) x[a] = grid.domain().lo[a];
    if (std::abs(x[a] - grid.domain().hi[a]) < tol) x[a] = grid.domain().hi[a];
  }
  r.x = x;
  return r;
}

bool on_face(const Grid& g, const Vec2& x, int& face) {
  const Domain& d = g.domain();
  for (int a = 0; a < g.dim(); ++a) {
    if (x[a] == d.lo[a]) {
      face = 2 * a;
      return true;
    }
    if (x[a] == d.hi[a]) {
      face = 2 * a + 1;
      return true;
    }
  }
  return false;
}

bool is_corner(const Grid& g, const Vec2& x) {
  if (g.dim() < 2) return false;
  const Domain& d = g.domain();
  bool a = x[0] == d.lo[0] || x[0] == d.hi[0];
  bool b = x[1] == d.lo[1] || x[1] == d.hi[1];
  return a && b;
}

CriticalPoint classify(const ScalarField& field, const Grid& grid, const Vec2& x, int face, double grad_zero) {
  const int dim = grid.dim();
  CriticalPoint c;
  c.x = x;
  Jet j = field.jet(x);
  c.f = j.v;
  c.grad = Vec2(j.g0, dim > 1 ? j.g1 : 0.0);
  fill_spectrum(c, field.hessian(x), dim);
  c.face = face;
  if (face < 0) {
    c.kind = CritKind::interior;
    c.index = 0;
    for (int a = 0; a < dim; ++a) c.index += c.eigenvalues[a] < 0.0;
    return c;
  }
  Vec2 n = grid.domain().normal(face);
  c.dn_f = c.grad.dot(n);
  if (dim == 2) {
    int t = 1 - face / 2;
    Mat2 H = field.hessian(x);
    c.tangential_eigenvalues = {H(t, t)};
  }
  if (c.grad.norm() <= grad_zero) {
    c.kind = CritKind::boundary_critical;
    c.index = 0;
    for (int a = 0; a < dim; ++a) c.index += c.eigenvalues[a] < 0.0;
    Vec2 v = c.eigenvectors.col(0);
    double cosang = std::min(1.0, std::abs(v.dot(n)) / v.norm());
    c.alignment_angle = std::acos(cosang);
  } else {
    c.kind = CritKind::boundary_tangential;
    c.index = 0;
    for (double e : c.tangential_eigenvalues) c.index += e < 0.0;
  }
  return c;
}

}  // namespace

std::vector<CriticalPoint> find_critical_points(const ScalarField& field, const Grid& grid,
                                                const TopologyOptions& opt) {
  const int dim = grid.dim();
  GridData data = evaluate_on_grid(field, grid);
  double gscale = 1.0;
  for (double g : data.grad_sq) gscale = std::max(gscale, std::sqrt(g));
  const double grad_accept = 1e-6 * gscale;
  const double grad_zero = std::max(opt.tol_grad * gscale, 1e-7 * gscale);
  const double radius = 4.0 * grid.max_dx() * std::sqrt(2.0);

  std::vector<CriticalPoint> found;

  auto accept = [&](const NewtonResult& r, int axis_face) {
    if (r.escaped) return;
    Jet j = field.jet(r.x);
    double gnorm;
    if (axis_face >= 0) {
      int t = 1 - axis_face / 2;
      gnorm = std::abs(t == 0 ? j.g0 : j.g1);
    } else {
      gnorm = std::hypot(j.g0, dim > 1 ? j.g1 : 0.0);
    }
    if (gnorm > grad_accept) {
      if (!r.converged) return;  // spurious seed
      return;
    }
    int face = axis_face;
    if (face < 0) on_face(grid, r.x, face);
    if (is_corner(grid, r.x)) return;
    CriticalPoint c = classify(field, grid, r.x, face, grad_zero);
    if (c.kind != CritKind::boundary_tangential) require_nondegenerate(c, dim, opt.tol_degenerate);
    if (!r.converged) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "Newton did not converge within %d iterations near %s", opt.max_newton,
                    fmt_point(r.x, dim).c_str());
      throw Error(ErrorKind::numeric, buf);
    }
    found.push_back(c);
  };

  // Interior seeds: cells where every gradient component changes sign.
  if (dim == 1) {
    for (int i = 0; i + 1 < grid.n(0); ++i) {
      double a = data.grad0[grid.index(i)], b = data.grad0[grid.index(i + 1)];
      if (a * b > 0.0) continue;
      Vec2 xa = grid.coords(grid.index(i)), xb = grid.coords(grid.index(i + 1));
      Vec2 seed = (a == b) ? Vec2(0.5 * (xa + xb)) : Vec2(xa + (a / (a - b)) * (xb - xa));
      accept(newton(field, grid, seed, -1, radius, opt.max_newton), -1);
    }
  } else {
    for (int j = 0; j + 1 < grid.n(1); ++j) {
      for (int i = 0; i + 1 < grid.n(0); ++i) {
        std::size_t c[4] = {grid.index(i, j), grid.index(i + 1, j), grid.index(i, j + 1), grid.index(i + 1, j + 1)};
        double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
        for (auto k : c) {
          lo0 = std::min(lo0, data.grad0[k]);
          hi0 = std::max(hi0, data.grad0[k]);
          lo1 = std::min(lo1, data.grad1[k]);
          hi1 = std::max(hi1, data.grad1[k]);
        }
        if (lo0 > 0.0 || hi0 < 0.0 || lo1 > 0.0 || hi1 < 0.0) continue;
        Vec2 seed = 0.25 * (grid.coords(c[0]) + grid.coords(c[1]) + grid.coords(c[2]) + grid.coords(c[3]));
        accept(newton(field, grid, seed, -1, radius, opt.max_newton), -1);
      }
    }
  }

  // Boundary: end points in 1-D, tangential sign changes along faces in 2-D.
  if (dim == 1) {
    for (int face = 0; face < 2; ++face) {
      Vec2 x = Vec2::Zero();
      x[0] = face == 0 ? grid.domain().lo[0] : grid.domain().hi[0];
      CriticalPoint c = classify(field, grid, x, face, grad_zero);
      if (c.kind == CritKind::boundary_critical) require_nondegenerate(c, dim, opt.tol_degenerate);
      found.push_back(c);
    }
  } else {
    for (int face = 0; face < 4; ++face) {
      int axis = face / 2;
      int t = 1 - axis;
      int fixed = (face % 2 == 0) ? 0 : grid.n(axis) - 1;
      auto node = [&](int s) { return axis == 0 ? grid.index(fixed, s) : grid.index(s, fixed); };
      auto tang = [&](std::size_t k) { return t == 0 ? data.grad0[k] : data.grad1[k]; };
      for (int s = 0; s + 1 < grid.n(t); ++s) {
        double a = tang(node(s)), b = tang(node(s + 1));
        if (a * b > 0.0) continue;
        Vec2 xa = grid.coords(node(s)), xb = grid.coords(node(s + 1));
        Vec2 seed = (a == b) ? Vec2(0.5 * (xa + xb)) : Vec2(xa + (a / (a - b)) * (xb - xa));
        seed[axis] = xa[axis];
        NewtonResult r = newton(field, grid, seed, t, radius, opt.max_newton);
        r.x[axis] = xa[axis];
        accept(r, face);
      }
    }
  }

  // Collapse duplicates, preferring true critical points.
  const double dedup = opt.dedup_cells * grid.max_dx();
  auto rank = [](const CriticalPoint& c) {
    return c.kind == CritKind::boundary_tangential ? 1 : 0;
  };
  std::vector<CriticalPoint> out;
  for (const auto& c : found) {
    bool merged = false;
    for (auto& o : out) {
      if ((o.x - c.x).norm() <= dedup) {
        if (rank(c) < rank(o) || (rank(c) == rank(o) && c.grad.norm() < o.grad.norm())) o = c;
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
    if (a.x[0] != b.x[0]) return a.x[0] < b.x[0];
    return a.x[1] < b.x[1];
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  return out;
}

MergeStructure build_merge_structure(const Grid& grid, const GridData& data) {
  const std::size_t n = grid.node_count();
  MergeStructure m;
  m.order.resize(n);
  std::iota(m.order.begin(), m.order.end(), std::size_t{0});
  std::stable_sort(m.order.begin(), m.order.end(), [&](std::size_t a, std::size_t b) {
    if (data.f[a] != data.f[b]) return data.f[a] < data.f[b];
    return a < b;
  });

  std::vector<long> parent(n, -1);  // -1: not yet inserted
  std::vector<std::size_t> size(n, 1);
  std::vector<int> birth_of(n, -1);  // per root: index into births
  std::vector<char> touched(n, 0);
  std::vector<std::vector<int>> pending(n);

  auto find = [&](std::size_t v) {
    std::size_t r = v;
    while (static_cast<std::size_t>(parent[r]) != r) r = static_cast<std::size_t>(parent[r]);
    while (static_cast<std::size_t>(parent[v]) != r) {
      std::size_t nx = static_cast<std::size_t>(parent[v]);
      parent[v] = static_cast<long>(r);
      v = nx;
    }
    return r;
  };

  auto mark_touched = [&](std::size_t root, double level, std::size_t witness) {
    if (touched[root]) return;
    touched[root] = 1;
    for (int b : pending[root]) {
      m.touch_level[b] = level;
      m.touch_witness[b] = witness;
    }
    pending[root].clear();
  };

  std::array<std::size_t, 4> nb{};
  for (std::size_t v : m.order) {
    parent[v] = static_cast<long>(v);
    const double level = data.f[v];
    int cnt = grid.neighbors(v, nb);
    std::vector<std::size_t> roots;
    for (int k = 0; k < cnt; ++k) {
      if (parent[nb[k]] < 0) continue;
      std::size_t r = find(nb[k]);
      if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
    }
    std::size_t root;
    if (roots.empty()) {
      int b = static_cast<int>(m.births.size());
      m.births.push_back(v);
      m.touch_level.push_back(std::numeric_limits<double>::infinity());
      m.touch_witness.push_back(v);
      birth_of[v] = b;
      pending[v].push_back(b);
      root = v;
    } else {
      // Oldest component (lowest birth value) survives.
      std::sort(roots.begin(), roots.end(), [&](std::size_t a, std::size_t b) {
        std::size_t ba = m.births[birth_of[a]], bb = m.births[birth_of[b]];
        if (data.f[ba] != data.f[bb]) return data.f[ba] < data.f[bb];
        return ba < bb;
      });
      root = roots[0];
      parent[v] = static_cast<long>(root);
      ++size[root];
      for (std::size_t k = 1; k < roots.size(); ++k) {
        std::size_t other = roots[k];
        MergeEvent e;
        e.level = level;
        e.witness = v;
        e.birth_a = m.births[birth_of[root]];
        e.birth_b = m.births[birth_of[other]];
        m.events.push_back(e);
        bool t_root = touched[root], t_other = touched[other];
        // Attach the smaller tree below the larger one, keep the elder birth.
        std::size_t keep = root, drop = other;
        if (size[other] > size[root]) std::swap(keep, drop);
        parent[drop] = static_cast<long>(keep);
        size[keep] += size[drop];
        birth_of[keep] = birth_of[root];
        std::vector<int> merged = std::move(pending[root]);
        merged.insert(merged.end(), pending[other].begin(), pending[other].end());
        pending[root].clear();
        pending[other].clear();
        touched[keep] = 0;
        pending[keep] = std::move(merged);
        if (t_root || t_other) {
          touched[keep] = 0;
          mark_touched(keep, level, v);
        }
        root = keep;
      }
    }
    if (grid.is_boundary(v)) mark_touched(root, level, v);
  }
  return m;
}

namespace {

std::vector<char> flood_below(const Grid& grid, const GridData& data, std::size_t start, double level,
                              const std::vector<char>* restrict_to = nullptr) {
  std::vector<char> mask(grid.node_count(), 0);
  if (!(data.f[start] < level)) return mask;
  std::deque<std::size_t> q{start};
  mask[start] = 1;
  std::array<std::size_t, 4> nb{};
  while (!q.empty()) {
    std::size_t v = q.front();
    q.pop_front();
    int c = grid.neighbors(v, nb);
    for (int k = 0; k < c; ++k) {
      std::size_t w = nb[k];
      if (mask[w] || !(data.f[w] < level)) continue;
      if (restrict_to && !(*restrict_to)[w]) continue;
      mask[w] = 1;
      q.push_back(w);
    }
  }
  return mask;
}

bool adjacent(const Grid& grid, const std::vector<char>& mask, const Vec2& z, double radius) {
  const int dim = grid.dim();
  int r0 = static_cast<int>(std::ceil(radius / grid.dx(0)));
  int r1 = dim > 1 ? static_cast<int>(std::ceil(radius / grid.dx(1))) : 0;
  std::size_t c = grid.nearest_node(z);
  auto [ci, cj] = grid.ij(c);
  for (int dj = -r1; dj <= r1; ++dj) {
    for (int di = -r0; di <= r0; ++di) {
      int i = ci + di, j = cj + dj;
      if (i < 0 || i >= grid.n(0) || (dim > 1 && (j < 0 || j >= grid.n(1)))) continue;
      std::size_t k = grid.index(i, dim > 1 ? j : 0);
      if (mask[k] && (grid.coords(k) - z).norm() <= radius) return true;
    }
  }
  return false;
}

int nearest_birth(const MergeStructure& m, const Grid& grid, const Vec2& x) {
  int best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < m.births.size(); ++b) {
    double d = (grid.coords(m.births[b]) - x).norm();
    if (d < bd) {
      bd = d;
      best = static_cast<int>(b);
    }
  }
  if (bd > 2.0 * grid.max_dx() * std::sqrt(2.0)) return -1;
  return best;
}

bool lex_less(const Vec2& a, const Vec2& b) {
  if (a[0] != b[0]) return a[0] < b[0];
  return a[1] < b[1];
}

double tol_level_of(const GridData& data, const TopologyOptions& opt) {
  auto [mn, mx] = std::minmax_element(data.f.begin(), data.f.end());
  return opt.tol_level_rel * std::max(*mx - *mn, 1e-300);
}

}  // namespace

SaddleSet separating_saddles(MergeStructure& merge, std::vector<CriticalPoint>& crits, const Grid& grid,
                             const GridData& data, const TopologyOptions& opt) {
  const int dim = grid.dim();
  const double tol = tol_level_of(data, opt);
  const double attach = 4.0 * grid.max_dx() * std::sqrt(2.0);
  const double adj = 1.5 * grid.max_dx() * std::sqrt(2.0);
  SaddleSet out;

  for (auto& e : merge.events) {
    Vec2 w = grid.coords(e.witness);
    int best = -1;
    double bd = attach;
    for (const auto& c : crits) {
      if (c.kind != CritKind::interior || c.index != 1) continue;
      double d = (c.x - w).norm();
      if (d <= bd) {
        bd = d;
        best = c.id;
      }
    }
    e.saddle = best;
    if (best >= 0) {
      auto it = out.merge_level.find(best);
      if (it == out.merge_level.end() || e.level < it->second) out.merge_level[best] = e.level;
    }
    if (best >= 0 && !crits[best].separating) {
      crits[best].separating = true;
      out.interior.push_back(best);
    }
  }
  std::sort(out.interior.begin(), out.interior.end());

  // Principal wells.
  for (const auto& c : crits) {
    if (c.kind != CritKind::interior || c.index != 0) continue;
    bool known = false;
    for (auto& pw : out.principal) {
      if (pw.member[grid.nearest_node(c.x)]) {
        pw.minima.push_back(c.id);
        known = true;
        break;
      }
    }
    if (known) continue;
    int b = nearest_birth(merge, grid, c.x);
    if (b < 0) throw Error(ErrorKind::numeric, "no grid basin found for the minimum at " + fmt_point(c.x, dim));
    PrincipalWell pw;
    pw.lambda_grid = merge.touch_level[b];
    std::size_t wit = merge.touch_witness[b];
    Vec2 wx = grid.coords(wit);
    int ref = -1;
    double bd = attach;
    for (const auto& z : crits) {
      // A merge witness can also stand for a boundary saddle whose descending
      // cone is not axis-connected on the grid.
      bool ok = z.on_boundary() || (!grid.is_boundary(wit) && z.kind == CritKind::interior && z.index == 1);
      if (!ok) continue;
      double d = (z.x - wx).norm();
      if (d <= bd) {
        bd = d;
        ref = z.id;
      }
    }
    if (ref >= 0) {
      pw.lambda = crits[ref].f;
    } else {
      pw.lambda = pw.lambda_grid;
      out.violations.push_back("boundary contact of the well of " + fmt_point(c.x, dim) + " at " +
                               fmt_point(wx, dim) + " has no refined saddle (corner or degenerate contact)");
    }
    pw.member = flood_below(grid, data, grid.nearest_node(c.x), pw.lambda_grid);
    pw.minima.push_back(c.id);
    for (const auto& z : crits) {
      if (std::abs(z.f - pw.lambda) > tol) continue;
      if (!adjacent(grid, pw.member, z.x, adj)) continue;
      if (z.on_boundary())
        pw.boundary_contacts.push_back(z.id);
      else if (z.separating)
        pw.interior_saddles.push_back(z.id);
    }
    out.principal.push_back(std::move(pw));
  }

  for (const auto& pw : out.principal) {
    for (int id : pw.boundary_contacts) {
      bool seen = false;
      for (const auto& g : out.boundary) seen |= g.crit == id;
      if (seen) continue;
      const CriticalPoint& z = crits[id];
      SaddleSet::Generalized g;
      g.crit = id;
      if (z.kind == CritKind::boundary_critical) {
        g.kase = 'b';
        g.valid = z.index == 1;
      } else {
        g.kase = 'a';
        bool tmin = true;
        for (double e : z.tangential_eigenvalues) tmin &= e >= opt.tangential_pd_tol;
        g.valid = z.dn_f > 0.0 && tmin;
      }
      if (!g.valid)
        out.violations.push_back("boundary contact point " + fmt_point(z.x, dim) +
                                 " is neither a tangential minimum with outward slope nor a boundary saddle");
      out.boundary.push_back(g);
    }
  }
  return out;
}

WellLabeling build_jmap(const SaddleSet& ssp, const std::vector<CriticalPoint>& crits, const Grid& grid,
                        const GridData& data, const TopologyOptions& opt) {
  const int dim = grid.dim();
  const double tol = tol_level_of(data, opt);
  const double adj = 1.5 * grid.max_dx() * std::sqrt(2.0);
  WellLabeling lab;
  lab.tol_level = tol;

  std::vector<int> minima;
  for (const auto& c : crits)
    if (c.kind == CritKind::interior && c.index == 0) minima.push_back(c.id);
  if (minima.empty()) throw Error(ErrorKind::hypothesis, "the potential has no interior local minimum");

  auto pick = [&](std::vector<int> cand, std::vector<int>& argmin) {
    double fmin = std::numeric_limits<double>::infinity();
    for (int id : cand) fmin = std::min(fmin, crits[id].f);
    argmin.clear();
    for (int id : cand)
      if (crits[id].f <= fmin + tol) argmin.push_back(id);
    std::sort(argmin.begin(), argmin.end(), [&](int a, int b) { return lex_less(crits[a].x, crits[b].x); });
    return opt.tie_break == TieBreak::lexicographic_min ? argmin.front() : argmin.back();
  };

  std::vector<char> labeled(crits.size(), 0);
  std::vector<char> union_c1(grid.node_count(), 0);
  int ell = 0;
  for (const auto& pw : ssp.principal) {
    WellRecord w;
    w.tier = 1;
    w.ell = ++ell;
    w.minima = pw.minima;
    w.minimum = pick(pw.minima, w.argmin);
    w.level = pw.lambda;
    w.energy = pw.lambda - crits[w.minimum].f;
    w.saddles = pw.boundary_contacts;
    w.saddles.insert(w.saddles.end(), pw.interior_saddles.begin(), pw.interior_saddles.end());
    std::sort(w.saddles.begin(), w.saddles.end());
    w.member = pw.member;
    for (std::size_t k = 0; k < union_c1.size(); ++k) union_c1[k] |= pw.member[k];
    labeled[w.minimum] = 1;
    lab.wells.push_back(std::move(w));
  }

  auto inside_c1 = [&](const CriticalPoint& z) {
    for (const auto& pw : ssp.principal)
      if (z.f < pw.lambda - tol && adjacent(grid, pw.member, z.x, adj)) return true;
    return false;
  };

  double kappa_prev = std::numeric_limits<double>::infinity();
  int tier = 1;
  auto unlabeled = [&]() {
    for (int id : minima)
      if (!labeled[id]) return true;
    return false;
  };
  while (unlabeled()) {
    double kappa = -std::numeric_limits<double>::infinity();
    for (const auto& z : crits)
      if (z.separating && z.f < kappa_prev - tol && inside_c1(z)) kappa = std::max(kappa, z.f);
    if (!std::isfinite(kappa))
      throw Error(ErrorKind::numeric, "unlabeled local minimum remains after exhausting separating saddles");
    ++tier;
    double cut = kappa;
    for (const auto& [id, lv] : ssp.merge_level)
      if (std::abs(crits[id].f - kappa) <= tol) cut = std::min(cut, lv);
    int l = 0;
    std::vector<char> assigned(grid.node_count(), 0);
    for (int y : minima) {
      std::size_t node = grid.nearest_node(crits[y].x);
      if (assigned[node] || !union_c1[node] || !(data.f[node] < cut)) continue;
      std::vector<char> comp = flood_below(grid, data, node, cut, &union_c1);
      for (std::size_t k = 0; k < comp.size(); ++k) assigned[k] |= comp[k];
      std::vector<int> inside;
      bool has_labeled = false;
      for (int m : minima) {
        if (!comp[grid.nearest_node(crits[m].x)]) continue;
        inside.push_back(m);
        has_labeled |= labeled[m] != 0;
      }
      if (has_labeled || inside.empty()) continue;
      WellRecord w;
      w.tier = tier;
      w.ell = ++l;
      w.minima = inside;
      w.minimum = pick(inside, w.argmin);
      w.level = kappa;
      w.energy = kappa - crits[w.minimum].f;
      for (const auto& z : crits)
        if (z.separating && std::abs(z.f - kappa) <= tol && adjacent(grid, comp, z.x, adj)) w.saddles.push_back(z.id);
      if (w.saddles.empty())
        throw Error(ErrorKind::numeric, "no separating saddle on the boundary of the well of " +
                                            fmt_point(crits[w.minimum].x, dim));
      w.member = std::move(comp);
      labeled[w.minimum] = 1;
      lab.wells.push_back(std::move(w));
    }
    kappa_prev = kappa;
  }
  return lab;
}

HypothesisReport check_hypotheses(const WellLabeling& labeling, const SaddleSet& ssp,
                                  const std::vector<CriticalPoint>& crits, const TopologyOptions& opt) {
  HypothesisReport r;
  r.violations = ssp.violations;
  int dim = 1;
  for (const auto& c : crits)
    if (c.tangential_eigenvalues.size() == 1) dim = 2;
  for (const auto& w : labeling.wells) {
    if (w.tier != 1) continue;
    for (int id : w.saddles) {
      const CriticalPoint& z = crits[id];
      if (!z.on_boundary()) continue;
      HypothesisItem it;
      it.crit = id;
      it.dn_f = z.dn_f;
      it.tangential = z.tangential_eigenvalues;
      if (z.kind == CritKind::boundary_critical) {
        it.hypothesis = "H1";
        it.angle = z.alignment_angle;
        it.pass = z.index == 1 && z.alignment_angle <= opt.angle_tol;
        if (!it.pass) {
          r.h1 = false;
          char buf[200];
          std::snprintf(buf, sizeof buf, "H1: boundary saddle %s has normal/negative-eigenvector angle %.6g rad (index %d)",
                        fmt_point(z.x, dim).c_str(), z.alignment_angle, z.index);
          r.violations.push_back(buf);
        }
      } else {
        it.hypothesis = "H2";
        bool tmin = true;
        for (double e : z.tangential_eigenvalues) tmin &= e >= opt.tangential_pd_tol;
        it.pass = tmin && z.dn_f > 0.0;
        if (!it.pass) {
          r.h2 = false;
          char buf[200];
          std::snprintf(buf, sizeof buf, "H2: boundary contact %s has d_n f = %.6g and is not a non-degenerate tangential minimum",
                        fmt_point(z.x, dim).c_str(), z.dn_f);
          r.violations.push_back(buf);
        }
      }
      bool dup = false;
      for (const auto& o : r.items) dup |= o.crit == id;
      if (!dup) r.items.push_back(it);
    }
  }
  return r;
}

Topology analyze_topology(const ScalarField& field, const Grid& grid, const TopologyOptions& opt) {
  Topology t;
  t.grid = grid;
  t.data = evaluate_on_grid(field, grid);
  t.crits = find_critical_points(field, grid, opt);
  t.merge = build_merge_structure(grid, t.data);
  t.ssp = separating_saddles(t.merge, t.crits, grid, t.data, opt);
  t.labeling = build_jmap(t.ssp, t.crits, grid, t.data, opt);
  t.hypotheses = check_hypotheses(t.labeling, t.ssp, t.crits, opt);
  return t;
}

nlohmann::json to_json(const CriticalPoint& c, int dim) {
  using nlohmann::json;
  auto vec = [dim](const Vec2& v) {
    json a = json::array();
    for (int i = 0; i < dim; ++i) a.push_back(v[i]);
    return a;
  };
  json j;
  j["id"] = c.id;
  j["kind"] = to_string(c.kind);
  j["location"] = vec(c.x);
  j["value"] = c.f;
  j["index"] = c.index;
  j["hessian_eigenvalues"] = vec(c.eigenvalues);
  json ev = json::array();
  for (int i = 0; i < dim; ++i) ev.push_back(vec(c.eigenvectors.col(i)));
  j["hessian_eigenvectors"] = ev;
  j["det_hessian"] = c.det_hessian;
  j["separating"] = c.separating;
  if (c.on_boundary()) {
    j["face"] = c.face;
    j["dn_f"] = c.dn_f;
    j["tangential_hessian"] = c.tangential_eigenvalues;
    if (c.kind == CritKind::boundary_critical) j["alignment_angle"] = c.alignment_angle;
  }
  return j;
}

nlohmann::json to_json(const Topology& t) {
  using nlohmann::json;
  const int dim = t.grid.dim();
  json j;
  json cps = json::array();
  for (const auto& c : t.crits) cps.push_back(to_json(c, dim));
  j["critical_points"] = cps;
  json ev = json::array();
  for (const auto& e : t.merge.events) {
    json a;
    a["level"] = e.level;
    a["witness"] = json::array();
    Vec2 w = t.grid.coords(e.witness);
    for (int i = 0; i < dim; ++i) a["witness"].push_back(w[i]);
    a["saddle"] = e.saddle;
    ev.push_back(a);
  }
  j["merge_events"] = ev;
  json gs = json::array();
  for (const auto& g : t.ssp.boundary)
    gs.push_back({{"id", g.crit}, {"case", std::string(1, g.kase)}, {"valid", g.valid}});
  j["generalized_saddles"] = gs;
  j["separating_saddles"] = t.ssp.interior;
  json wl = json::array();
  for (const auto& w : t.labeling.wells) {
    json a;
    a["minimum"] = w.minimum;
    a["tier"] = w.tier;
    a["ell"] = w.ell;
    a["level"] = w.level;
    a["energy"] = w.energy;
    a["saddles"] = w.saddles;
    a["argmin"] = w.argmin;
    a["minima"] = w.minima;
    std::size_t cnt = 0;
    for (char m : w.member) cnt += m != 0;
    a["node_count"] = cnt;
    wl.push_back(a);
  }
  j["labeling"] = {{"tol_level", t.labeling.tol_level}, {"wells", wl}};
  json hi = json::array();
  for (const auto& it : t.hypotheses.items)
    hi.push_back({{"id", it.crit},
                  {"hypothesis", it.hypothesis},
                  {"pass", it.pass},
                  {"angle", it.angle},
                  {"dn_f", it.dn_f},
                  {"tangential_hessian", it.tangential}});
  j["hypotheses"] = {{"H1", t.hypotheses.h1},
                     {"H2", t.hypotheses.h2},
                     {"pass", t.hypotheses.pass()},
                     {"items", hi},
                     {"violations", t.hypotheses.violations}};
  return j;
}

}  // namespace wk
