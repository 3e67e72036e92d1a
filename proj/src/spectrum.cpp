#include "wk/spectrum.hpp"

#include <lapacke.h>

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <thread>

#include "wk/error.hpp"

namespace wk {

Stencil parse_stencil(const std::string& s) {
  if (s == "factorized") return Stencil::factorized;
  if (s == "sampled") return Stencil::sampled;
  throw Error(ErrorKind::config, "unknown stencil '" + s + "'");
}

const char* to_string(Stencil s) { return s == Stencil::factorized ? "factorized" : "sampled"; }

Method parse_method(const std::string& s) {
  if (s == "dense") return Method::dense;
  if (s == "shift_invert_lanczos" || s == "shift_invert") return Method::shift_invert_lanczos;
  if (s == "accurate") return Method::accurate;
  throw Error(ErrorKind::config, "unknown solver method '" + s + "'");
}

const char* to_string(Method m) {
  switch (m) {
    case Method::dense:
      return "dense";
    case Method::shift_invert_lanczos:
      return "shift_invert_lanczos";
    case Method::accurate:
      return "accurate";
  }
  return "?";
}

void SparseSymmetricOperator::apply(const double* x, double* y) const {
  for (std::size_t r = 0; r < N; ++r) {
    double s = 0.0;
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) s += val[p] * x[col[p]];
    y[r] = s;
  }
}

Eigen::VectorXd SparseSymmetricOperator::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(N);
  apply(x.data(), y.data());
  return y;
}

Eigen::SparseMatrix<double> SparseSymmetricOperator::to_eigen() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(val.size());
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) t.emplace_back(static_cast<int>(r), col[p], val[p]);
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseSymmetricOperator assemble(const ScalarField& field, const Grid& grid, double h, Stencil stencil) {
  return assemble(grid, evaluate_on_grid(field, grid), h, stencil);
}

SparseSymmetricOperator assemble(const Grid& grid, const GridData& data, double h, Stencil stencil) {
  if (!(h > 0.0)) throw Error(ErrorKind::config, "h must be positive");
  SparseSymmetricOperator op;
  op.N = grid.interior_count();
  op.dim = grid.dim();
  op.h = h;
  op.stencil = stencil;
  op.f_nodes = data.f;
  op.dx = grid.dx(0);
  const int dim = grid.dim();

  // neighbours of a node along each axis, with the coupling h^2/dx^2
  auto for_neighbors = [&](std::size_t node, auto&& fn) {
    auto ij = grid.ij(node);
    for (int a = 0; a < dim; ++a) {
      double c = h * h / (grid.dx(a) * grid.dx(a));
      for (int s = -1; s <= 1; s += 2) {
        int ii = ij[0] + (a == 0 ? s : 0);
        int jj = ij[1] + (a == 1 ? s : 0);
        fn(grid.index(ii, jj), c);
      }
    }
  };

  op.row_ptr.assign(op.N + 1, 0);
  for (std::size_t r = 0; r < op.N; ++r) {
    std::size_t cnt = 1;
    for_neighbors(grid.node_of_interior(r), [&](std::size_t nb, double) {
      if (!grid.is_boundary(nb)) ++cnt;
    });
    op.row_ptr[r + 1] = op.row_ptr[r] + cnt;
  }
  op.col.resize(op.row_ptr.back());
  op.val.resize(op.row_ptr.back());

  auto fill = [&](std::size_t r0, std::size_t r1) {
    std::vector<std::pair<int, double>> row;
    for (std::size_t r = r0; r < r1; ++r) {
      std::size_t node = grid.node_of_interior(r);
      const double fi = data.f[node];
      double diag = 0.0;
      row.clear();
      for_neighbors(node, [&](std::size_t nb, double c) {
        if (stencil == Stencil::factorized)
          diag += c * std::exp((fi - data.f[nb]) / h);
        else
          diag += c;
        if (!grid.is_boundary(nb)) row.emplace_back(static_cast<int>(grid.interior_index(nb)), -c);
      });
      if (stencil == Stencil::sampled) diag += data.grad_sq[node] - h * data.laplacian[node];
      row.emplace_back(static_cast<int>(r), diag);
      std::sort(row.begin(), row.end());
      std::size_t p = op.row_ptr[r];
      for (const auto& [c, v] : row) {
        op.col[p] = c;
        op.val[p] = v;
        ++p;
      }
    }
  };
  unsigned nt = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  if (op.N < 20000) nt = 1;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < nt; ++t) pool.emplace_back(fill, op.N * t / nt, op.N * (t + 1) / nt);
  for (auto& t : pool) t.join();

  for (std::size_t r = 0; r < op.N; ++r) {
    double rs = 0.0;
    for (std::size_t p = op.row_ptr[r]; p < op.row_ptr[r + 1]; ++p) {
      if (!std::isfinite(op.val[p])) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "non-finite operator entry in row %zu at h=%g", r, h);
        throw Error(ErrorKind::numeric, buf);
      }
      rs += std::abs(op.val[p]);
      op.max_abs = std::max(op.max_abs, std::abs(op.val[p]));
      std::size_t c = static_cast<std::size_t>(op.col[p]);
      auto b = op.col.begin() + static_cast<long>(op.row_ptr[c]);
      auto e = op.col.begin() + static_cast<long>(op.row_ptr[c + 1]);
      auto it = std::lower_bound(b, e, static_cast<int>(r));
      double t = (it != e && *it == static_cast<int>(r)) ? op.val[static_cast<std::size_t>(it - op.col.begin())] : 0.0;
      op.symmetry_certificate = std::max(op.symmetry_certificate, std::abs(op.val[p] - t));
    }
    op.norm = std::max(op.norm, rs);
  }
  return op;
}

namespace {

struct Pairs {
  std::vector<double> values;
  Eigen::MatrixXd vectors;
};

void tridiag(const SparseSymmetricOperator& op, std::vector<double>& d, std::vector<double>& e) {
  d.assign(op.N, 0.0);
  e.assign(op.N > 0 ? op.N - 1 : 0, 0.0);
  for (std::size_t r = 0; r < op.N; ++r)
    for (std::size_t p = op.row_ptr[r]; p < op.row_ptr[r + 1]; ++p) {
      std::size_t c = static_cast<std::size_t>(op.col[p]);
      if (c == r) d[r] = op.val[p];
      if (c == r + 1) e[r] = op.val[p];
    }
}

Pairs tridiagonal_solve(const SparseSymmetricOperator& op, int k, bool vectors) {
  std::vector<double> d, e;
  tridiag(op, d, e);
  const auto n = static_cast<lapack_int>(op.N);
  lapack_int m = 0;
  std::vector<double> w(op.N);
  std::vector<double> z(vectors ? op.N * static_cast<std::size_t>(k) : 1);
  std::vector<lapack_int> supp(2 * static_cast<std::size_t>(k));
  lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'I', n, d.data(), e.data(), 0.0, 0.0,
                                   1, k, 0.0, &m, w.data(), z.data(), n, supp.data());
  if (info != 0 || m != k) throw Error(ErrorKind::numeric, "tridiagonal eigensolver failed (info " + std::to_string(info) + ")");
  Pairs p;
  p.values.assign(w.begin(), w.begin() + k);
  if (vectors) p.vectors = Eigen::Map<Eigen::MatrixXd>(z.data(), n, k);
  return p;
}

Pairs dense_solve(const SparseSymmetricOperator& op, int k, bool vectors) {
  if (op.tridiagonal()) return tridiagonal_solve(op, k, vectors);
  if (op.N > 6000)
    throw Error(ErrorKind::config, "dense method is limited to 6000 interior nodes; use shift_invert_lanczos");
  const auto n = static_cast<lapack_int>(op.N);
  std::vector<double> a(op.N * op.N, 0.0);
  for (std::size_t r = 0; r < op.N; ++r)
    for (std::size_t p = op.row_ptr[r]; p < op.row_ptr[r + 1]; ++p) a[r + op.N * static_cast<std::size_t>(op.col[p])] = op.val[p];
  lapack_int m = 0;
  std::vector<double> w(op.N);
  std::vector<double> z(vectors ? op.N * static_cast<std::size_t>(k) : 1);
  std::vector<lapack_int> supp(2 * static_cast<std::size_t>(k));
  lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'I', 'U', n, a.data(), n, 0.0, 0.0, 1, k,
                                   0.0, &m, w.data(), z.data(), n, supp.data());
  if (info != 0 || m != k) throw Error(ErrorKind::numeric, "dense eigensolver failed (info " + std::to_string(info) + ")");
  Pairs p;
  p.values.assign(w.begin(), w.begin() + k);
  if (vectors) p.vectors = Eigen::Map<Eigen::MatrixXd>(z.data(), n, k);
  return p;
}

// Upper bidiagonal R with A = R^T R, from the subtraction-free series-conductance
// recurrence in log space.
void bidiagonal_factor(const SparseSymmetricOperator& op, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t N = op.N;
  const double h = op.h;
  const auto& f = op.f_nodes;
  std::vector<double> logw(N + 1);
  const double c = 2.0 * std::log(h / op.dx);
  for (std::size_t j = 0; j <= N; ++j) logw[j] = c - (f[j] + f[j + 1]) / h;
  auto lae = [](double a, double b) {
    double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
  };
  std::vector<double> logd(N);
  double logs = logw[0];
  for (std::size_t j = 0; j < N; ++j) {
    logd[j] = lae(logs, logw[j + 1]);
    logs = logs + logw[j + 1] - logd[j];
  }
  d.resize(N);
  e.assign(N > 0 ? N - 1 : 0, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    d[j] = std::exp(0.5 * logd[j] + f[j + 1] / h);
    if (j + 1 < N) e[j] = -std::exp(logw[j + 1] + f[j + 2] / h - 0.5 * logd[j]);
  }
}

// x <- (R^T R)^{-1} x
void bidiagonal_inverse(const std::vector<double>& d, const std::vector<double>& e, double* x, std::size_t N) {
  x[0] /= d[0];
  for (std::size_t j = 1; j < N; ++j) x[j] = (x[j] - e[j - 1] * x[j - 1]) / d[j];
  x[N - 1] /= d[N - 1];
  for (std::size_t j = N - 1; j-- > 0;) x[j] = (x[j] - e[j] * x[j + 1]) / d[j];
}

Eigen::MatrixXd random_block(std::size_t n, int k, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), k);
  for (int j = 0; j < k; ++j)
    for (std::size_t i = 0; i < n; ++i) X(static_cast<Eigen::Index>(i), j) = g(rng);
  return X;
}

Pairs accurate_solve(const SparseSymmetricOperator& op, int k, bool vectors, unsigned seed) {
  if (!op.tridiagonal()) throw Error(ErrorKind::config, "the accurate method is available in 1-D only");
  if (op.stencil != Stencil::factorized) throw Error(ErrorKind::config, "the accurate method needs the factorized stencil");
  std::vector<double> d, e;
  bidiagonal_factor(op, d, e);
  std::vector<double> sd = d, se = e;
  const auto n = static_cast<lapack_int>(op.N);
  lapack_int info = LAPACKE_dbdsqr(LAPACK_COL_MAJOR, 'U', n, 0, 0, 0, sd.data(), se.data(), nullptr, 1, nullptr, 1,
                                   nullptr, 1);
  if (info != 0) throw Error(ErrorKind::numeric, "bidiagonal singular value solver failed (info " + std::to_string(info) + ")");
  Pairs p;
  for (int j = 0; j < k; ++j) {
    double s = sd[op.N - 1 - static_cast<std::size_t>(j)];
    p.values.push_back(s * s);
  }
  if (!vectors) return p;

  p.vectors = tridiagonal_solve(op, k, true).vectors;
  // Vectors of the exponentially small eigenvalues are out of reach of the
  // tridiagonal solver; take them from subspace iteration with A^{-1}.
  int tiny = 0;
  while (tiny < k && p.values[static_cast<std::size_t>(tiny)] < 1e-8 * op.norm) ++tiny;
  if (tiny == 0) return p;
  const int b = std::min<int>(static_cast<int>(op.N), tiny + 2);
  // Ritz vectors are combinations of an orthonormal basis, never of the raw
  // A^{-1} images, whose huge leading component would swamp the rest.
  auto orth = [b](const Eigen::MatrixXd& M) {
    return Eigen::MatrixXd(Eigen::HouseholderQR<Eigen::MatrixXd>(M).householderQ() *
                           Eigen::MatrixXd::Identity(M.rows(), b));
  };
  auto inv = [&](Eigen::MatrixXd M) {
    for (int j = 0; j < b; ++j) bidiagonal_inverse(d, e, M.col(j).data(), op.N);
    return M;
  };
  Eigen::MatrixXd X = orth(random_block(op.N, b, seed));
  Eigen::MatrixXd prev;
  for (int it = 0; it < 200; ++it) {
    Eigen::MatrixXd Q = orth(inv(X));
    Eigen::MatrixXd M = Q.transpose() * inv(Q);
    M = 0.5 * (M + M.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    // descending theta <-> ascending lambda
    X = Q * es.eigenvectors().rowwise().reverse();
    if (it > 1) {
      double worst = 0.0;
      for (int j = 0; j < tiny; ++j) worst = std::max(worst, 1.0 - std::abs(X.col(j).dot(prev.col(j))));
      if (worst < 1e-14) break;
    }
    prev = X;
  }
  for (int j = 0; j < tiny; ++j) p.vectors.col(j) = X.col(j);
  return p;
}

Pairs lanczos_solve(const SparseSymmetricOperator& op, int k, double tol, unsigned seed) {
  Eigen::SparseMatrix<double> A = op.to_eigen();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  ldlt.compute(A);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::numeric, "sparse LDL^T factorization failed");
  {
    const auto D = ldlt.vectorD();
    const auto& idx = ldlt.permutationP().indices();
    std::vector<int> inv(static_cast<std::size_t>(idx.size()));
    for (Eigen::Index i = 0; i < idx.size(); ++i) inv[static_cast<std::size_t>(idx[i])] = static_cast<int>(i);
    for (Eigen::Index i = 0; i < D.size(); ++i)
      if (!(D[i] > 0.0)) {
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "operator is not positive definite at h=%g: pivot %ld (interior row %d) is %.3g", op.h,
                      static_cast<long>(i), inv[static_cast<std::size_t>(i)], D[i]);
        throw Error(ErrorKind::numeric, buf);
      }
  }
  const Eigen::Index N = static_cast<Eigen::Index>(op.N);
  const int m = static_cast<int>(std::min<Eigen::Index>(N, std::max(2 * k + 10, 30)));
  Eigen::MatrixXd V(N, m + 1);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  auto fresh = [&](int j) {
    // random vector orthogonal to V(:, 0..j-1)
    for (int pass = 0; pass < 3; ++pass) {
      Eigen::VectorXd v(N);
      for (Eigen::Index i = 0; i < N; ++i) v[i] = g(rng);
      for (int r = 0; r < 2; ++r)
        if (j > 0) v -= V.leftCols(j) * (V.leftCols(j).transpose() * v);
      double nv = v.norm();
      if (nv > 1e-8) {
        V.col(j) = v / nv;
        return;
      }
    }
    throw Error(ErrorKind::numeric, "Lanczos could not extend its basis");
  };
  fresh(0);
  int j0 = 0;
  double beta = 0.0;
  Eigen::VectorXd theta;
  Eigen::MatrixXd S;
  const int max_restarts = 10 * k;
  for (int restart = 0;; ++restart) {
    for (int j = j0; j < m; ++j) {
      Eigen::VectorXd w = ldlt.solve(V.col(j));
      Eigen::VectorXd c = V.leftCols(j + 1).transpose() * w;
      w -= V.leftCols(j + 1) * c;
      Eigen::VectorXd c2 = V.leftCols(j + 1).transpose() * w;
      w -= V.leftCols(j + 1) * c2;
      c += c2;
      T(j, j) = c[j];
      beta = w.norm();
      if (beta <= 1e-14 * std::abs(c[j])) {
        beta = 0.0;
        if (j + 1 < m) fresh(j + 1);
        else V.col(m).setZero();
      } else {
        V.col(j + 1) = w / beta;
      }
      if (j + 1 < m) T(j + 1, j) = T(j, j + 1) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    theta = es.eigenvalues().reverse();
    S = es.eigenvectors().rowwise().reverse();
    bool done = true;
    for (int i = 0; i < k; ++i)
      if (std::abs(beta * S(m - 1, i)) > tol * std::abs(theta[i])) done = false;
    if (done) break;
    if (restart >= max_restarts)
      throw Error(ErrorKind::numeric, "Lanczos did not converge after " + std::to_string(max_restarts) + " restarts");
    int l = std::clamp((m + k) / 2, k + 1, m - 1);
    Eigen::MatrixXd Vn = V.leftCols(m) * S.leftCols(l);
    Eigen::VectorXd r = V.col(m);
    V.leftCols(l) = Vn;
    V.col(l) = r;
    T.setZero();
    for (int i = 0; i < l; ++i) {
      T(i, i) = theta[i];
      T(i, l) = T(l, i) = beta * S(m - 1, i);
    }
    j0 = l;
    // first step after restart: the diagonal entry and arrow row come from the
    // projection, the arrow coupling above is kept
    Eigen::VectorXd w = ldlt.solve(V.col(l));
    Eigen::VectorXd c = V.leftCols(l + 1).transpose() * w;
    w -= V.leftCols(l + 1) * c;
    Eigen::VectorXd c2 = V.leftCols(l + 1).transpose() * w;
    w -= V.leftCols(l + 1) * c2;
    c += c2;
    T(l, l) = c[l];
    beta = w.norm();
    if (l + 1 < m) {
      if (beta <= 1e-14 * std::abs(c[l])) {
        beta = 0.0;
        fresh(l + 1);
      } else {
        V.col(l + 1) = w / beta;
      }
      T(l + 1, l) = T(l, l + 1) = beta;
    } else {
      V.col(m) = beta > 0 ? Eigen::VectorXd(w / beta) : Eigen::VectorXd::Zero(N);
    }
    j0 = l + 1;
  }
  Pairs p;
  p.vectors = V.leftCols(m) * S.leftCols(k);
  for (int i = 0; i < k; ++i) {
    p.vectors.col(i).normalize();
    p.values.push_back(1.0 / theta[i]);
  }
  return p;
}

}  // namespace

SpectrumResult smallest_eigenpairs(const SparseSymmetricOperator& op, const SolveOptions& opt) {
  if (opt.k < 1 || static_cast<std::size_t>(opt.k) >= op.N)
    throw Error(ErrorKind::config, "eigenvalue count k must satisfy 1 <= k < N");
  Pairs p;
  const bool need_vectors = true;  // residuals need them
  switch (opt.method) {
    case Method::dense:
      p = dense_solve(op, opt.k, need_vectors);
      break;
    case Method::accurate:
      p = accurate_solve(op, opt.k, need_vectors, opt.seed);
      break;
    case Method::shift_invert_lanczos:
      p = lanczos_solve(op, opt.k, opt.tol, opt.seed);
      break;
  }
  SpectrumResult r;
  r.h = op.h;
  r.method = opt.method;
  r.norm = op.norm;
  r.floor = opt.method == Method::accurate ? 0.0 : 1e-11 * op.norm;
  r.eigenvalues = p.values;
  for (int j = 0; j < opt.k; ++j) {
    Eigen::VectorXd v = p.vectors.col(j);
    double nv = v.norm();
    Eigen::VectorXd res = op.apply(v) - p.values[static_cast<std::size_t>(j)] * v;
    r.residuals.push_back(res.norm() / (op.norm * nv));
    r.below_floor.push_back(p.values[static_cast<std::size_t>(j)] < r.floor ? 1 : 0);
  }
  if (opt.vectors) r.eigenvectors = std::move(p.vectors);
  for (int n = 1; n < opt.k; ++n) {
    double a = r.eigenvalues[static_cast<std::size_t>(n - 1)];
    double b = r.eigenvalues[static_cast<std::size_t>(n)];
    double ratio = a > 0.0 ? b / a : std::numeric_limits<double>::infinity();
    if (ratio > r.max_gap_ratio) {
      r.max_gap_ratio = ratio;
      r.max_gap_index = n;
    }
  }
  r.cluster = count_small_cluster(r, op.h);
  return r;
}

ClusterCount count_small_cluster(const SpectrumResult& res, double h, double threshold) {
  ClusterCount c;
  const auto& ev = res.eigenvalues;
  for (std::size_t n = 1; n < ev.size(); ++n) {
    double a = ev[n - 1];
    if (a > h) break;
    double ratio = a > 0.0 ? ev[n] / a : std::numeric_limits<double>::infinity();
    if (ratio >= threshold) {
      c.count = static_cast<int>(n);
      c.gap_ratio = ratio;
    }
  }
  c.clear = c.count > 0;
  if (c.clear) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d eigenvalue(s) below a gap of ratio %.3g", c.count, c.gap_ratio);
    c.verdict = buf;
  } else {
    c.verdict = "no clear cluster";
  }
  return c;
}

void write_flat_vectors(const std::string& path, const char* magic, const Eigen::MatrixXd& cols) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::config, "cannot write " + path);
  out.write(magic, 4);
  auto put32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  put32(static_cast<std::uint32_t>(cols.rows()));
  put32(static_cast<std::uint32_t>(cols.cols()));
  for (Eigen::Index j = 0; j < cols.cols(); ++j)
    for (Eigen::Index i = 0; i < cols.rows(); ++i) {
      std::uint64_t bits;
      double v = cols(i, j);
      std::memcpy(&bits, &v, 8);
      unsigned char b[8];
      for (int q = 0; q < 8; ++q) b[q] = static_cast<unsigned char>(bits >> (8 * q));
      out.write(reinterpret_cast<const char*>(b), 8);
    }
}

Eigen::MatrixXd read_flat_vectors(const std::string& path, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::config, "cannot read " + path);
  char m[4];
  in.read(m, 4);
  if (!in || std::memcmp(m, magic, 4) != 0) throw Error(ErrorKind::config, path + ": bad magic");
  auto get = [&](int bytes) {
    unsigned char b[8] = {};
    in.read(reinterpret_cast<char*>(b), bytes);
    std::uint64_t v = 0;
    for (int q = 0; q < bytes; ++q) v |= static_cast<std::uint64_t>(b[q]) << (8 * q);
    return v;
  };
  auto N = static_cast<Eigen::Index>(get(4));
  auto k = static_cast<Eigen::Index>(get(4));
  Eigen::MatrixXd out(N, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < N; ++i) {
      std::uint64_t bits = get(8);
      std::memcpy(&out(i, j), &bits, 8);
    }
  if (!in) throw Error(ErrorKind::config, path + ": truncated");
  return out;
}

nlohmann::json to_json(const SpectrumResult& r) {
  std::vector<bool> bf(r.below_floor.begin(), r.below_floor.end());
  return {{"h", r.h},
          {"method", to_string(r.method)},
          {"eigenvalues", r.eigenvalues},
          {"residuals", r.residuals},
          {"below_floor", bf},
          {"floor", r.floor},
          {"norm", r.norm},
          {"max_gap_ratio", r.max_gap_ratio},
          {"max_gap_index", r.max_gap_index},
          {"cluster", {{"count", r.cluster.count}, {"gap_ratio", r.cluster.gap_ratio}, {"verdict", r.cluster.verdict}}}};
}

}  // namespace wk
