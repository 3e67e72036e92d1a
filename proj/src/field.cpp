#include "wk/field.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "wk/error.hpp"

namespace wk {

namespace {

class Parser {
 public:
  Parser(const std::string& src, int dim) : s_(src), dim_(dim) {}

  std::vector<ExprNode> nodes;

  int parse() {
    int r = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return r;
  }

 private:
  const std::string& s_;
  int dim_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::syntax, "syntax error at position " + std::to_string(pos_) + ": " + msg);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int push(ExprNode n) {
    nodes.push_back(n);
    return static_cast<int>(nodes.size()) - 1;
  }

  int binary(Op op, int a, int b) {
    ExprNode n;
    n.op = op;
    n.lhs = a;
    n.rhs = b;
    return push(n);
  }

  int expr() {
    int a = term();
    for (;;) {
      if (accept('+'))
        a = binary(Op::add, a, term());
      else if (accept('-'))
        a = binary(Op::sub, a, term());
      else
        return a;
    }
  }

  int term() {
    int a = unary();
    for (;;) {
      if (accept('*'))
        a = binary(Op::mul, a, unary());
      else if (accept('/'))
        a = binary(Op::div, a, unary());
      else
        return a;
    }
  }

  int unary() {
    if (accept('-')) return binary(Op::neg, unary(), -1);
    return power();
  }

  int power() {
    int a = primary();
    if (accept('^')) return binary(Op::pow, a, unary());
    return a;
  }

  int primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    if (accept('(')) {
      int e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  int number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    std::string text = s_.substr(start, pos_ - start);
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) {
      pos_ = start;
      fail("malformed number '" + text + "'");
    }
    ExprNode n;
    n.op = Op::num;
    n.value = v;
    return push(n);
  }

  int identifier() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    std::string id = s_.substr(start, pos_ - start);
    if (id == "x1" || id == "x2") {
      int v = id[1] - '1';
      if (v >= dim_) {
        pos_ = start;
        throw Error(ErrorKind::syntax, "dimension mismatch at position " + std::to_string(start) + ": variable " +
                                           id + " in a " + std::to_string(dim_) + "-D field");
      }
      ExprNode n;
      n.op = Op::var;
      n.var = v;
      return push(n);
    }
    Op op;
    if (id == "exp")
      op = Op::exp;
    else if (id == "sin")
      op = Op::sin;
    else if (id == "cos")
      op = Op::cos;
    else if (id == "sqrt")
      op = Op::sqrt;
    else {
      pos_ = start;
      throw Error(ErrorKind::syntax, "unknown identifier '" + id + "' at position " + std::to_string(start));
    }
    if (!accept('(')) fail("expected '(' after " + id);
    int a = expr();
    if (!accept(')')) fail("expected ')'");
    return binary(op, a, -1);
  }
};

Jet constant(double c) {
  Jet j;
  j.v = c;
  return j;
}

Jet add(const Jet& a, const Jet& b, double sb) {
  Jet r;
  r.v = a.v + sb * b.v;
  r.g0 = a.g0 + sb * b.g0;
  r.g1 = a.g1 + sb * b.g1;
  r.h00 = a.h00 + sb * b.h00;
  r.h01 = a.h01 + sb * b.h01;
  r.h11 = a.h11 + sb * b.h11;
  return r;
}

Jet mul(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v * b.v;
  r.g0 = a.v * b.g0 + b.v * a.g0;
  r.g1 = a.v * b.g1 + b.v * a.g1;
  r.h00 = a.v * b.h00 + b.v * a.h00 + 2.0 * a.g0 * b.g0;
  r.h01 = a.v * b.h01 + b.v * a.h01 + a.g0 * b.g1 + a.g1 * b.g0;
  r.h11 = a.v * b.h11 + b.v * a.h11 + 2.0 * a.g1 * b.g1;
  return r;
}

// Chain rule for a scalar function with derivatives d1, d2 at u.v.
Jet chain(const Jet& u, double v, double d1, double d2) {
  Jet r;
  r.v = v;
  r.g0 = d1 * u.g0;
  r.g1 = d1 * u.g1;
  r.h00 = d1 * u.h00 + d2 * u.g0 * u.g0;
  r.h01 = d1 * u.h01 + d2 * u.g0 * u.g1;
  r.h11 = d1 * u.h11 + d2 * u.g1 * u.g1;
  return r;
}

bool is_constant(const std::vector<ExprNode>& n, int i) {
  const ExprNode& e = n[i];
  if (e.op == Op::var) return false;
  if (e.op == Op::num) return true;
  if (e.lhs >= 0 && !is_constant(n, e.lhs)) return false;
  if (e.rhs >= 0 && !is_constant(n, e.rhs)) return false;
  return true;
}

Jet power_const(const Jet& u, double c) {
  if (c == 0.0) return constant(1.0);
  if (c == 1.0) return u;
  double v = std::pow(u.v, c);
  double d1 = c * std::pow(u.v, c - 1.0);
  double d2 = (c == 2.0) ? 2.0 : c * (c - 1.0) * std::pow(u.v, c - 2.0);
  return chain(u, v, d1, d2);
}

Jet eval(const std::vector<ExprNode>& n, int i, const Vec2& p) {
  const ExprNode& e = n[i];
  switch (e.op) {
    case Op::num:
      return constant(e.value);
    case Op::var: {
      Jet j;
      j.v = p[e.var];
      (e.var == 0 ? j.g0 : j.g1) = 1.0;
      return j;
    }
    case Op::add:
      return add(eval(n, e.lhs, p), eval(n, e.rhs, p), 1.0);
    case Op::sub:
      return add(eval(n, e.lhs, p), eval(n, e.rhs, p), -1.0);
    case Op::mul:
      return mul(eval(n, e.lhs, p), eval(n, e.rhs, p));
    case Op::div: {
      Jet b = eval(n, e.rhs, p);
      double inv = 1.0 / b.v;
      Jet r = chain(b, inv, -inv * inv, 2.0 * inv * inv * inv);
      return mul(eval(n, e.lhs, p), r);
    }
    case Op::neg:
      return add(constant(0.0), eval(n, e.lhs, p), -1.0);
    case Op::pow: {
      Jet a = eval(n, e.lhs, p);
      if (is_constant(n, e.rhs)) return power_const(a, eval(n, e.rhs, p).v);
      Jet b = eval(n, e.rhs, p);
      Jet la = chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v));
      Jet prod = mul(b, la);
      double ev = std::exp(prod.v);
      return chain(prod, ev, ev, ev);
    }
    case Op::exp: {
      Jet u = eval(n, e.lhs, p);
      double ev = std::exp(u.v);
      return chain(u, ev, ev, ev);
    }
    case Op::sin: {
      Jet u = eval(n, e.lhs, p);
      double s = std::sin(u.v), c = std::cos(u.v);
      return chain(u, s, c, -s);
    }
    case Op::cos: {
      Jet u = eval(n, e.lhs, p);
      double s = std::sin(u.v), c = std::cos(u.v);
      return chain(u, c, -s, -c);
    }
    case Op::sqrt: {
      Jet u = eval(n, e.lhs, p);
      double r = std::sqrt(u.v);
      return chain(u, r, 0.5 / r, -0.25 / (r * u.v));
    }
  }
  return constant(std::numeric_limits<double>::quiet_NaN());
}

std::string render(const std::vector<ExprNode>& n, int i) {
  const ExprNode& e = n[i];
  auto bin = [&](const char* op) { return "(" + render(n, e.lhs) + " " + op + " " + render(n, e.rhs) + ")"; };
  switch (e.op) {
    case Op::num: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", e.value);
      return buf;
    }
    case Op::var:
      return "x" + std::to_string(e.var + 1);
    case Op::add:
      return bin("+");
    case Op::sub:
      return bin("-");
    case Op::mul:
      return bin("*");
    case Op::div:
      return bin("/");
    case Op::pow:
      return bin("^");
    case Op::neg:
      return "(-" + render(n, e.lhs) + ")";
    case Op::exp:
      return "exp(" + render(n, e.lhs) + ")";
    case Op::sin:
      return "sin(" + render(n, e.lhs) + ")";
    case Op::cos:
      return "cos(" + render(n, e.lhs) + ")";
    case Op::sqrt:
      return "sqrt(" + render(n, e.lhs) + ")";
  }
  return "?";
}

bool same(const std::vector<ExprNode>& a, int i, const std::vector<ExprNode>& b, int j) {
  if ((i < 0) != (j < 0)) return false;
  if (i < 0) return true;
  const ExprNode& x = a[i];
  const ExprNode& y = b[j];
  if (x.op != y.op) return false;
  if (x.op == Op::num) return x.value == y.value;
  if (x.op == Op::var) return x.var == y.var;
  return same(a, x.lhs, b, y.lhs) && same(a, x.rhs, b, y.rhs);
}

}  // namespace

ScalarField::ScalarField(std::vector<ExprNode> nodes, int root, int dim, std::string source)
    : nodes_(std::move(nodes)), root_(root), dim_(dim), source_(std::move(source)) {}

Jet ScalarField::jet(const Vec2& p) const { return eval(nodes_, root_, p); }

double ScalarField::value(const Vec2& p) const { return jet(p).v; }

Vec2 ScalarField::gradient(const Vec2& p) const {
  Jet j = jet(p);
  return Vec2(j.g0, dim_ > 1 ? j.g1 : 0.0);
}

Mat2 ScalarField::hessian(const Vec2& p) const {
  Jet j = jet(p);
  Mat2 h;
  if (dim_ > 1)
    h << j.h00, j.h01, j.h01, j.h11;
  else
    h << j.h00, 0.0, 0.0, 0.0;
  return h;
}

std::string ScalarField::to_string() const { return render(nodes_, root_); }

bool ScalarField::same_structure(const ScalarField& other) const {
  return dim_ == other.dim_ && same(nodes_, root_, other.nodes_, other.root_);
}

ScalarField parse_field(const std::string& source, int dim) {
  if (dim != 1 && dim != 2) throw Error(ErrorKind::config, "field dimension must be 1 or 2");
  Parser p(source, dim);
  int root = p.parse();
  return ScalarField(std::move(p.nodes), root, dim, source);
}

Domain::Domain(int d, const std::vector<double>& lower, const std::vector<double>& upper) : dim(d) {
  if (d != 1 && d != 2) throw Error(ErrorKind::config, "domain dimension must be 1 or 2");
  if (static_cast<int>(lower.size()) != d || static_cast<int>(upper.size()) != d)
    throw Error(ErrorKind::config, "domain corners must have " + std::to_string(d) + " components");
  for (int a = 0; a < d; ++a) {
    lo[a] = lower[a];
    hi[a] = upper[a];
    if (!(lo[a] < hi[a])) throw Error(ErrorKind::config, "domain lower corner must be below the upper corner");
  }
}

Vec2 Domain::normal(int face) const {
  Vec2 n = Vec2::Zero();
  n[face / 2] = (face % 2 == 0) ? -1.0 : 1.0;
  return n;
}

bool Domain::contains(const Vec2& p, double slack) const {
  for (int a = 0; a < dim; ++a)
    if (p[a] < lo[a] - slack || p[a] > hi[a] + slack) return false;
  return true;
}

double Domain::boundary_distance(const Vec2& p) const {
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < dim; ++a) d = std::min({d, std::abs(p[a] - lo[a]), std::abs(hi[a] - p[a])});
  return d;
}

int Domain::nearest_face(const Vec2& p) const {
  int best = 0;
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < dim; ++a) {
    if (std::abs(p[a] - lo[a]) < d) {
      d = std::abs(p[a] - lo[a]);
      best = 2 * a;
    }
    if (std::abs(hi[a] - p[a]) < d) {
      d = std::abs(hi[a] - p[a]);
      best = 2 * a + 1;
    }
  }
  return best;
}

Grid::Grid(const Domain& domain, const std::vector<int>& nodes_per_axis) : domain_(domain), dim_(domain.dim) {
  if (static_cast<int>(nodes_per_axis.size()) != dim_)
    throw Error(ErrorKind::config, "grid needs one node count per axis");
  for (int a = 0; a < dim_; ++a) {
    if (nodes_per_axis[a] < 33)
      throw Error(ErrorKind::config, "grid too coarse: axis " + std::to_string(a + 1) + " has " +
                                         std::to_string(nodes_per_axis[a]) + " nodes (minimum 33)");
    n_[a] = nodes_per_axis[a];
    dx_[a] = (domain.hi[a] - domain.lo[a]) / (n_[a] - 1);
  }
}

double Grid::max_dx() const { return dim_ == 1 ? dx_[0] : std::max(dx_[0], dx_[1]); }

double Grid::cell_volume() const { return dim_ == 1 ? dx_[0] : dx_[0] * dx_[1]; }

std::size_t Grid::node_count() const {
  return static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(dim_ > 1 ? n_[1] : 1);
}

std::size_t Grid::interior_count() const {
  std::size_t c = n_[0] - 2;
  if (dim_ > 1) c *= static_cast<std::size_t>(n_[1] - 2);
  return c;
}

std::array<int, 2> Grid::ij(std::size_t node) const {
  return {static_cast<int>(node % n_[0]), static_cast<int>(node / n_[0])};
}

Vec2 Grid::coords(std::size_t node) const {
  auto [i, j] = ij(node);
  Vec2 p = Vec2::Zero();
  p[0] = (i == n_[0] - 1) ? domain_.hi[0] : domain_.lo[0] + i * dx_[0];
  if (dim_ > 1) p[1] = (j == n_[1] - 1) ? domain_.hi[1] : domain_.lo[1] + j * dx_[1];
  return p;
}

bool Grid::is_boundary(std::size_t node) const {
  auto [i, j] = ij(node);
  if (i == 0 || i == n_[0] - 1) return true;
  return dim_ > 1 && (j == 0 || j == n_[1] - 1);
}

long Grid::interior_index(std::size_t node) const {
  if (is_boundary(node)) return -1;
  auto [i, j] = ij(node);
  if (dim_ == 1) return i - 1;
  return static_cast<long>(i - 1) + static_cast<long>(j - 1) * (n_[0] - 2);
}

std::size_t Grid::node_of_interior(std::size_t k) const {
  if (dim_ == 1) return k + 1;
  std::size_t w = n_[0] - 2;
  return index(static_cast<int>(k % w) + 1, static_cast<int>(k / w) + 1);
}

std::size_t Grid::nearest_node(const Vec2& p) const {
  int i = static_cast<int>(std::lround((p[0] - domain_.lo[0]) / dx_[0]));
  i = std::clamp(i, 0, n_[0] - 1);
  int j = 0;
  if (dim_ > 1) {
    j = static_cast<int>(std::lround((p[1] - domain_.lo[1]) / dx_[1]));
    j = std::clamp(j, 0, n_[1] - 1);
  }
  return index(i, j);
}

int Grid::neighbors(std::size_t node, std::array<std::size_t, 4>& out) const {
  auto [i, j] = ij(node);
  int c = 0;
  if (i > 0) out[c++] = index(i - 1, j);
  if (i < n_[0] - 1) out[c++] = index(i + 1, j);
  if (dim_ > 1) {
    if (j > 0) out[c++] = index(i, j - 1);
    if (j < n_[1] - 1) out[c++] = index(i, j + 1);
  }
  return c;
}

GridData evaluate_on_grid(const ScalarField& field, const Grid& grid) {
  if (field.dim() != grid.dim()) throw Error(ErrorKind::config, "field and grid dimensions differ");
  std::size_t n = grid.node_count();
  GridData d;
  d.f.resize(n);
  d.grad0.resize(n);
  d.grad1.resize(n);
  d.grad_sq.resize(n);
  d.laplacian.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vec2 p = grid.coords(k);
    Jet j = field.jet(p);
    double g1 = grid.dim() > 1 ? j.g1 : 0.0;
    double lap = j.h00 + (grid.dim() > 1 ? j.h11 : 0.0);
    if (!std::isfinite(j.v) || !std::isfinite(j.g0) || !std::isfinite(g1) || !std::isfinite(lap)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "non-finite potential at node %zu (%.6g, %.6g)", k, p[0], p[1]);
      throw Error(ErrorKind::numeric, buf);
    }
    d.f[k] = j.v;
    d.grad0[k] = j.g0;
    d.grad1[k] = g1;
    d.grad_sq[k] = j.g0 * j.g0 + g1 * g1;
    d.laplacian[k] = lap;
  }
  return d;
}

}  // namespace wk
