#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace wk {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class Op { num, var, add, sub, mul, div, pow, neg, exp, sin, cos, sqrt };

struct ExprNode {
  Op op = Op::num;
  double value = 0.0;
  int var = 0;
  int lhs = -1;
  int rhs = -1;
};

/// Value, gradient and Hessian at one point. The Hessian is stored by its
/// three distinct entries, so the assembled matrix is symmetric bit for bit.
struct Jet {
  double v = 0.0;
  double g0 = 0.0, g1 = 0.0;
  double h00 = 0.0, h01 = 0.0, h11 = 0.0;
};

class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(std::vector<ExprNode> nodes, int root, int dim, std::string source);

  int dim() const { return dim_; }
  const std::string& source() const { return source_; }
  const std::vector<ExprNode>& nodes() const { return nodes_; }
  int root() const { return root_; }

  double value(const Vec2& p) const;
  Vec2 gradient(const Vec2& p) const;
  Mat2 hessian(const Vec2& p) const;
  Jet jet(const Vec2& p) const;

  /// Fully parenthesised rendering that reparses to the same tree.
  std::string to_string() const;
  bool same_structure(const ScalarField& other) const;

 private:
  std::vector<ExprNode> nodes_;
  int root_ = -1;
  int dim_ = 1;
  std::string source_;
};

/// Throws wk::Error(syntax) with a character position, or on an unknown
/// identifier, or when x2 appears in a 1-D field.
ScalarField parse_field(const std::string& source, int dim);

struct Domain {
  int dim = 1;
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Zero();

  Domain() = default;
  Domain(int d, const std::vector<double>& lower, const std::vector<double>& upper);

  /// Faces are numbered 2*axis + side, side 0 for the lower face.
  int face_count() const { return 2 * dim; }
  Vec2 normal(int face) const;
  bool contains(const Vec2& p, double slack = 0.0) const;
  /// Distance from p to the closest face.
  double boundary_distance(const Vec2& p) const;
  /// Face closest to p.
  int nearest_face(const Vec2& p) const;
};

class Grid {
 public:
  Grid() = default;
  Grid(const Domain& domain, const std::vector<int>& nodes_per_axis);

  int dim() const { return dim_; }
  int n(int axis) const { return n_[axis]; }
  double dx(int axis) const { return dx_[axis]; }
  double max_dx() const;
  double cell_volume() const;
  const Domain& domain() const { return domain_; }

  std::size_t node_count() const;
  std::size_t interior_count() const;
  std::size_t index(int i, int j = 0) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(j) * n_[0]; }
  std::array<int, 2> ij(std::size_t node) const;
  Vec2 coords(std::size_t node) const;
  bool is_boundary(std::size_t node) const;
  /// Interior numbering used by the operator; -1 for boundary nodes.
  long interior_index(std::size_t node) const;
  std::size_t node_of_interior(std::size_t k) const;
  std::size_t nearest_node(const Vec2& p) const;
  /// Axis neighbours of a node (boundary neighbours included).
  int neighbors(std::size_t node, std::array<std::size_t, 4>& out) const;

 private:
  Domain domain_;
  int dim_ = 1;
  std::array<int, 2> n_{1, 1};
  std::array<double, 2> dx_{1.0, 1.0};
};

struct GridData {
  std::vector<double> f;
  std::vector<double> grad0, grad1;
  std::vector<double> grad_sq;
  std::vector<double> laplacian;  // trace of the exact Hessian
};

GridData evaluate_on_grid(const ScalarField& field, const Grid& grid);

}  // namespace wk
