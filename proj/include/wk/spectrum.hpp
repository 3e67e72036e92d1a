#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "wk/field.hpp"

namespace wk {

enum class Stencil {
  factorized,  // A = B^T B with B the weighted edge difference; PSD by construction
  sampled,     // h^2 (-Laplacian) + diag(|grad f|^2 - h tr Hess f)
};

Stencil parse_stencil(const std::string& s);
const char* to_string(Stencil s);

/// Dirichlet Witten Laplacian restricted to interior nodes, in CSR form.
struct SparseSymmetricOperator {
  std::size_t N = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<int> col;
  std::vector<double> val;
  double symmetry_certificate = 0.0;  // max |A_ij - A_ji|
  double max_abs = 0.0;
  double norm = 0.0;  // infinity norm, an upper bound for the 2-norm

  // kept for the 1-D high relative accuracy solver
  int dim = 1;
  double h = 0.0;
  Stencil stencil = Stencil::factorized;
  std::vector<double> f_nodes;  // f on every grid node, boundary included
  double dx = 0.0;

  void apply(const double* x, double* y) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::SparseMatrix<double> to_eigen() const;
  bool tridiagonal() const { return dim == 1; }
};

SparseSymmetricOperator assemble(const ScalarField& field, const Grid& grid, double h,
                                 Stencil stencil = Stencil::factorized);
SparseSymmetricOperator assemble(const Grid& grid, const GridData& data, double h,
                                 Stencil stencil = Stencil::factorized);

enum class Method { dense, shift_invert_lanczos, accurate };

Method parse_method(const std::string& s);
const char* to_string(Method m);

struct ClusterCount {
  int count = 0;
  double gap_ratio = 0.0;  // lambda_{count+1} / lambda_count
  bool clear = false;
  std::string verdict;
};

struct SpectrumResult {
  double h = 0.0;
  Method method = Method::dense;
  std::vector<double> eigenvalues;
  /// ||A v - lambda v|| / (||A|| ||v||)
  std::vector<double> residuals;
  std::vector<char> below_floor;
  double floor = 0.0;
  double norm = 0.0;
  Eigen::MatrixXd eigenvectors;  // N x k, empty unless requested
  double max_gap_ratio = 0.0;
  int max_gap_index = 0;  // 1-based position n of the largest lambda_{n+1}/lambda_n
  ClusterCount cluster;
};

struct SolveOptions {
  int k = 6;
  double tol = 1e-10;
  Method method = Method::dense;
  bool vectors = false;
  unsigned seed = 1;
};

SpectrumResult smallest_eigenpairs(const SparseSymmetricOperator& op, const SolveOptions& opt);

/// Counts eigenvalues below the last ratio lambda_{n+1}/lambda_n >= threshold
/// among eigenvalues of order h or less.
ClusterCount count_small_cluster(const SpectrumResult& res, double h, double threshold = 1e3);

/// Flat dump: 4-byte magic, u32 N, u32 k, then k*N little-endian doubles.
void write_flat_vectors(const std::string& path, const char* magic, const Eigen::MatrixXd& cols);
Eigen::MatrixXd read_flat_vectors(const std::string& path, const char* magic);

nlohmann::json to_json(const SpectrumResult& r);

}  // namespace wk
