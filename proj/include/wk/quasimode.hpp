#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "wk/kramers.hpp"
#include "wk/spectrum.hpp"
#include "wk/topology.hpp"

namespace wk {

/// Cylinder half-lengths and the even cut-off chi: 1 on [-d1/2, d1/2], 0 off
/// [-d1, d1], quintic smoothstep in between.
struct CutoffProfile {
  double delta1 = 0.0;  // defaults before validation
  double delta2 = 0.0;
  struct Sizes {
    double d1 = 0.0;
    double d2 = 0.0;
    int halvings = 0;
  };
  std::map<int, Sizes> sizes;  // per saddle after validation
  int halvings = 0;
  std::vector<std::string> adjustments;

  double d1(int saddle) const;
  double d2(int saddle) const;
  double chi(double t) const;
};

struct Cylinder {
  int saddle = -1;
  SaddleKind kind = SaddleKind::interior;
  Vec2 center = Vec2::Zero();
  Vec2 axis = Vec2::Zero();     // v_d direction; the well lies on v_d < 0
  Vec2 lateral = Vec2::Zero();  // zero in 1-D
  double rate = 0.0;            // d_n f for boundary_noncritical, |mu_d| otherwise
  double delta1 = 0.0;
  double delta2 = 0.0;
  double wall_margin = 0.0;  // min f on the lateral wall minus f(z); inf in 1-D
  double h = 0.0;
  double denominator = 0.0;
  std::vector<double> tail;  // integral of the weight from each panel edge to the end

  static constexpr int kPanels = 256;

  double vd(const Vec2& p) const { return axis.dot(p - center); }
  double vt(const Vec2& p) const { return lateral.dot(p - center); }
  bool in_box(const Vec2& p) const;
  /// Inside the box where the transition profile is not constant.
  bool in_transition(const Vec2& p) const;
  double weight(double t) const;
  void tabulate(double h);
  /// One-dimensional transition profile in v_d: 1 on the well side, 0 beyond.
  double profile(double v) const;
};

/// Default half-lengths from the saddle geometry, then shrunk until cylinders
/// are disjoint, their walls sit above f(z), and every well keeps a margin.
CutoffProfile choose_profile(const Topology& topo);

std::vector<Cylinder> well_cylinders(const Topology& topo, const WellRecord& well, const CutoffProfile& prof,
                                     double h);

struct QuasiMode {
  int minimum = -1;
  double h = 0.0;
  double f_min = 0.0;           // f(x)
  double level = 0.0;           // f(j(x))
  std::vector<double> phi;      // transition function on every node
  std::vector<double> psi;      // normalized quasi-mode, zero on the boundary
  double z_hat = 0.0;           // Z_x e^{f(x)/h}
  double z_hat_predicted = 0.0;  // (pi h)^{d/4} B^{1/2}
  std::vector<Cylinder> cylinders;
  std::vector<char> support;  // nodes where phi may be nonzero
  std::size_t plateau_nodes = 0;
  double margin = 0.0;  // level gap to the first node the support may not reach
  double c1 = 0.0, c2 = 0.0;

  Eigen::VectorXd interior(const Grid& grid) const;
};

QuasiMode build_quasimode(const Topology& topo, const WellRecord& well, double h, const CutoffProfile& prof);

struct EnergyBreakdown {
  double total = 0.0;
  std::vector<std::pair<int, double>> cylinders;  // (saddle, energy)
  double collar = 0.0;
};

EnergyBreakdown dirichlet_energy(const QuasiMode& qm, const Topology& topo);

struct InteractionMatrices {
  std::vector<int> minima;
  Eigen::MatrixXd E;  // <d psi_i, d psi_j>
  Eigen::MatrixXd S;  // S_ij = E_ji / sqrt(E_ii)
  Eigen::VectorXd p;
  Eigen::MatrixXd D;
  Eigen::MatrixXd T;
  Eigen::MatrixXd gram;
  Eigen::MatrixXd gram_theta;
  Eigen::VectorXd singular_values;  // of S, descending
  Eigen::VectorXd ritz;             // generalized eigenvalues of (E, gram), ascending
  std::vector<std::pair<int, int>> structural_zeros;
  bool zeros_exact = true;
};

/// The quasi-modes must be ordered like `pred.predictions`.
InteractionMatrices interaction_matrix(const std::vector<QuasiMode>& qms, const Topology& topo,
                                       const PredictionSet& pred);

struct ProjectorReport {
  bool ran = false;
  std::string verdict;
  std::vector<double> leak;        // ||(1 - pi_h) psi_x||
  std::vector<double> leak_ratio;  // leak / ||d psi_x||
  std::vector<double> leak_bound;  // 10 ||d psi_x|| / sqrt(lambda_{m+1})
  bool bound_holds = true;
  double gram_condition = 0.0;
  std::vector<double> lambdas;
  std::vector<double> sv_squared;  // ascending
  std::vector<double> sv_rel_error;
  std::vector<double> ritz_rel_error;
};

ProjectorReport projector_diagnostics(const std::vector<QuasiMode>& qms, const InteractionMatrices& im,
                                      const SpectrumResult& spectrum, const Grid& grid);

struct CutoffFunction {
  std::function<double(const Vec2&)> value;
  std::function<Vec2(const Vec2&)> gradient;
};

/// Two-piece partition cos/sin of a smoothstep angle along axis 0 on [a, b].
std::vector<CutoffFunction> two_piece_partition(double a, double b);

struct ImsResult {
  double max_residual = 0.0;        // against the pointwise h^2 |grad chi|^2 psi^2 term
  double max_exact_residual = 0.0;  // against the discrete edge form of the same term
  double max_norm_sq = 0.0;
};

/// Smooth random test functions built from sine modes vanishing on the boundary.
ImsResult ims_identity_check(const Grid& grid, const GridData& data, double h,
                             const std::vector<CutoffFunction>& partition, int trials = 20, unsigned seed = 7);

struct FanResult {
  bool pass = true;
  double max_violation = 0.0;
};

FanResult fan_inequality_check(int trials, int m, unsigned seed = 11);

nlohmann::json to_json(const QuasiMode& q, const EnergyBreakdown& e);
nlohmann::json to_json(const InteractionMatrices& im);
nlohmann::json to_json(const ProjectorReport& p);

}  // namespace wk
