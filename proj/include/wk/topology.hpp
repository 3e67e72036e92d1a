#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "wk/field.hpp"

namespace wk {

enum class CritKind {
  interior,             // grad f = 0 inside the domain
  boundary_critical,    // grad f = 0 on a face
  boundary_tangential,  // critical for the restriction to a face only
};

const char* to_string(CritKind k);

struct CriticalPoint {
  int id = -1;
  CritKind kind = CritKind::interior;
  Vec2 x = Vec2::Zero();
  double f = 0.0;
  Vec2 grad = Vec2::Zero();
  /// Index of Hess f, or of the tangential Hessian for boundary_tangential.
  int index = 0;
  Vec2 eigenvalues = Vec2::Zero();  // ascending, first dim entries used
  Mat2 eigenvectors = Mat2::Identity();
  double mu_d = 0.0;  // most negative Hessian eigenvalue, 0 when none
  double det_hessian = 0.0;

  int face = -1;  // boundary points only
  double dn_f = 0.0;
  std::vector<double> tangential_eigenvalues;
  double alignment_angle = 0.0;  // between n and the mu_d eigenvector

  bool separating = false;  // interior separating saddle

  bool on_boundary() const { return face >= 0; }
  /// Determinant of the tangential Hessian; the empty product in 1-D.
  double det_tangential() const;
};

enum class TieBreak { lexicographic_min, lexicographic_max };

struct TopologyOptions {
  double tol_grad = 1e-9;        // relative to max |grad f| on the grid (floor 1)
  double tol_degenerate = 1e-6;  // absolute bound on |Hessian eigenvalue|
  double dedup_cells = 2.0;
  int max_newton = 50;
  double angle_tol = 1e-3;
  double tangential_pd_tol = 1e-8;
  double tol_level_rel = 1e-9;
  TieBreak tie_break = TieBreak::lexicographic_min;
};

std::vector<CriticalPoint> find_critical_points(const ScalarField& field, const Grid& grid,
                                                const TopologyOptions& opt = {});

struct MergeEvent {
  double level = 0.0;
  std::size_t witness = 0;
  std::size_t birth_a = 0;  // birth node of the surviving (older) component
  std::size_t birth_b = 0;
  int saddle = -1;  // refined interior saddle, -1 for a gateway event
};

struct MergeStructure {
  std::vector<std::size_t> order;  // filtration
  std::vector<MergeEvent> events;
  std::vector<std::size_t> births;  // grid local minima, in birth order
  /// Level at which the component of each birth first meets the boundary,
  /// and the node that made it so (a boundary node or a merge witness).
  std::vector<double> touch_level;
  std::vector<std::size_t> touch_witness;
};

MergeStructure build_merge_structure(const Grid& grid, const GridData& data);

struct PrincipalWell {
  double lambda_grid = 0.0;
  double lambda = 0.0;
  std::vector<int> minima;
  std::vector<char> member;  // node mask of the open sublevel component
  std::vector<int> boundary_contacts;
  std::vector<int> interior_saddles;  // separating saddles at the top level
};

struct SaddleSet {
  std::vector<int> interior;  // separating interior saddles
  /// Grid level of the first merge event each saddle refines; wells cut at
  /// a saddle are flooded strictly below it so they stay apart on the grid.
  std::map<int, double> merge_level;
  struct Generalized {
    int crit = -1;
    char kase = 'a';  // 'a': grad f != 0, 'b': boundary saddle
    bool valid = true;
  };
  std::vector<Generalized> boundary;
  std::vector<PrincipalWell> principal;
  std::vector<std::string> violations;
};

/// Flags separating saddles in `crits` and derives the principal wells and
/// their boundary contact points.
SaddleSet separating_saddles(MergeStructure& merge, std::vector<CriticalPoint>& crits, const Grid& grid,
                             const GridData& data, const TopologyOptions& opt = {});

struct WellRecord {
  int minimum = -1;  // critical point id of the representative
  int tier = 1;
  int ell = 1;
  double level = 0.0;  // f(j(x))
  double energy = 0.0;
  std::vector<int> saddles;  // j(x)
  std::vector<int> argmin;   // minima attaining min f on the well
  std::vector<int> minima;   // all minima inside the well
  std::vector<char> member;  // node mask of C_j(x)
};

struct WellLabeling {
  std::vector<WellRecord> wells;
  double tol_level = 0.0;
  const WellRecord* find(int minimum) const;
};

WellLabeling build_jmap(const SaddleSet& ssp, const std::vector<CriticalPoint>& crits, const Grid& grid,
                        const GridData& data, const TopologyOptions& opt = {});

struct HypothesisItem {
  int crit = -1;
  std::string hypothesis;  // "H1" or "H2"
  bool pass = true;
  double angle = 0.0;
  double dn_f = 0.0;
  std::vector<double> tangential;
};

struct HypothesisReport {
  bool h1 = true;
  bool h2 = true;
  std::vector<HypothesisItem> items;
  std::vector<std::string> violations;
  bool pass() const { return h1 && h2 && violations.empty(); }
};

HypothesisReport check_hypotheses(const WellLabeling& labeling, const SaddleSet& ssp,
                                  const std::vector<CriticalPoint>& crits, const TopologyOptions& opt = {});

struct Topology {
  Grid grid;
  GridData data;
  std::vector<CriticalPoint> crits;
  MergeStructure merge;
  SaddleSet ssp;
  WellLabeling labeling;
  HypothesisReport hypotheses;
};

/// Runs every topology operation in order. Labeling is skipped (left empty)
/// when there is no interior minimum; that case throws.
Topology analyze_topology(const ScalarField& field, const Grid& grid, const TopologyOptions& opt = {});

nlohmann::json to_json(const CriticalPoint& c, int dim);
nlohmann::json to_json(const Topology& t);

}  // namespace wk
