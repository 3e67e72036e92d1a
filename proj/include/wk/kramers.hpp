#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "wk/topology.hpp"

namespace wk {

enum class SaddleKind { boundary_noncritical, boundary_critical, interior };

const char* to_string(SaddleKind k);

struct SaddleContribution {
  int saddle = -1;
  SaddleKind kind = SaddleKind::interior;
  double c = 0.0;
  double h_power = 1.0;  // 1/2 for boundary_noncritical, 1 otherwise
};

struct KramersPrediction {
  int minimum = -1;
  int tier = 1;
  double energy = 0.0;
  double K1 = 0.0;  // saddles with grad f != 0
  double K2 = 0.0;  // saddles with grad f == 0
  double p = 0.5;
  double gamma = 1.0;
  double B = 0.0;
  double A1 = 0.0;
  double A2 = 0.0;
  /// Remainder is O(sqrt h) when a boundary critical point sits in j(x).
  bool sqrt_h_remainder = false;
  std::vector<SaddleContribution> contributions;

  /// (sqrt(h) K1 + h K2) exp(-2E/h)
  double lambda(double h) const;
  /// ((A1 + sqrt(h) A2)/B) sqrt(h/pi) exp(-2E/h); equal to lambda(h).
  double lambda_from_a(double h) const;
};

struct CrossTerm {
  int x = -1;
  int y = -1;
  double K = 0.0;
};

struct PredictionSet {
  std::vector<KramersPrediction> predictions;  // decreasing E, then decreasing p
  std::vector<CrossTerm> cross;
  /// Largest prefix on which the separation conditions for sharp asymptotics
  /// hold (0 if none), with the reason each longer prefix fails.
  int m_star = 0;
  std::vector<std::string> prefix_failures;
};

SaddleContribution saddle_constant(const WellRecord& well, const CriticalPoint& z,
                                   const std::vector<CriticalPoint>& crits);

PredictionSet build_prediction(const WellLabeling& labeling, const std::vector<CriticalPoint>& crits);

/// Closed form for the principal eigenvalue when the whole sublevel set below
/// min over the boundary is one well leaving only through boundary saddles.
struct PrincipalFormula {
  bool applicable = false;
  std::string reason;
  double energy = 0.0;
  double prefactor = 0.0;  // lambda_1 ~ prefactor * h * exp(-2E/h)
  double lambda(double h) const;
};

PrincipalFormula principal_eigenvalue_formula(const Topology& topo, const TopologyOptions& opt = {});

nlohmann::json to_json(const PredictionSet& p);
nlohmann::json to_json(const PrincipalFormula& p);

}  // namespace wk
