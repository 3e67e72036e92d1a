#pragma once

// Reference values computed by hand from the fixture potentials. Kept in one
// place so a test cannot quietly drift toward whatever the code returns.

#include <cmath>

namespace oracle {

constexpr double pi = 3.14159265358979323846;

// f = (x^2-1)^2
inline double dw(double x) { return (x * x - 1) * (x * x - 1); }
inline double dw_d1(double x) { return 4 * x * (x * x - 1); }
inline double dw_d2(double x) { return 12 * x * x - 4; }

// double well on (-1.7, 1.7)
constexpr double dw_edge = 1.7;
inline const double dw_E1 = dw(1.7);           // 3.5721
inline const double dw_dnf = dw_d1(1.7);       // 12.852
constexpr double dw_E2 = 1.0;
inline const double dw_c_interior = 4 * std::sqrt(2.0) / pi;  // 1.80063
// tier 1: two boundary points, argmin {-1, +1} each with det 8
inline const double dw_c_boundary = (2 * 12.852 / std::sqrt(pi)) / (2 / std::sqrt(8.0));

// half well on (-1.7, 0): boundary saddle at 0
inline const double hw_c = 8 * std::sqrt(2.0) / pi;  // 3.60127

// 2-D half domain (x1^2-1)^2 + x2^2 with saddle (0,0) on the face x1 = 0
inline const double half_domain_prefactor = 32 / (pi * std::sqrt(8.0));

// single well x^2 on (-1,1): two boundary points, d_n f = 2, B = 1/sqrt 2
inline const double sw_K1 = 2 * (2 * 2 / std::sqrt(pi)) * std::sqrt(2.0);

// x^6/6 - 5x^4/4 + 2x^2 + tilt*x ; f' = x(x^2-1)(x^2-4) + tilt
inline double sextic(double x, double tilt) {
  return std::pow(x, 6) / 6 - 1.25 * std::pow(x, 4) + 2 * x * x + tilt * x;
}
inline double sextic_d1(double x, double tilt) { return x * (x * x - 1) * (x * x - 4) + tilt; }

}  // namespace oracle
