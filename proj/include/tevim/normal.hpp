#pragma once

#include <cmath>

namespace tevim {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Upper tail 1 - Phi(z), accurate for large z.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Standard normal quantile (Acklam's rational approximation followed by one
/// Halley refinement step; relative error below 1e-14 over (0,1)).
double normal_quantile(double p);

/// Two-sided critical value for a confidence level; 0.95 maps to 1.959964.
double critical_value(double level);

}  // namespace tevim
