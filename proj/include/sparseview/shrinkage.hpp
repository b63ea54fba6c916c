#pragma once

#include <cmath>

#include "sparseview/patches.hpp"

namespace sv {

/// S(a, b) = sgn(a) max(|a| - b, 0)
inline double soft(double a, double b)
{
    const double m = std::abs(a) - b;
    return m > 0 ? std::copysign(m, a) : 0.0;
}

/// H(a, b) = a if |a| >= b, else 0. The boundary keeps the value.
inline double hard(double a, double b) { return std::abs(a) >= b ? a : 0.0; }

void soft_inplace(Codes& c, double threshold);
void hard_inplace(Codes& c, double threshold);

/// Exact minimizer of lambda ||a - z||_1 + gamma ||z||_0: hard threshold at gamma / lambda.
Codes sparse_code(const Codes& transformed, double lambda, double gamma);

/// Fraction of nonzero entries.
double nonzero_fraction(const Codes& c);

} // namespace sv
