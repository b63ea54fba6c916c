#include "sparseview/shrinkage.hpp"

#include "sparseview/errors.hpp"

namespace sv {

void soft_inplace(Codes& c, double threshold)
{
    double* p = c.data();
    for (Eigen::Index i = 0; i < c.size(); ++i) p[i] = soft(p[i], threshold);
}

void hard_inplace(Codes& c, double threshold)
{
    double* p = c.data();
    for (Eigen::Index i = 0; i < c.size(); ++i) p[i] = hard(p[i], threshold);
}

Codes sparse_code(const Codes& transformed, double lambda, double gamma)
{
    if (!(lambda > 0)) throw ConfigError("sparse_code: lambda must be > 0");
    if (!(gamma >= 0)) throw ConfigError("sparse_code: gamma must be >= 0");
    Codes z = transformed;
    hard_inplace(z, gamma / lambda);
    return z;
}

double nonzero_fraction(const Codes& c)
{
    if (c.size() == 0) return 0.0;
    Eigen::Index nnz = 0;
    const double* p = c.data();
    for (Eigen::Index i = 0; i < c.size(); ++i) nnz += p[i] != 0.0;
    return double(nnz) / double(c.size());
}

} // namespace sv
