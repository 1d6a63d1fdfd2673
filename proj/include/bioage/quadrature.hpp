#ifndef BIOAGE_QUADRATURE_HPP
#define BIOAGE_QUADRATURE_HPP

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <string>

#include "bioage/errors.hpp"

namespace bioage {

// Adaptive Gauss-Kronrod on [a, b]; throws QuadratureError when the error
// estimate misses the requested relative tolerance.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double rel_tol) {
    double err = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, /*max_depth=*/20, rel_tol, &err);
    const double scale = std::max(std::fabs(value), 1e-300);
    if (err > rel_tol * scale * 10.0) {
        throw QuadratureError("quadrature error estimate " + std::to_string(err) +
                              " exceeds tolerance for integral value " + std::to_string(value));
    }
    return value;
}

}  // namespace bioage

#endif
