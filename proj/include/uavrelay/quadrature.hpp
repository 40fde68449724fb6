#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace uavrelay {

/// Adaptive Simpson integration with Richardson extrapolation.
///
/// Recursion stops once the local error estimate |S_halves - S_whole| / 15
/// drops below the tolerance allotted to the subinterval. Throws
/// std::runtime_error with the offending interval if max_depth splits are
/// not enough.
template <class Func>
double integrate_adaptive(const Func& f, double a, double b, double abs_tol,
                          int max_depth = 60) {
    struct Rec {
        const Func& f;
        int max_depth;
        double simpson(double x0, double x2, double f0, double f1, double f2) const {
            return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2);
        }
        double run(double x0, double x2, double f0, double f1, double f2,
                   double whole, double tol, int depth) const {
            const double xm = 0.5 * (x0 + x2);
            const double xl = 0.5 * (x0 + xm);
            const double xr = 0.5 * (xm + x2);
            const double fl = f(xl);
            const double fr = f(xr);
            const double left = simpson(x0, xm, f0, fl, f1);
            const double right = simpson(xm, x2, f1, fr, f2);
            const double err = left + right - whole;
            if (std::fabs(err) <= 15.0 * tol) {
                return left + right + err / 15.0;
            }
            if (depth >= max_depth) {
                throw std::runtime_error(
                    "integrate_adaptive: no convergence on [" + std::to_string(x0) +
                    ", " + std::to_string(x2) + "] after depth " +
                    std::to_string(depth) + " (err estimate " +
                    std::to_string(std::fabs(err) / 15.0) + ", tol " +
                    std::to_string(tol) + ")");
            }
            return run(x0, xm, f0, fl, f1, left, 0.5 * tol, depth + 1) +
                   run(xm, x2, f1, fr, f2, right, 0.5 * tol, depth + 1);
        }
    };
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fm = f(0.5 * (a + b));
    const double fb = f(b);
    Rec rec{f, max_depth};
    const double whole = rec.simpson(a, b, fa, fm, fb);
    return rec.run(a, b, fa, fm, fb, whole, abs_tol, 0);
}

}  // namespace uavrelay
