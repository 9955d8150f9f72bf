#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace shelab::quad {

namespace detail {

template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson rule with Richardson correction. The interval is first cut
/// into `initial_panels` pieces so narrow features are not stepped over.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol, int max_depth,
                        int initial_panels = 8) {
    if (a == b) return 0.0;
    const double h = (b - a) / initial_panels;
    const double panel_tol = abs_tol / initial_panels;
    double total = 0.0;
    double x0 = a;
    double f0 = f(x0);
    for (int i = 0; i < initial_panels; ++i) {
        const double x1 = (i + 1 == initial_panels) ? b : a + (i + 1) * h;
        const double m = 0.5 * (x0 + x1);
        const double f1 = f(x1);
        const double fm = f(m);
        const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total += detail::simpson_step(f, x0, f0, x1, f1, m, fm, whole, panel_tol, max_depth);
        x0 = x1;
        f0 = f1;
    }
    return total;
}

/// Integral over [0, upper] of an integrand with an integrable s^{-1/2}
/// singularity at 0, via s = r^2.
template <class F>
double integrate_sqrt_singular(F&& f, double upper, double abs_tol, int max_depth) {
    if (upper <= 0.0) return 0.0;
    const double root = std::sqrt(upper);
    // the r -> 0 limit is finite; sample just inside the interval instead
    const double r_floor = 1e-9 * root;
    auto g = [&](double r) {
        const double rr = r < r_floor ? r_floor : r;
        return 2.0 * rr * f(rr * rr);
    };
    return adaptive_simpson(g, 0.0, root, abs_tol, max_depth);
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    std::vector<double> x(n), w(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

/// Fixed composite Gauss-Legendre rule on [a, b] with panels growing
/// geometrically from width `w0` at both ends. For integrands peaked at the
/// endpoints with width ~ w0; the result is a smooth function of parameters,
/// which keeps an enclosing adaptive rule from refining on quadrature noise.
template <class F>
double graded_gauss(F&& f, double a, double b, double w0) {
    static const auto rule = gauss_legendre(20);
    const double mid = 0.5 * (a + b);
    std::vector<double> edges{a};
    for (double w = w0; a + w < mid; w *= 2.0) edges.push_back(a + w);
    edges.push_back(mid);
    std::vector<double> upper;
    for (double w = w0; b - w > mid; w *= 2.0) upper.push_back(b - w);
    edges.insert(edges.end(), upper.rbegin(), upper.rend());
    edges.push_back(b);
    double total = 0.0;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double c = 0.5 * (edges[p] + edges[p + 1]), h = 0.5 * (edges[p + 1] - edges[p]);
        if (h <= 0.0) continue;
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.first.size(); ++i) acc += rule.second[i] * f(c + h * rule.first[i]);
        total += h * acc;
    }
    return total;
}

}  // namespace shelab::quad
