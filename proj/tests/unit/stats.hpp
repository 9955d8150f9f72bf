#pragma once
// Small statistics helpers shared by the unit tests.
#include <algorithm>
#include <cmath>
#include <vector>

namespace teststats {

struct Moments {
    double mean = 0, var = 0, se_mean = 0, se_var = 0;
};

inline Moments moments(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= n;
    double m4 = 0;
    for (double x : v) {
        const double d = x - m.mean;
        m.var += d * d;
        m4 += d * d * d * d;
    }
    m4 /= n;
    m.var /= (n - 1);
    m.se_mean = std::sqrt(m.var / n);
    m.se_var = std::sqrt(std::max(0.0, m4 - m.var * m.var) / n);
    return m;
}

inline double covariance(const std::vector<double>& a, const std::vector<double>& b, double* se = nullptr) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double c = 0, c2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double p = (a[i] - ma) * (b[i] - mb);
        c += p;
        c2 += p * p;
    }
    c /= n;
    if (se) *se = std::sqrt(std::max(0.0, c2 / n - c * c) / n);
    return c;
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    return covariance(a, b) / std::sqrt(covariance(a, a) * covariance(b, b));
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

/// 1% critical value of the two-sample KS statistic (asymptotic).
inline double ks_critical_1pct(std::size_t n, std::size_t m) {
    return 1.628 * std::sqrt(double(n + m) / (double(n) * double(m)));
}

}  // namespace teststats
