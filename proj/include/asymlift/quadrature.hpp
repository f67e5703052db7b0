#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "asymlift/errors.hpp"

namespace asymlift {

// Gauss-Legendre rule on [-1, 1]. Nodes from Newton iteration on P_n with the
// usual cosine initial guess; symmetric pairs are mirrored.
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendreRule(int n) {
        if (n < 1) raise(errc::bad_input, "quadrature order must be >= 1");
        nodes.resize(n);
        weights.resize(n);
        const int half = (n + 1) / 2;
        for (int i = 0; i < half; ++i) {
            double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                // Three-term recurrence for P_n(x) and P_{n-1}(x).
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
    }

    static const GaussLegendreRule& of_order(int n) {
        static std::map<int, GaussLegendreRule> cache;
        static std::mutex mutex;
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(n);
        if (it == cache.end()) it = cache.emplace(n, GaussLegendreRule(n)).first;
        return it->second;
    }
};

// Composite fixed-order Gauss-Legendre over [a, b]. The integrand must be
// smooth on the interval; callers split at interior kinks themselves.
template <typename F>
double integrate(F&& f, double a, double b, int panels, const GaussLegendreRule& rule) {
    if (b <= a) return 0.0;
    if (panels < 1) raise(errc::bad_input, "panel count must be >= 1");
    const double h = (b - a) / panels;
    const int order = static_cast<int>(rule.nodes.size());
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        const double scale = 0.5 * h;
        double acc = 0.0;
        for (int i = 0; i < order; ++i) {
            acc += rule.weights[i] * f(mid + scale * rule.nodes[i]);
        }
        total += scale * acc;
    }
    return total;
}

template <typename F>
double integrate(F&& f, double a, double b, int panels, int order = 8) {
    return integrate(static_cast<F&&>(f), a, b, panels, GaussLegendreRule::of_order(order));
}

}  // namespace asymlift
