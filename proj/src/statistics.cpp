#include "mildlab/statistics.hpp"

#include <cmath>
#include <algorithm>
#include <stdexcept>
#include <vector>

namespace mildlab {

double pairwise_sum(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double sample_mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    const double m = sample_mean(values);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - m) * (values[i] - m);
    return pairwise_sum(sq) / static_cast<double>(n - 1);
}

MeanEstimate estimate_mean(std::span<const double> values) {
    MeanEstimate e;
    e.mean = sample_mean(values);
    if (values.size() >= 2) e.std_error = std::sqrt(sample_variance(values) / static_cast<double>(values.size()));
    return e;
}

MeanEstimate estimate_variance(std::span<const double> values) {
    const std::size_t n = values.size();
    MeanEstimate e;
    if (n < 2) return e;
    const double m = sample_mean(values);
    std::vector<double> c2(n), c4(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - m;
        c2[i] = d * d;
        c4[i] = c2[i] * c2[i];
    }
    const double m2 = pairwise_sum(c2) / static_cast<double>(n);
    const double m4 = pairwise_sum(c4) / static_cast<double>(n);
    e.mean = m2 * static_cast<double>(n) / static_cast<double>(n - 1);
    e.std_error = std::sqrt(std::max(0.0, m4 - m2 * m2) / static_cast<double>(n));
    return e;
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("least_squares: size mismatch");
    LinearFit fit;
    fit.used = x.size();
    if (x.size() < 2) return fit;
    const double mx = sample_mean(x);
    const double my = sample_mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

}  // namespace mildlab
