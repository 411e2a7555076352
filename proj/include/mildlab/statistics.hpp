#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mildlab {

// Pairwise summation; fixed association order for a given length.
double pairwise_sum(std::span<const double> values);

double sample_mean(std::span<const double> values);
double sample_variance(std::span<const double> values);

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

MeanEstimate estimate_mean(std::span<const double> values);

// Sample variance with its standard error sqrt((m4 - s^4)/N).
MeanEstimate estimate_variance(std::span<const double> values);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t used = 0;
};

// Ordinary least squares of y on x; needs at least two distinct x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace mildlab
