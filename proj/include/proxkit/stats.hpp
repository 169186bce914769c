#pragma once

#include <vector>

namespace proxkit {

// Quantile convention used throughout: Hyndman-Fan type 8 (median-unbiased
// order statistic, h = (n + 1/3) q + 1/3 with linear interpolation).
double quantile_hf8(std::vector<double> v, double q);

double binomial_se(double p_hat, int n);

}  // namespace proxkit
