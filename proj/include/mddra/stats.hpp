#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mddra::stats {

struct Descriptive {
    double mean = 0.0;
    double standard_error = 0.0;
    double median = 0.0;
    double standard_deviation = 0.0;  // sample, divisor n-1
    double sample_variance = 0.0;
    // Moment ratios use the population divisor n inside; plain kurtosis is 3
    // for a normal sample. Undefined (nullopt) for constant samples.
    std::optional<double> kurtosis;
    std::optional<double> excess_kurtosis;
    std::optional<double> skewness;
    double range = 0.0;
    double min = 0.0;
    double max = 0.0;
    double sum = 0.0;
    std::size_t count = 0;
    double confidence_95 = 0.0;  // half-width of the 95% t-interval for the mean
};

// count >= 2 and finite values required.
Descriptive describe(std::span<const double> sample);

// Sample Pearson correlation; throws on length mismatch, n < 2, or a
// constant input.
double pearson(std::span<const double> x, std::span<const double> y);

struct CoefficientEstimate {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double t_value = 0.0;
    double p_value = 0.0;
};

struct RegressionFit {
    std::vector<CoefficientEstimate> coefficients;  // intercept first when fitted
    std::vector<double> residuals;
    std::vector<double> fitted;
    double residual_standard_error = 0.0;
    double r_squared = 0.0;
    std::size_t observations = 0;
    std::size_t df_residual = 0;
};

// Least squares via Householder QR. X is n rows of p predictor values.
// Errors: mismatched lengths, n <= p (no residual df), singular design,
// zero-variance response.
RegressionFit ols_fit(const std::vector<std::vector<double>>& X,
                      std::span<const double> y,
                      bool fit_intercept = true,
                      const std::vector<std::string>* predictor_names = nullptr);

// Sum of squared differences.
double l2_loss(std::span<const double> y, std::span<const double> fitted);

struct ResidualCorrelation {
    std::vector<double> correlations;  // one per input column
    std::vector<bool> pass;            // |r| <= threshold
    double threshold = 0.1;
    bool all_pass = true;
};

// Pearson correlation of residuals against each input column. A constant
// column gets correlation 0 (its covariance with anything is 0); constant
// residuals are an error.
ResidualCorrelation residual_cross_correlation(
    std::span<const double> residuals,
    const std::vector<std::vector<double>>& inputs,
    double threshold = 0.1);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// Student-t distribution with df degrees of freedom.
double student_t_cdf(double t, double df);
double student_t_two_sided_p(double t, double df);
double student_t_quantile(double p, double df);  // p in (0, 1)

}  // namespace mddra::stats
