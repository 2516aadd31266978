#include "mddra/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mddra/errors.hpp"

namespace mddra::stats {

namespace {

// Neumaier-compensated sum; keeps the descriptive moments stable at 1e5+
// samples without resorting to long double.
double compensated_sum(std::span<const double> xs) {
    double sum = 0.0, comp = 0.0;
    for (double x : xs) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

template <typename F>
double compensated_sum_of(std::size_t n, F value_at) {
    double sum = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = value_at(i);
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

void require_finite(std::span<const double> xs, const char* what) {
    for (double x : xs)
        if (!std::isfinite(x))
            throw ValidationError(std::string(what) + " contains a non-finite value");
}

// Continued fraction for the regularized incomplete beta (Lentz).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = std::numeric_limits<double>::epsilon();
    constexpr double kTiny = 1e-300;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 10.0 * kEps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("beta parameters must be > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("beta argument outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw ValidationError("degrees of freedom must be > 0");
    if (!std::isfinite(t)) throw ValidationError("t statistic must be finite");
    const double x = df / (df + t * t);
    return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

double student_t_cdf(double t, double df) {
    const double half_p = 0.5 * student_t_two_sided_p(t, df);
    return t >= 0.0 ? 1.0 - half_p : half_p;
}

double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("quantile p must be in (0, 1)");
    if (!(df > 0.0)) throw ValidationError("degrees of freedom must be > 0");
    if (p == 0.5) return 0.0;
    const bool upper = p > 0.5;
    const double target = upper ? p : 1.0 - p;
    double lo = 0.0, hi = 1.0;
    while (student_t_cdf(hi, df) < target) {
        hi *= 2.0;
        if (hi > 1e12) break;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < target)
            lo = mid;
        else
            hi = mid;
    }
    const double q = 0.5 * (lo + hi);
    return upper ? q : -q;
}

Descriptive describe(std::span<const double> sample) {
    if (sample.size() < 2)
        throw ValidationError("descriptive statistics need at least 2 values");
    require_finite(sample, "sample");
    const std::size_t n = sample.size();
    const double dn = static_cast<double>(n);

    Descriptive d;
    d.count = n;
    d.sum = compensated_sum(sample);
    d.mean = d.sum / dn;

    const double mean = d.mean;
    const double m2 = compensated_sum_of(n, [&](std::size_t i) {
                          const double dev = sample[i] - mean;
                          return dev * dev;
                      }) / dn;
    const double m3 = compensated_sum_of(n, [&](std::size_t i) {
                          const double dev = sample[i] - mean;
                          return dev * dev * dev;
                      }) / dn;
    const double m4 = compensated_sum_of(n, [&](std::size_t i) {
                          const double dev = sample[i] - mean;
                          const double sq = dev * dev;
                          return sq * sq;
                      }) / dn;

    d.sample_variance = m2 * dn / (dn - 1.0);
    d.standard_deviation = std::sqrt(d.sample_variance);
    d.standard_error = d.standard_deviation / std::sqrt(dn);
    if (m2 > 0.0) {
        const double s_pop = std::sqrt(m2);
        d.skewness = m3 / (s_pop * s_pop * s_pop);
        d.kurtosis = m4 / (m2 * m2);
        d.excess_kurtosis = *d.kurtosis - 3.0;
    }

    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    d.min = sorted.front();
    d.max = sorted.back();
    d.range = d.max - d.min;
    d.median = (n % 2 == 1) ? sorted[n / 2]
                            : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    d.confidence_95 = student_t_quantile(0.975, dn - 1.0) * d.standard_error;
    return d;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("correlation inputs differ in length");
    if (x.size() < 2) throw ValidationError("correlation needs at least 2 points");
    require_finite(x, "x");
    require_finite(y, "y");
    const std::size_t n = x.size();
    const double mx = compensated_sum(x) / static_cast<double>(n);
    const double my = compensated_sum(y) / static_cast<double>(n);
    const double sxy = compensated_sum_of(
        n, [&](std::size_t i) { return (x[i] - mx) * (y[i] - my); });
    const double sxx = compensated_sum_of(
        n, [&](std::size_t i) { return (x[i] - mx) * (x[i] - mx); });
    const double syy = compensated_sum_of(
        n, [&](std::size_t i) { return (y[i] - my) * (y[i] - my); });
    if (sxx <= 0.0 || syy <= 0.0)
        throw ValidationError("correlation undefined for constant input");
    return sxy / std::sqrt(sxx * syy);
}

RegressionFit ols_fit(const std::vector<std::vector<double>>& X,
                      std::span<const double> y,
                      bool fit_intercept,
                      const std::vector<std::string>* predictor_names) {
    const std::size_t n = X.size();
    if (n != y.size()) throw ValidationError("design rows and response length differ");
    if (n == 0) throw ValidationError("regression needs observations");
    const std::size_t p_in = X.front().size();
    for (const auto& row : X)
        if (row.size() != p_in)
            throw ValidationError("design rows differ in length");
    if (predictor_names && predictor_names->size() != p_in)
        throw ValidationError("predictor name count does not match columns");
    require_finite(y, "response");

    const std::size_t p = p_in + (fit_intercept ? 1 : 0);
    if (n <= p)
        throw ValidationError("regression needs more observations than coefficients");

    // Column-major working copy of the design matrix.
    std::vector<double> a(n * p);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t col = 0;
        if (fit_intercept) a[col++ * n + i] = 1.0;
        for (std::size_t j = 0; j < p_in; ++j) {
            if (!std::isfinite(X[i][j]))
                throw ValidationError("design matrix contains a non-finite value");
            a[(col + j) * n + i] = X[i][j];
        }
    }
    std::vector<double> qty(y.begin(), y.end());

    // Householder QR, reflecting y alongside.
    std::vector<double> rdiag(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        double norm = 0.0;
        for (std::size_t i = j; i < n; ++i) norm = std::hypot(norm, a[j * n + i]);
        if (norm == 0.0) {
            rdiag[j] = 0.0;
            continue;
        }
        if (a[j * n + j] < 0.0) norm = -norm;
        for (std::size_t i = j; i < n; ++i) a[j * n + i] /= norm;
        a[j * n + j] += 1.0;
        for (std::size_t col = j + 1; col < p; ++col) {
            double s = 0.0;
            for (std::size_t i = j; i < n; ++i) s += a[j * n + i] * a[col * n + i];
            s = -s / a[j * n + j];
            for (std::size_t i = j; i < n; ++i) a[col * n + i] += s * a[j * n + i];
        }
        double s = 0.0;
        for (std::size_t i = j; i < n; ++i) s += a[j * n + i] * qty[i];
        s = -s / a[j * n + j];
        for (std::size_t i = j; i < n; ++i) qty[i] += s * a[j * n + i];
        rdiag[j] = -norm;
    }

    double max_diag = 0.0;
    for (double r : rdiag) max_diag = std::max(max_diag, std::abs(r));
    for (double r : rdiag)
        if (std::abs(r) <= 1e-12 * std::max(1.0, max_diag))
            throw ValidationError("design matrix is singular or nearly collinear");

    // R sits in the upper triangle: R[j][col] = a[col*n + j] for col > j,
    // R[j][j] = rdiag[j]. Back-substitute for the coefficients.
    auto r_at = [&](std::size_t row, std::size_t col) {
        return row == col ? rdiag[row] : a[col * n + row];
    };
    std::vector<double> beta(p, 0.0);
    for (std::size_t jj = p; jj-- > 0;) {
        double s = qty[jj];
        for (std::size_t col = jj + 1; col < p; ++col) s -= r_at(jj, col) * beta[col];
        beta[jj] = s / rdiag[jj];
    }

    // Inverse of R by back substitution, for (X'X)^-1 = R^-1 R^-T.
    std::vector<double> rinv(p * p, 0.0);
    for (std::size_t col = 0; col < p; ++col) {
        rinv[col * p + col] = 1.0 / rdiag[col];
        for (std::size_t row = col; row-- > 0;) {
            double s = 0.0;
            for (std::size_t mid = row + 1; mid <= col; ++mid)
                s += r_at(row, mid) * rinv[col * p + mid];
            rinv[col * p + row] = -s / rdiag[row];
        }
    }

    RegressionFit fit;
    fit.observations = n;
    fit.df_residual = n - p;
    fit.fitted.resize(n);
    fit.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double f = fit_intercept ? beta[0] : 0.0;
        const std::size_t base = fit_intercept ? 1 : 0;
        for (std::size_t j = 0; j < p_in; ++j) f += beta[base + j] * X[i][j];
        fit.fitted[i] = f;
        fit.residuals[i] = y[i] - f;
    }

    const double rss = compensated_sum_of(
        n, [&](std::size_t i) { return fit.residuals[i] * fit.residuals[i]; });
    const double ybar = compensated_sum(y) / static_cast<double>(n);
    const double tss =
        fit_intercept
            ? compensated_sum_of(n, [&](std::size_t i) { return (y[i] - ybar) * (y[i] - ybar); })
            : compensated_sum_of(n, [&](std::size_t i) { return y[i] * y[i]; });
    if (tss <= 0.0) throw ValidationError("response has zero variance");

    const double sigma2 = rss / static_cast<double>(fit.df_residual);
    fit.residual_standard_error = std::sqrt(sigma2);
    fit.r_squared = 1.0 - rss / tss;

    fit.coefficients.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        double cov_jj = 0.0;
        for (std::size_t col = j; col < p; ++col)
            cov_jj += rinv[col * p + j] * rinv[col * p + j];
        cov_jj *= sigma2;
        CoefficientEstimate& c = fit.coefficients[j];
        if (fit_intercept)
            c.name = j == 0 ? "intercept"
                            : (predictor_names ? (*predictor_names)[j - 1]
                                               : "x" + std::to_string(j));
        else
            c.name = predictor_names ? (*predictor_names)[j]
                                     : "x" + std::to_string(j + 1);
        c.estimate = beta[j];
        c.std_error = std::sqrt(cov_jj);
        c.t_value = c.std_error > 0.0 ? c.estimate / c.std_error : 0.0;
        c.p_value = c.std_error > 0.0
                        ? student_t_two_sided_p(c.t_value,
                                                static_cast<double>(fit.df_residual))
                        : 0.0;
    }
    return fit;
}

double l2_loss(std::span<const double> y, std::span<const double> fitted) {
    if (y.size() != fitted.size()) throw ValidationError("loss inputs differ in length");
    return compensated_sum_of(y.size(), [&](std::size_t i) {
        const double d = y[i] - fitted[i];
        return d * d;
    });
}

ResidualCorrelation residual_cross_correlation(
    std::span<const double> residuals,
    const std::vector<std::vector<double>>& inputs,
    double threshold) {
    if (residuals.size() < 2)
        throw ValidationError("residual correlation needs at least 2 points");
    const std::size_t n = residuals.size();
    const double mr = compensated_sum(residuals) / static_cast<double>(n);
    const double srr = compensated_sum_of(
        n, [&](std::size_t i) { return (residuals[i] - mr) * (residuals[i] - mr); });
    if (srr <= 0.0) throw ValidationError("residuals are constant");

    const std::size_t cols = inputs.empty() ? 0 : inputs.front().size();
    for (const auto& row : inputs)
        if (row.size() != cols) throw ValidationError("input rows differ in length");
    if (inputs.size() != n)
        throw ValidationError("input rows and residual length differ");

    ResidualCorrelation out;
    out.threshold = threshold;
    for (std::size_t j = 0; j < cols; ++j) {
        const double mx = compensated_sum_of(n, [&](std::size_t i) { return inputs[i][j]; }) /
                          static_cast<double>(n);
        const double sxx = compensated_sum_of(n, [&](std::size_t i) {
            return (inputs[i][j] - mx) * (inputs[i][j] - mx);
        });
        double r = 0.0;  // a constant column carries no correlation
        if (sxx > 0.0) {
            const double sxr = compensated_sum_of(n, [&](std::size_t i) {
                return (inputs[i][j] - mx) * (residuals[i] - mr);
            });
            r = sxr / std::sqrt(sxx * srr);
        }
        out.correlations.push_back(r);
        const bool ok = std::abs(r) <= threshold;
        out.pass.push_back(ok);
        out.all_pass = out.all_pass && ok;
    }
    return out;
}

}  // namespace mddra::stats
