#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace lqmfg
{

/// Neumaier compensated sum. Summation order is the caller's, so feeding
/// values in a fixed index order gives bit-reproducible totals.
class CompensatedSum
{
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }

    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_{0.0};
    double comp_{0.0};
};

struct MeanEstimate
{
    double mean{0.0};
    double std_error{0.0};
    std::size_t count{0};
};

/// Sample mean and its standard error (sample std / sqrt(n)).
[[nodiscard]] inline MeanEstimate mean_estimate(std::span<const double> xs)
{
    MeanEstimate e;
    e.count = xs.size();
    if (xs.empty())
        return e;
    CompensatedSum s;
    for (double x : xs)
        s.add(x);
    e.mean = s.value() / static_cast<double>(xs.size());
    if (xs.size() > 1)
    {
        CompensatedSum v;
        for (double x : xs)
            v.add((x - e.mean) * (x - e.mean));
        e.std_error = std::sqrt(v.value() / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    }
    return e;
}

struct LineFit
{
    double slope{std::numeric_limits<double>::quiet_NaN()};
    double intercept{std::numeric_limits<double>::quiet_NaN()};
    double slope_stderr{std::numeric_limits<double>::quiet_NaN()};
};

/// Ordinary least squares y = intercept + slope x.
[[nodiscard]] inline LineFit fit_line(std::span<const double> x, std::span<const double> y)
{
    LineFit f;
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n)
        return f;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0))
        return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2)
    {
        double ssr = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            const double r = y[i] - f.intercept - f.slope * x[i];
            ssr += r * r;
        }
        f.slope_stderr = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
    }
    return f;
}

}  // namespace lqmfg
