#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <utility>
#include <vector>

#include "lqmfg/error.hpp"

namespace lqmfg
{

/// Uniform grid t_j = j T / M on [0, T].
class TimeGrid
{
public:
    TimeGrid() = default;

    TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps)
    {
        if (!(horizon > 0.0) || !std::isfinite(horizon))
            throw StructuralError("time grid horizon must be positive and finite");
        if (steps < 1)
            throw StructuralError("time grid needs at least one step");
    }

    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
    [[nodiscard]] std::size_t nodes() const noexcept { return steps_ + 1; }
    [[nodiscard]] double step() const noexcept { return horizon_ / static_cast<double>(steps_); }

    [[nodiscard]] double time(std::size_t j) const noexcept
    {
        if (j >= steps_)
            return horizon_;
        return horizon_ * static_cast<double>(j) / static_cast<double>(steps_);
    }

    bool operator==(const TimeGrid&) const = default;

private:
    double horizon_{1.0};
    std::size_t steps_{1};
};

/// Matrix-valued coefficient sampled on the grid nodes. The value on
/// [t_j, t_{j+1}) is values[j]; values[M] is only used at the terminal node.
class CoefficientSchedule
{
public:
    CoefficientSchedule() = default;

    explicit CoefficientSchedule(std::vector<Eigen::MatrixXd> values) : values_(std::move(values))
    {
        if (values_.empty())
            throw StructuralError("coefficient schedule needs at least one value");
        for (std::size_t j = 1; j < values_.size(); ++j)
        {
            if (values_[j].rows() != values_[0].rows() || values_[j].cols() != values_[0].cols())
            {
                std::ostringstream os;
                os << "coefficient schedule changes shape at node " << j;
                throw StructuralError(os.str());
            }
        }
    }

    static CoefficientSchedule constant(const Eigen::MatrixXd& value, std::size_t steps)
    {
        return CoefficientSchedule(std::vector<Eigen::MatrixXd>(steps + 1, value));
    }

    static CoefficientSchedule zero(Eigen::Index rows, Eigen::Index cols, std::size_t steps)
    {
        return constant(Eigen::MatrixXd::Zero(rows, cols), steps);
    }

    [[nodiscard]] Eigen::Index rows() const noexcept { return values_.empty() ? 0 : values_[0].rows(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return values_.empty() ? 0 : values_[0].cols(); }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] const Eigen::MatrixXd& operator[](std::size_t j) const { return values_[j]; }
    [[nodiscard]] const std::vector<Eigen::MatrixXd>& values() const noexcept { return values_; }

    [[nodiscard]] bool is_zero() const
    {
        for (const auto& v : values_)
            if (!v.isZero(0.0))
                return false;
        return true;
    }

private:
    std::vector<Eigen::MatrixXd> values_;
};

}  // namespace lqmfg
