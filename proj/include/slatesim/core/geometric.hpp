#pragma once

#include <slatesim/core/rng.hpp>

#include <cmath>
#include <vector>

namespace slatesim {

    /// Geometric draw on {1, 2, ...} by inversion, clamped to max_day. Consumes exactly one
    /// engine draw, so coupled streams stay aligned whatever the value of p.
    inline int sample_truncated_geometric(double p, int max_day, Rng& rng)
    {
        const double u = 1.0 - uniform01(rng); // (0, 1]
        if (p >= 1.0)
            return 1;
        const double raw = std::floor(std::log(u) / std::log1p(-p));
        if (!(raw < static_cast<double>(max_day - 1)))
            return max_day;
        return 1 + static_cast<int>(raw);
    }

    /// pmf of the clamped geometric on {1..max_day}; the last entry holds the tail mass (1-p)^(max_day-1).
    inline std::vector<double> truncated_geometric_pmf(double p, int max_day)
    {
        std::vector<double> pmf(static_cast<std::size_t>(max_day));
        for (int d = 1; d < max_day; ++d)
            pmf[static_cast<std::size_t>(d - 1)] = std::pow(1.0 - p, d - 1) * p;
        pmf.back() = std::pow(1.0 - p, max_day - 1);
        return pmf;
    }

    inline double truncated_geometric_mean(double p, int max_day)
    {
        const auto pmf = truncated_geometric_pmf(p, max_day);
        double mean = 0.0;
        for (std::size_t i = 0; i < pmf.size(); ++i)
            mean += static_cast<double>(i + 1) * pmf[i];
        return mean;
    }

} // namespace slatesim
