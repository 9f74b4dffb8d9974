#pragma once

#include <slatesim/nn/param_store.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <utility>

namespace slatesim::nn {

    struct GradientCheckResult {
        double max_relative_error = 0.0;
        Eigen::Index coordinates = 0;
        std::string worst_parameter;
    };

    /// Loss of the model at the current parameter values. When `with_grad` is set the function
    /// must also accumulate analytic gradients into the (already zeroed) store.
    using LossFunction = std::function<double(ParamStore<double>&, bool with_grad)>;

    /// Compares analytic gradients with central differences. Relative error per coordinate is
    /// |analytic - numeric| / max(|analytic|, |numeric|, 1e-5). Half of the probes come from
    /// coordinates with a nonzero analytic gradient, half uniformly from all coordinates; every
    /// coordinate is probed when the model has no more than `sample` of them.
    /// Throws Error when two evaluations at identical parameters disagree.
    inline GradientCheckResult gradient_check(ParamStore<double>& params, const LossFunction& loss, Rng& rng, Eigen::Index sample = 200,
        double step = 1e-5)
    {
        params.zero_grad();
        const double base = loss(params, true);
        const double again = loss(params, false);
        if (base != again)
            throw Error("gradient_check: model function is not deterministic");

        std::vector<Matrix<double>> analytic;
        for (const auto& e : params.entries())
            analytic.push_back(e.grad);

        std::vector<std::pair<std::size_t, Eigen::Index>> all;
        std::vector<std::pair<std::size_t, Eigen::Index>> nonzero;
        for (std::size_t t = 0; t < analytic.size(); ++t)
            for (Eigen::Index i = 0; i < analytic[t].size(); ++i) {
                all.emplace_back(t, i);
                if (analytic[t](i) != 0.0)
                    nonzero.emplace_back(t, i);
            }

        std::set<std::pair<std::size_t, Eigen::Index>> probes;
        if (static_cast<Eigen::Index>(all.size()) <= sample) {
            probes.insert(all.begin(), all.end());
        }
        else {
            const auto half = static_cast<std::size_t>(sample / 2);
            for (std::size_t k = 0; k < half && !nonzero.empty(); ++k)
                probes.insert(nonzero[uniform_index(rng, nonzero.size())]);
            while (static_cast<Eigen::Index>(probes.size()) < sample)
                probes.insert(all[uniform_index(rng, all.size())]);
        }

        GradientCheckResult result;
        for (const auto& [t, i] : probes) {
            double& theta = params.entries()[t].value(i);
            const double saved = theta;
            theta = saved + step;
            const double plus = loss(params, false);
            theta = saved - step;
            const double minus = loss(params, false);
            theta = saved;

            const double numeric = (plus - minus) / (2.0 * step);
            const double a = analytic[t](i);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-5});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > result.max_relative_error) {
                result.max_relative_error = rel;
                result.worst_parameter = params.entries()[t].name + "[" + std::to_string(i) + "]";
            }
            ++result.coordinates;
        }
        params.zero_grad();
        return result;
    }

} // namespace slatesim::nn
