#include <slatesim/core/geometric.hpp>
#include <slatesim/env/retention.hpp>
#include <slatesim/nn/adam.hpp>

#include <algorithm>
#include <numeric>

namespace slatesim::env {

    void RetentionConfig::validate() const
    {
        if (!(p_min > 0.0 && p_min < p_max && p_max < 1.0))
            throw ConfigError("retention: need 0 < p_min < p_max < 1");
        if (frozen_p_ret && !(*frozen_p_ret > 0.0 && *frozen_p_ret <= 1.0))
            throw ConfigError("retention: frozen p_ret must lie in (0, 1]");
        if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || !std::isfinite(global_bias))
            throw ConfigError("retention: coefficients must be finite");
    }

    double retention_probability(double personal_bias, double reward, const RetentionConfig& config)
    {
        const double raw = personal_bias + config.lambda1 * reward + config.lambda2 * config.global_bias;
        return std::clamp(raw, config.p_min, config.p_max);
    }

    RetentionModel::RetentionModel(RetentionHead<float> head, RetentionConfig config) : _head(std::move(head)), _config(config)
    {
        _config.validate();
    }

    double RetentionModel::personal_bias(const Eigen::VectorXf& state) const
    {
        if (_config.frozen_personal_bias)
            return *_config.frozen_personal_bias;
        return _head.personal_bias(state);
    }

    double RetentionModel::probability(const Eigen::VectorXf& state, double reward) const
    {
        if (_config.frozen_p_ret)
            return *_config.frozen_p_ret;
        return retention_probability(personal_bias(state), reward, _config);
    }

    namespace {
        double simulated_mean(std::span<const double> bias, std::span<const double> reward, int max_return_day, const RetentionConfig& c)
        {
            double total = 0.0;
            for (std::size_t i = 0; i < bias.size(); ++i)
                total += truncated_geometric_mean(retention_probability(bias[i], reward[i], c), max_return_day);
            return total / static_cast<double>(bias.size());
        }
    } // namespace

    double fit_global_bias(std::span<const double> personal_bias, std::span<const double> session_reward, double target_mean_return_day,
        int max_return_day, RetentionConfig& config)
    {
        if (personal_bias.empty() || personal_bias.size() != session_reward.size())
            throw ShapeError("fit_global_bias: need one reward per bias");
        if (config.lambda2 == 0.0)
            return simulated_mean(personal_bias, session_reward, max_return_day, config);

        // Wide enough that every p clamps to p_min at one end and to p_max at the other.
        double spread = 1.0;
        for (std::size_t i = 0; i < personal_bias.size(); ++i)
            spread = std::max(spread, std::abs(personal_bias[i]) + std::abs(config.lambda1 * session_reward[i]) + 1.0);
        const double reach = spread / std::abs(config.lambda2);
        double lo = -reach;
        double hi = reach;
        // The mean return day decreases as lambda2 * g grows.
        auto mean_at = [&](double g) {
            config.global_bias = g;
            return simulated_mean(personal_bias, session_reward, max_return_day, config);
        };
        if (config.lambda2 < 0.0)
            std::swap(lo, hi);
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mean_at(mid) > target_mean_return_day)
                lo = mid;
            else
                hi = mid;
        }
        return mean_at(0.5 * (lo + hi));
    }

    RetentionFitResult RetentionModel::fit(const RetentionExamples& examples, const RetentionFitConfig& fit_config)
    {
        const auto n = static_cast<std::size_t>(examples.states.rows());
        if (n == 0)
            throw DataError("retention fit: no sessions with a successor");
        if (examples.next_day.size() != n || examples.session_reward.size() != n || examples.return_day.size() != n)
            throw ShapeError("retention fit: example columns differ in length");
        if (examples.states.cols() != _head.state_dim)
            throw ShapeError("retention fit: state dimension mismatch");

        RetentionFitResult result;
        nn::OptimizerState<float> optimizer(_head.params, {fit_config.learning_rate, 0.9, 0.999, 1e-8, fit_config.l2});
        Rng rng(derive_seed(fit_config.seed, "retention.shuffle"));
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto batch = static_cast<std::size_t>(std::max(1, fit_config.batch_size));
        for (int epoch = 0; epoch < fit_config.epochs; ++epoch) {
            for (std::size_t i = n; i > 1; --i)
                std::swap(order[i - 1], order[uniform_index(rng, i)]);
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t start = 0; start < n; start += batch) {
                const std::size_t stop = std::min(n, start + batch);
                Eigen::MatrixXf states(static_cast<Eigen::Index>(stop - start), examples.states.cols());
                std::vector<std::uint8_t> labels;
                for (std::size_t t = start; t < stop; ++t) {
                    states.row(static_cast<Eigen::Index>(t - start)) = examples.states.row(static_cast<Eigen::Index>(order[t]));
                    labels.push_back(examples.next_day[order[t]]);
                }
                _head.params.zero_grad();
                sum += retention_head_loss<float>(_head, states, labels, true);
                ++count;
                if (!optimizer.step(_head.params))
                    throw Error("retention fit: non-finite gradient");
            }
            result.epoch_loss.push_back(sum / static_cast<double>(count));
        }

        std::vector<double> bias(n);
        for (std::size_t i = 0; i < n; ++i)
            bias[i] = _head.personal_bias(examples.states.row(static_cast<Eigen::Index>(i)).transpose());
        result.empirical_mean_return_day
            = std::accumulate(examples.return_day.begin(), examples.return_day.end(), 0.0) / static_cast<double>(n);
        result.simulated_mean_return_day
            = fit_global_bias(bias, examples.session_reward, result.empirical_mean_return_day, fit_config.max_return_day, _config);
        return result;
    }

} // namespace slatesim::env
