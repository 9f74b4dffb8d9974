#pragma once

#include <slatesim/nn/layers.hpp>

#include <optional>
#include <span>

namespace slatesim::env {

    struct RetentionConfig {
        double lambda1 = 0.5;
        double lambda2 = 0.75;
        double global_bias = 0.0;
        double p_min = 0.01;
        double p_max = 0.99;
        /// b_r from the session-mean normalized reward; false uses the reward of the leave step.
        bool session_mean_reward = true;
        /// Bypasses the model entirely.
        std::optional<double> frozen_p_ret;
        /// Replaces the head output b_u.
        std::optional<double> frozen_personal_bias;

        void validate() const;
    };

    /// clamp(b_u + lambda1 * reward + lambda2 * global_bias, p_min, p_max).
    double retention_probability(double personal_bias, double reward, const RetentionConfig& config);

    /// Personal-bias head: state -> 2 * state_dim (ReLU) -> 1 logit; b_u = sigmoid(logit).
    template <typename Scalar>
    struct RetentionHead {
        nn::ParamStore<Scalar> params;
        nn::Mlp mlp;
        Eigen::Index state_dim = 0;

        RetentionHead() = default;
        RetentionHead(Eigen::Index dim, Rng& rng) : state_dim(dim) { mlp = nn::make_mlp(params, "retention", dim, 2 * dim, 1, rng); }

        template <typename Other>
        RetentionHead<Other> cast() const
        {
            RetentionHead<Other> out;
            out.params = params.template cast<Other>();
            out.mlp = mlp;
            out.state_dim = state_dim;
            return out;
        }

        Scalar personal_bias(const nn::Vector<Scalar>& state) const
        {
            if (state.size() != state_dim)
                throw ShapeError("retention head: state dimension mismatch");
            const nn::Matrix<Scalar> s = state.transpose();
            return nn::sigmoid(nn::forward(params, mlp, s)(0, 0));
        }
    };

    /// Mean BCE of b_u against next-day-return labels over rows of `states`.
    template <typename Scalar>
    double retention_head_loss(RetentionHead<Scalar>& head, const nn::Matrix<Scalar>& states, std::span<const std::uint8_t> labels,
        bool with_grad)
    {
        if (states.rows() == 0 || static_cast<std::size_t>(states.rows()) != labels.size())
            throw ShapeError("retention_head_loss: states/labels mismatch");
        nn::MlpCache<Scalar> cache;
        const nn::Matrix<Scalar> logits = nn::forward(head.params, head.mlp, states, {}, with_grad ? &cache : nullptr);
        const auto n = static_cast<Scalar>(states.rows());
        nn::Matrix<Scalar> d_logits(logits.rows(), 1);
        double total = 0.0;
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const Scalar z = logits(i, 0);
            const Scalar y = labels[static_cast<std::size_t>(i)] ? Scalar(1) : Scalar(0);
            total += static_cast<double>((z > Scalar(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y * z);
            d_logits(i, 0) = (nn::sigmoid(z) - y) / n;
        }
        if (with_grad)
            nn::backward(head.params, head.mlp, cache, d_logits);
        return total / static_cast<double>(states.rows());
    }

    struct RetentionFitConfig {
        int epochs = 20;
        int batch_size = 64;
        double learning_rate = 5e-4;
        double l2 = 1e-5;
        std::uint64_t seed = 1;
        int max_return_day = 10;
    };

    /// Training material for the retention model: one row per logged session that has a successor.
    struct RetentionExamples {
        Eigen::MatrixXf states; // rows: simulator state at the end of the session
        std::vector<std::uint8_t> next_day; // successor session on the following day
        std::vector<double> session_reward; // mean normalized reward of the session
        std::vector<int> return_day; // gap to the successor, clamped to max_return_day
    };

    struct RetentionFitResult {
        std::vector<double> epoch_loss;
        double empirical_mean_return_day = 0.0;
        double simulated_mean_return_day = 0.0;
    };

    class RetentionModel {
    public:
        RetentionModel() = default;
        RetentionModel(RetentionHead<float> head, RetentionConfig config);

        const RetentionConfig& config() const { return _config; }
        RetentionConfig& config() { return _config; }
        const RetentionHead<float>& head() const { return _head; }
        RetentionHead<float>& head() { return _head; }

        double personal_bias(const Eigen::VectorXf& state) const;
        double probability(const Eigen::VectorXf& state, double reward) const;

        /// Fits the head by BCE, then the global bias by bisection so that the mean closed-form
        /// truncated-geometric return day over the examples matches the empirical one.
        RetentionFitResult fit(const RetentionExamples& examples, const RetentionFitConfig& fit_config);

    private:
        RetentionHead<float> _head;
        RetentionConfig _config;
    };

    /// Solves for the global bias; returns the attained simulated mean return day.
    double fit_global_bias(std::span<const double> personal_bias, std::span<const double> session_reward, double target_mean_return_day,
        int max_return_day, RetentionConfig& config);

} // namespace slatesim::env
