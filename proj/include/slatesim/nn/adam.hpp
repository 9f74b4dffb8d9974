#pragma once

#include <slatesim/nn/param_store.hpp>

#include <cmath>

namespace slatesim::nn {

    struct AdamConfig {
        double learning_rate = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        double l2 = 0.0; // decoupled
    };

    /// Adam with bias correction and decoupled L2 shrinkage.
    template <typename Scalar>
    class OptimizerState {
    public:
        OptimizerState() = default;
        OptimizerState(const ParamStore<Scalar>& params, AdamConfig config) : _config(config)
        {
            for (const auto& e : params.entries()) {
                _first.push_back(Matrix<Scalar>::Zero(e.value.rows(), e.value.cols()));
                _second.push_back(Matrix<Scalar>::Zero(e.value.rows(), e.value.cols()));
            }
        }

        const AdamConfig& config() const { return _config; }
        void set_learning_rate(double lr) { _config.learning_rate = lr; }
        long steps() const { return _step; }

        /// Applies the gradients held in `params`. Returns false, leaving params and moments
        /// untouched, when any gradient is non-finite.
        bool step(ParamStore<Scalar>& params)
        {
            if (params.size() != _first.size())
                throw ShapeError("optimizer state does not match parameter layout");
            if (!params.grads_finite())
                return false;

            ++_step;
            const double c1 = 1.0 - std::pow(_config.beta1, static_cast<double>(_step));
            const double c2 = 1.0 - std::pow(_config.beta2, static_cast<double>(_step));
            const auto b1 = static_cast<Scalar>(_config.beta1);
            const auto b2 = static_cast<Scalar>(_config.beta2);
            const auto lr = static_cast<Scalar>(_config.learning_rate);
            const auto eps = static_cast<Scalar>(_config.epsilon);
            const auto l2 = static_cast<Scalar>(_config.l2);
            const auto inv_c1 = static_cast<Scalar>(1.0 / c1);
            const auto inv_c2 = static_cast<Scalar>(1.0 / c2);

            for (std::size_t i = 0; i < params.size(); ++i) {
                auto& entry = params.entries()[i];
                auto& m = _first[i];
                auto& v = _second[i];
                m = b1 * m + (Scalar(1) - b1) * entry.grad;
                v = b2 * v + (Scalar(1) - b2) * entry.grad.cwiseProduct(entry.grad);
                auto update = (m.array() * inv_c1) / ((v.array() * inv_c2).sqrt() + eps);
                if (_config.l2 > 0.0)
                    entry.value.array() -= lr * (update + l2 * entry.value.array());
                else
                    entry.value.array() -= lr * update;
            }
            return true;
        }

    private:
        AdamConfig _config;
        std::vector<Matrix<Scalar>> _first;
        std::vector<Matrix<Scalar>> _second;
        long _step = 0;
    };

} // namespace slatesim::nn
