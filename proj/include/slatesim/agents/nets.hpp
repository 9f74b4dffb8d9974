#pragma once

#include <slatesim/nn/layers.hpp>

#include <cmath>
#include <numbers>

namespace slatesim::agents {

    using nn::Matrix;
    using nn::RowVector;
    using nn::Vector;

    /// state -> 2*state (ReLU) -> action_dim, squashed by tanh.
    template <typename Scalar>
    struct ActorNet {
        nn::ParamStore<Scalar> params;
        nn::Mlp mlp;

        struct Cache {
            nn::MlpCache<Scalar> mlp;
            Matrix<Scalar> out;
        };

        ActorNet() = default;
        ActorNet(Eigen::Index state_dim, Eigen::Index action_dim, Rng& rng)
        {
            mlp = nn::make_mlp(params, "actor", state_dim, 2 * state_dim, action_dim, rng);
        }

        template <typename Other>
        ActorNet<Other> cast() const
        {
            ActorNet<Other> out;
            out.params = params.template cast<Other>();
            out.mlp = mlp;
            return out;
        }

        Matrix<Scalar> forward(const Matrix<Scalar>& states, Cache* cache = nullptr) const
        {
            Matrix<Scalar> out = nn::forward(params, mlp, states, {}, cache ? &cache->mlp : nullptr).array().tanh().matrix();
            if (cache)
                cache->out = out;
            return out;
        }

        Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& d_out)
        {
            const Matrix<Scalar> d_pre = (d_out.array() * (Scalar(1) - cache.out.array().square())).matrix();
            return nn::backward(params, mlp, cache.mlp, d_pre);
        }
    };

    /// Q(s, a) = DNN([s, a]) or V(s) = DNN(s) when action_dim is 0.
    template <typename Scalar>
    struct CriticNet {
        nn::ParamStore<Scalar> params;
        nn::Mlp mlp;
        Eigen::Index state_dim = 0;
        Eigen::Index action_dim = 0;

        CriticNet() = default;
        CriticNet(Eigen::Index s, Eigen::Index a, Rng& rng, const std::string& name = "critic") : state_dim(s), action_dim(a)
        {
            mlp = nn::make_mlp(params, name, s + a, 2 * (s + a), 1, rng);
        }

        template <typename Other>
        CriticNet<Other> cast() const
        {
            CriticNet<Other> out;
            out.params = params.template cast<Other>();
            out.mlp = mlp;
            out.state_dim = state_dim;
            out.action_dim = action_dim;
            return out;
        }

        Matrix<Scalar> joined(const Matrix<Scalar>& states, const Matrix<Scalar>& actions) const
        {
            if (action_dim == 0)
                return states;
            Matrix<Scalar> x(states.rows(), state_dim + action_dim);
            x << states, actions;
            return x;
        }

        /// n x 1.
        Matrix<Scalar> forward(const Matrix<Scalar>& states, const Matrix<Scalar>& actions, nn::MlpCache<Scalar>* cache = nullptr) const
        {
            return nn::forward(params, mlp, joined(states, actions), {}, cache);
        }

        /// Returns d(input) = [d_state, d_action].
        Matrix<Scalar> backward(const nn::MlpCache<Scalar>& cache, const Matrix<Scalar>& d_q) { return nn::backward(params, mlp, cache, d_q); }
    };

    /// Mean squared TD error against fixed targets.
    template <typename Scalar>
    double critic_loss(CriticNet<Scalar>& critic, const Matrix<Scalar>& states, const Matrix<Scalar>& actions, const Vector<Scalar>& targets,
        bool with_grad)
    {
        nn::MlpCache<Scalar> cache;
        const Matrix<Scalar> q = critic.forward(states, actions, with_grad ? &cache : nullptr);
        const Vector<Scalar> diff = q.col(0) - targets;
        const auto n = static_cast<Scalar>(diff.size());
        if (with_grad)
            critic.backward(cache, (Scalar(2) / n) * diff);
        return static_cast<double>(diff.squaredNorm() / n);
    }

    /// -mean Q(s, actor(s)); gradients reach the actor (the critic's accumulate too and are ignored).
    template <typename Scalar>
    double deterministic_actor_loss(ActorNet<Scalar>& actor, CriticNet<Scalar>& critic, const Matrix<Scalar>& states, bool with_grad)
    {
        typename ActorNet<Scalar>::Cache actor_cache;
        nn::MlpCache<Scalar> critic_cache;
        const Matrix<Scalar> actions = actor.forward(states, with_grad ? &actor_cache : nullptr);
        const Matrix<Scalar> q = critic.forward(states, actions, with_grad ? &critic_cache : nullptr);
        const auto n = static_cast<Scalar>(states.rows());
        if (with_grad) {
            const Matrix<Scalar> d_q = Matrix<Scalar>::Constant(states.rows(), 1, Scalar(-1) / n);
            const Matrix<Scalar> d_in = critic.backward(critic_cache, d_q);
            actor.backward(actor_cache, d_in.rightCols(critic.action_dim));
        }
        return -static_cast<double>(q.sum() / n);
    }

    /// Diagonal Gaussian policy N(tanh-actor(s), exp(log_std)^2).
    template <typename Scalar>
    struct GaussianPolicy {
        ActorNet<Scalar> actor;
        nn::ParamId log_std;

        GaussianPolicy() = default;
        GaussianPolicy(Eigen::Index state_dim, Eigen::Index action_dim, double initial_std, Rng& rng) : actor(state_dim, action_dim, rng)
        {
            log_std = actor.params.add("log_std", Matrix<Scalar>::Constant(1, action_dim, static_cast<Scalar>(std::log(initial_std))));
        }

        template <typename Other>
        GaussianPolicy<Other> cast() const
        {
            GaussianPolicy<Other> out;
            out.actor = actor.template cast<Other>();
            out.log_std = log_std;
            return out;
        }
    };

    /// -mean(advantage * log pi(a|s)) - entropy_coef * entropy.
    template <typename Scalar>
    double policy_gradient_loss(GaussianPolicy<Scalar>& policy, const Matrix<Scalar>& states, const Matrix<Scalar>& actions,
        const Vector<Scalar>& advantages, double entropy_coef, bool with_grad)
    {
        typename ActorNet<Scalar>::Cache cache;
        const Matrix<Scalar> mean = policy.actor.forward(states, with_grad ? &cache : nullptr);
        const RowVector<Scalar> log_std = policy.actor.params.value(policy.log_std);
        const RowVector<Scalar> inv_var = (Scalar(-2) * log_std.array()).exp().matrix();
        const Eigen::Index n = states.rows();
        const Eigen::Index d = actions.cols();
        const Scalar half_log_2pi = static_cast<Scalar>(0.5 * std::log(2.0 * std::numbers::pi));

        double total = 0.0;
        Matrix<Scalar> d_mean(n, d);
        RowVector<Scalar> d_log_std = RowVector<Scalar>::Zero(d);
        for (Eigen::Index i = 0; i < n; ++i) {
            const RowVector<Scalar> z = actions.row(i) - mean.row(i);
            const Scalar log_prob = -(Scalar(0.5) * z.array().square() * inv_var.array() + log_std.array() + half_log_2pi).sum();
            const Scalar a = advantages[i];
            total += -static_cast<double>(a * log_prob);
            const Scalar w = -a / static_cast<Scalar>(n);
            d_mean.row(i) = w * (z.array() * inv_var.array()).matrix();
            d_log_std += w * (z.array().square() * inv_var.array() - Scalar(1)).matrix();
        }
        const double entropy = static_cast<double>((log_std.array() + Scalar(0.5) + half_log_2pi).sum());
        if (with_grad) {
            policy.actor.backward(cache, d_mean);
            policy.actor.params.grad(policy.log_std) += d_log_std - Matrix<Scalar>::Constant(1, d, static_cast<Scalar>(entropy_coef));
        }
        return total / static_cast<double>(n) - entropy_coef * entropy;
    }

} // namespace slatesim::agents
