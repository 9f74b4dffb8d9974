#pragma once

#include <slatesim/agents/agent.hpp>
#include <slatesim/agents/nets.hpp>
#include <slatesim/nn/adam.hpp>

namespace slatesim::agents {

    struct ActorCriticConfig {
        int slate_size = 20;
        double gamma = 0.9;
        double tau = 0.005;
        double actor_lr = 1e-4;
        double critic_lr = 1e-3;
        double l2 = 0.0;
        int batch_size = 64;
        std::size_t buffer_capacity = 100'000;
        /// Updates wait until the buffer holds this many transitions (at least one batch).
        std::size_t min_buffer = 256;
        /// Gaussian noise on hyper-actions, linearly annealed to `final_exploration_std`.
        double exploration_std = 0.1;
        double final_exploration_std = 0.0;
        int policy_delay = 2;
        double target_noise = 0.2;
        double target_noise_clip = 0.5;
        double entropy_coef = 1e-3;
        double initial_policy_std = 0.1;
        std::uint64_t seed = 1;
    };

    /// y = r + gamma * (1 - done) * Q'(s', actor'(s')).
    template <typename Scalar>
    Vector<Scalar> ddpg_targets(const ActorNet<Scalar>& actor_target, const CriticNet<Scalar>& critic_target, const Matrix<Scalar>& next_states,
        const Vector<Scalar>& rewards, const Vector<Scalar>& not_done, double gamma)
    {
        const Matrix<Scalar> next_q = critic_target.forward(next_states, actor_target.forward(next_states));
        return rewards + static_cast<Scalar>(gamma) * not_done.cwiseProduct(next_q.col(0));
    }

    /// Clipped double-Q target on a smoothed target action; consumes 2 draws per action entry.
    template <typename Scalar>
    Vector<Scalar> td3_targets(const ActorNet<Scalar>& actor_target, const CriticNet<Scalar>& critic1_target,
        const CriticNet<Scalar>& critic2_target, const Matrix<Scalar>& next_states, const Vector<Scalar>& rewards,
        const Vector<Scalar>& not_done, double gamma, double noise_std, double noise_clip, Rng& rng)
    {
        Matrix<Scalar> next_actions = actor_target.forward(next_states);
        for (Eigen::Index j = 0; j < next_actions.cols(); ++j)
            for (Eigen::Index i = 0; i < next_actions.rows(); ++i) {
                const double eps = std::clamp(noise_std * standard_normal(rng), -noise_clip, noise_clip);
                next_actions(i, j) = std::clamp(next_actions(i, j) + static_cast<Scalar>(eps), Scalar(-1), Scalar(1));
            }
        const Matrix<Scalar> q1 = critic1_target.forward(next_states, next_actions);
        const Matrix<Scalar> q2 = critic2_target.forward(next_states, next_actions);
        return rewards + static_cast<Scalar>(gamma) * not_done.cwiseProduct(q1.col(0).cwiseMin(q2.col(0)));
    }

    struct Batch {
        Eigen::MatrixXf states;
        Eigen::MatrixXf actions;
        Eigen::VectorXf rewards;
        Eigen::MatrixXf next_states;
        Eigen::VectorXf not_done;
    };
    Batch stack(const std::vector<const Transition*>& transitions);

    /// Shared plumbing of the hyper-action agents: featurizer, catalog decoding, exploration schedule.
    class HyperActionAgent : public Agent {
    public:
        HyperActionAgent(StateFeaturizer featurizer, ItemCatalog catalog, ActorCriticConfig config);
        void set_progress(double fraction) override;
        double exploration_std() const { return _sigma; }
        const ActorCriticConfig& config() const { return _config; }
        const StateFeaturizer& featurizer() const { return _featurizer; }

    protected:
        Decision decode(Eigen::VectorXf state, const Eigen::VectorXf& mean, double noise);

        StateFeaturizer _featurizer;
        ItemCatalog _catalog;
        ActorCriticConfig _config;
        double _sigma;
        Rng _explore_rng;
        Rng _sample_rng;
    };

    class DdpgAgent : public HyperActionAgent {
    public:
        DdpgAgent(StateFeaturizer featurizer, ItemCatalog catalog, ActorCriticConfig config);
        std::string name() const override { return "ddpg"; }
        Decision decide(const Observation& obs, bool explore) override;
        void observe(const Transition& t) override { buffer.push(t); }
        Losses update() override;
        std::vector<nn::NamedStore> stores() const override;
        std::vector<std::pair<std::string, nn::ParamStore<float>*>> mutable_stores() override;

        ActorNet<float> actor, actor_target;
        CriticNet<float> critic, critic_target;
        ReplayBuffer buffer;

    private:
        nn::OptimizerState<float> _actor_opt, _critic_opt;
    };

    class Td3Agent : public HyperActionAgent {
    public:
        Td3Agent(StateFeaturizer featurizer, ItemCatalog catalog, ActorCriticConfig config);
        std::string name() const override { return "td3"; }
        Decision decide(const Observation& obs, bool explore) override;
        void observe(const Transition& t) override { buffer.push(t); }
        Losses update() override;
        std::vector<nn::NamedStore> stores() const override;
        std::vector<std::pair<std::string, nn::ParamStore<float>*>> mutable_stores() override;

        ActorNet<float> actor, actor_target;
        CriticNet<float> critic1, critic2, critic1_target, critic2_target;
        ReplayBuffer buffer;
        long updates = 0;

    private:
        nn::OptimizerState<float> _actor_opt, _critic1_opt, _critic2_opt;
        Rng _target_rng;
    };

    /// On-policy advantage actor-critic over a Gaussian hyper-action head.
    class A2cAgent : public HyperActionAgent {
    public:
        A2cAgent(StateFeaturizer featurizer, ItemCatalog catalog, ActorCriticConfig config);
        std::string name() const override { return "a2c"; }
        Decision decide(const Observation& obs, bool explore) override;
        void observe(const Transition& t) override { _pending.push_back(t); }
        Losses update() override;
        std::vector<nn::NamedStore> stores() const override;
        std::vector<std::pair<std::string, nn::ParamStore<float>*>> mutable_stores() override;

        /// One update on an explicit batch (used by update() once a batch is pending).
        Losses update_on(const std::vector<Transition>& batch);

        GaussianPolicy<float> policy;
        CriticNet<float> value;

    private:
        std::vector<Transition> _pending;
        nn::OptimizerState<float> _actor_opt, _value_opt;
    };

} // namespace slatesim::agents
