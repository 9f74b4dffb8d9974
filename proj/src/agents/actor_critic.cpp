#include <slatesim/agents/actor_critic.hpp>

namespace slatesim::agents {

    namespace {

        nn::AdamConfig adam(double lr, double l2)
        {
            nn::AdamConfig c;
            c.learning_rate = lr;
            c.l2 = l2;
            return c;
        }

        void validate(const ActorCriticConfig& c)
        {
            if (!(c.gamma >= 0.0 && c.gamma < 1.0))
                throw ConfigError("gamma must lie in [0, 1)");
            if (!(c.tau > 0.0 && c.tau <= 1.0))
                throw ConfigError("tau must lie in (0, 1]");
            if (c.batch_size < 1)
                throw ConfigError("batch_size must be positive");
            if (c.policy_delay < 1)
                throw ConfigError("policy_delay must be at least 1");
            if (c.exploration_std < 0.0 || c.final_exploration_std < 0.0 || c.target_noise < 0.0 || c.target_noise_clip < 0.0)
                throw ConfigError("noise scales must be non-negative");
            if (!(c.initial_policy_std > 0.0))
                throw ConfigError("initial_policy_std must be positive");
        }

    } // namespace

    Batch stack(const std::vector<const Transition*>& transitions)
    {
        if (transitions.empty())
            throw ShapeError("cannot stack an empty batch");
        const auto n = static_cast<Eigen::Index>(transitions.size());
        const Eigen::Index s = transitions.front()->state.size();
        const Eigen::Index a = transitions.front()->action.size();
        Batch b{Eigen::MatrixXf(n, s), Eigen::MatrixXf(n, a), Eigen::VectorXf(n), Eigen::MatrixXf(n, s), Eigen::VectorXf(n)};
        for (Eigen::Index i = 0; i < n; ++i) {
            const Transition& t = *transitions[static_cast<std::size_t>(i)];
            if (t.state.size() != s || t.next_state.size() != s || t.action.size() != a)
                throw ShapeError("transition shapes differ within a batch");
            b.states.row(i) = t.state.transpose();
            b.actions.row(i) = t.action.transpose();
            b.rewards[i] = static_cast<float>(t.reward);
            b.next_states.row(i) = t.next_state.transpose();
            b.not_done[i] = t.done ? 0.0f : 1.0f;
        }
        return b;
    }

    HyperActionAgent::HyperActionAgent(StateFeaturizer featurizer, ItemCatalog catalog, ActorCriticConfig config)
        : _featurizer(std::move(featurizer)), _catalog(std::move(catalog)), _config(config), _sigma(config.exploration_std),
          _explore_rng(derive_seed(config.seed, "agent.explore", 0)), _sample_rng(derive_seed(config.seed, "agent.replay", 0))
    {
        validate(config);
        if (config.slate_size < 1 || config.slate_size > _catalog.size)
            throw ConfigError("slate_size outside 1..catalog size");
    }

    void HyperActionAgent::set_progress(double fraction)
    {
        const double f = std::clamp(fraction, 0.0, 1.0);
        _sigma = (1.0 - f) * _config.exploration_std + f * _config.final_exploration_std;
    }

    Decision HyperActionAgent::decode(Eigen::VectorXf state, const Eigen::VectorXf& mean, double noise)
    {
        Eigen::VectorXf action = mean;
        if (noise > 0.0)
            for (Eigen::Index i = 0; i < action.size(); ++i)
                action[i] = std::clamp(action[i] + static_cast<float>(noise * standard_normal(_explore_rng)), -1.0f, 1.0f);
        Decision d;
        d.slate = hyperaction_to_slate(action, _catalog, _config.slate_size, 0.0, nullptr);
        d.state = std::move(state);
        d.action = std::move(action);
        return d;
    }

    // ---- DDPG ----

    DdpgAgent::DdpgAgent(StateFeaturizer featurizer, ItemCatalog catalog, ActorCriticConfig config)
        : HyperActionAgent(std::move(featurizer), std::move(catalog), config), buffer(config.buffer_capacity)
    {
        Rng init(derive_seed(config.seed, "agent.init", 0));
        const Eigen::Index s = _featurizer.dim();
        const Eigen::Index a = _catalog.embedding_dim();
        actor = ActorNet<float>(s, a, init);
        critic = CriticNet<float>(s, a, init);
        actor_target = actor;
        critic_target = critic;
        _actor_opt = nn::OptimizerState<float>(actor.params, adam(config.actor_lr, config.l2));
        _critic_opt = nn::OptimizerState<float>(critic.params, adam(config.critic_lr, config.l2));
    }

    Decision DdpgAgent::decide(const Observation& obs, bool explore)
    {
        Eigen::VectorXf state = _featurizer(obs);
        const Eigen::VectorXf mean = actor.forward(state.transpose()).row(0).transpose();
        return decode(std::move(state), mean, explore ? _sigma : 0.0);
    }

    Losses DdpgAgent::update()
    {
        const auto need = std::max<std::size_t>(_config.min_buffer, static_cast<std::size_t>(_config.batch_size));
        if (buffer.size() < need)
            return {};
        const Batch b = stack(buffer.sample(static_cast<std::size_t>(_config.batch_size), _sample_rng));
        const Eigen::VectorXf y = ddpg_targets(actor_target, critic_target, b.next_states, b.rewards, b.not_done, _config.gamma);

        critic.params.zero_grad();
        const double lc = critic_loss(critic, b.states, b.actions, y, true);
        _critic_opt.step(critic.params);

        actor.params.zero_grad();
        const double la = deterministic_actor_loss(actor, critic, b.states, true);
        critic.params.zero_grad();
        _actor_opt.step(actor.params);

        nn::soft_update(actor_target.params, actor.params, _config.tau);
        nn::soft_update(critic_target.params, critic.params, _config.tau);
        return {{"critic_loss", lc}, {"actor_loss", la}};
    }

    std::vector<nn::NamedStore> DdpgAgent::stores() const
    {
        return {{"actor/", &actor.params}, {"actor_target/", &actor_target.params}, {"critic/", &critic.params},
            {"critic_target/", &critic_target.params}};
    }

    std::vector<std::pair<std::string, nn::ParamStore<float>*>> DdpgAgent::mutable_stores()
    {
        return {{"actor/", &actor.params}, {"actor_target/", &actor_target.params}, {"critic/", &critic.params},
            {"critic_target/", &critic_target.params}};
    }

    // ---- TD3 ----

    Td3Agent::Td3Agent(StateFeaturizer featurizer, ItemCatalog catalog, ActorCriticConfig config)
        : HyperActionAgent(std::move(featurizer), std::move(catalog), config), buffer(config.buffer_capacity),
          _target_rng(derive_seed(config.seed, "agent.target_noise", 0))
    {
        Rng init(derive_seed(config.seed, "agent.init", 0));
        const Eigen::Index s = _featurizer.dim();
        const Eigen::Index a = _catalog.embedding_dim();
        actor = ActorNet<float>(s, a, init);
        critic1 = CriticNet<float>(s, a, init, "critic1");
        critic2 = CriticNet<float>(s, a, init, "critic2");
        actor_target = actor;
        critic1_target = critic1;
        critic2_target = critic2;
        _actor_opt = nn::OptimizerState<float>(actor.params, adam(config.actor_lr, config.l2));
        _critic1_opt = nn::OptimizerState<float>(critic1.params, adam(config.critic_lr, config.l2));
        _critic2_opt = nn::OptimizerState<float>(critic2.params, adam(config.critic_lr, config.l2));
    }

    Decision Td3Agent::decide(const Observation& obs, bool explore)
    {
        Eigen::VectorXf state = _featurizer(obs);
        const Eigen::VectorXf mean = actor.forward(state.transpose()).row(0).transpose();
        return decode(std::move(state), mean, explore ? _sigma : 0.0);
    }

    Losses Td3Agent::update()
    {
        const auto need = std::max<std::size_t>(_config.min_buffer, static_cast<std::size_t>(_config.batch_size));
        if (buffer.size() < need)
            return {};
        const Batch b = stack(buffer.sample(static_cast<std::size_t>(_config.batch_size), _sample_rng));
        const Eigen::VectorXf y = td3_targets(actor_target, critic1_target, critic2_target, b.next_states, b.rewards, b.not_done,
            _config.gamma, _config.target_noise, _config.target_noise_clip, _target_rng);

        critic1.params.zero_grad();
        critic2.params.zero_grad();
        const double l1 = critic_loss(critic1, b.states, b.actions, y, true);
        const double l2 = critic_loss(critic2, b.states, b.actions, y, true);
        _critic1_opt.step(critic1.params);
        _critic2_opt.step(critic2.params);
        ++updates;

        Losses out{{"critic1_loss", l1}, {"critic2_loss", l2}};
        if (updates % _config.policy_delay == 0) {
            actor.params.zero_grad();
            out["actor_loss"] = deterministic_actor_loss(actor, critic1, b.states, true);
            critic1.params.zero_grad();
            _actor_opt.step(actor.params);
            nn::soft_update(actor_target.params, actor.params, _config.tau);
            nn::soft_update(critic1_target.params, critic1.params, _config.tau);
            nn::soft_update(critic2_target.params, critic2.params, _config.tau);
        }
        return out;
    }

    std::vector<nn::NamedStore> Td3Agent::stores() const
    {
        return {{"actor/", &actor.params}, {"actor_target/", &actor_target.params}, {"critic1/", &critic1.params},
            {"critic2/", &critic2.params}, {"critic1_target/", &critic1_target.params}, {"critic2_target/", &critic2_target.params}};
    }

    std::vector<std::pair<std::string, nn::ParamStore<float>*>> Td3Agent::mutable_stores()
    {
        return {{"actor/", &actor.params}, {"actor_target/", &actor_target.params}, {"critic1/", &critic1.params},
            {"critic2/", &critic2.params}, {"critic1_target/", &critic1_target.params}, {"critic2_target/", &critic2_target.params}};
    }

    // ---- A2C ----

    A2cAgent::A2cAgent(StateFeaturizer featurizer, ItemCatalog catalog, ActorCriticConfig config)
        : HyperActionAgent(std::move(featurizer), std::move(catalog), config)
    {
        Rng init(derive_seed(config.seed, "agent.init", 0));
        const Eigen::Index s = _featurizer.dim();
        const Eigen::Index a = _catalog.embedding_dim();
        policy = GaussianPolicy<float>(s, a, config.initial_policy_std, init);
        value = CriticNet<float>(s, 0, init, "value");
        _actor_opt = nn::OptimizerState<float>(policy.actor.params, adam(config.actor_lr, config.l2));
        _value_opt = nn::OptimizerState<float>(value.params, adam(config.critic_lr, config.l2));
    }

    Decision A2cAgent::decide(const Observation& obs, bool explore)
    {
        Eigen::VectorXf state = _featurizer(obs);
        Eigen::VectorXf action = policy.actor.forward(state.transpose()).row(0).transpose();
        if (explore) {
            const Eigen::RowVectorXf log_std = policy.actor.params.value(policy.log_std);
            for (Eigen::Index i = 0; i < action.size(); ++i)
                action[i] += std::exp(log_std[i]) * static_cast<float>(standard_normal(_explore_rng));
        }
        Decision d;
        d.slate = hyperaction_to_slate(action, _catalog, _config.slate_size, 0.0, nullptr);
        d.state = std::move(state);
        d.action = std::move(action);
        return d;
    }

    Losses A2cAgent::update()
    {
        if (_pending.size() < static_cast<std::size_t>(_config.batch_size))
            return {};
        std::vector<Transition> batch;
        batch.swap(_pending);
        return update_on(batch);
    }

    Losses A2cAgent::update_on(const std::vector<Transition>& batch)
    {
        std::vector<const Transition*> ptrs;
        ptrs.reserve(batch.size());
        for (const auto& t : batch)
            ptrs.push_back(&t);
        const Batch b = stack(ptrs);
        const Eigen::MatrixXf none(b.states.rows(), 0);
        const Eigen::VectorXf v = value.forward(b.states, none).col(0);
        const Eigen::VectorXf v_next = value.forward(b.next_states, none).col(0);
        const Eigen::VectorXf y = b.rewards + static_cast<float>(_config.gamma) * b.not_done.cwiseProduct(v_next);
        const Eigen::VectorXf advantage = y - v;

        value.params.zero_grad();
        const double lv = critic_loss(value, b.states, none, y, true);
        _value_opt.step(value.params);

        policy.actor.params.zero_grad();
        const double lp = policy_gradient_loss(policy, b.states, b.actions, advantage, _config.entropy_coef, true);
        _actor_opt.step(policy.actor.params);
        return {{"value_loss", lv}, {"policy_loss", lp}, {"mean_advantage", static_cast<double>(advantage.mean())}};
    }

    std::vector<nn::NamedStore> A2cAgent::stores() const { return {{"policy/", &policy.actor.params}, {"value/", &value.params}}; }

    std::vector<std::pair<std::string, nn::ParamStore<float>*>> A2cAgent::mutable_stores()
    {
        return {{"policy/", &policy.actor.params}, {"value/", &value.params}};
    }

} // namespace slatesim::agents
