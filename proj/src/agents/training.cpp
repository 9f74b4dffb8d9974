#include <slatesim/agents/training.hpp>
#include <slatesim/metrics/metrics.hpp>

#include <json.hpp>

#include <ostream>

namespace slatesim::agents {

    RewardSignal default_signal(env::TaskMode mode)
    {
        return mode == env::TaskMode::cross_session ? RewardSignal::return_time : RewardSignal::immediate;
    }

    double transition_reward(const env::StepResult& result, RewardSignal signal)
    {
        if (signal == RewardSignal::immediate)
            return result.feedback.reward;
        return result.feedback.leave ? -static_cast<double>(result.feedback.return_day) : 0.0;
    }

    TrainLoopResult train_agent(Agent& agent, env::BatchEnvironment& envs, const StateFeaturizer& featurizer, const TrainLoopConfig& config)
    {
        if (config.updates < 0)
            throw ConfigError("train: updates must be non-negative");
        TrainLoopResult out;
        double reward_sum = 0.0;
        std::vector<Decision> decisions(envs.size());
        std::vector<SlateAction> actions(envs.size());
        for (long it = 0; it < config.updates; ++it) {
            agent.set_progress(config.updates > 0 ? static_cast<double>(it) / static_cast<double>(config.updates) : 1.0);
            const auto observations = envs.observations();
            for (std::size_t i = 0; i < envs.size(); ++i) {
                decisions[i] = agent.decide(observations[i], true);
                actions[i] = decisions[i].slate;
            }
            const auto results = envs.step(actions);
            for (std::size_t i = 0; i < envs.size(); ++i) {
                const double r = transition_reward(results[i], config.signal);
                reward_sum += r;
                if (decisions[i].action.size() == 0)
                    continue;
                Transition t;
                t.state = std::move(decisions[i].state);
                t.action = std::move(decisions[i].action);
                t.reward = r;
                t.next_state = featurizer(results[i].observation);
                t.done = results[i].done;
                t.return_day = results[i].feedback.return_day;
                agent.observe(t);
            }
            out.env_steps += static_cast<long>(envs.size());
            Losses losses = agent.update();
            if (!losses.empty()) {
                ++out.learning_updates;
                out.last_losses = std::move(losses);
            }
            if (config.progress && config.progress_every > 0 && ((it + 1) % config.progress_every == 0 || it + 1 == config.updates)) {
                nlohmann::ordered_json line;
                line["update"] = it + 1;
                line["mean_reward"] = reward_sum / static_cast<double>(out.env_steps);
                for (const auto& [k, v] : out.last_losses)
                    line[k] = v;
                *config.progress << line.dump() << '\n';
            }
        }
        out.mean_reward = out.env_steps > 0 ? reward_sum / static_cast<double>(out.env_steps) : 0.0;
        return out;
    }

    ItemCatalog EnvSetup::catalog() const
    {
        ItemCatalog c;
        c.size = model->item_count();
        c.features = model->item_embeddings();
        return c;
    }

    Trajectory evaluate_agent(Agent& agent, const EnvSetup& setup, int episodes, std::uint64_t seed, int max_lanes)
    {
        if (episodes < 1 || max_lanes < 1)
            throw ConfigError("evaluate: episodes and max_lanes must be positive");
        const int lanes = std::min(episodes, max_lanes);
        const auto seeds = env::BatchEnvironment::lane_seeds(seed, static_cast<std::size_t>(lanes));
        std::vector<env::Environment> envs;
        std::vector<int> remaining;
        std::vector<int> finished(static_cast<std::size_t>(lanes), 0);
        std::vector<Observation> obs;
        for (int l = 0; l < lanes; ++l) {
            env::EnvConfig cfg = setup.config;
            cfg.seed = seeds[static_cast<std::size_t>(l)];
            envs.emplace_back(cfg, setup.model, setup.users, setup.retention);
            remaining.push_back(episodes / lanes + (l < episodes % lanes ? 1 : 0));
            obs.push_back(envs.back().reset());
        }
        Trajectory out;
        int active = lanes;
        while (active > 0) {
            for (int l = 0; l < lanes; ++l) {
                const auto li = static_cast<std::size_t>(l);
                if (remaining[li] == 0)
                    continue;
                auto result = envs[li].step(agent.act(obs[li], false));
                TrajectoryStep rec = std::move(result.info.record);
                rec.episode = static_cast<std::int64_t>(finished[li]) * lanes + l;
                out.push_back(std::move(rec));
                if (result.done) {
                    ++finished[li];
                    if (--remaining[li] == 0) {
                        --active;
                        continue;
                    }
                    obs[li] = envs[li].reset();
                } else {
                    obs[li] = std::move(result.observation);
                }
            }
        }
        return out;
    }

    double episode_score(const Trajectory& steps, env::TaskMode mode)
    {
        if (mode == env::TaskMode::cross_session)
            return -metrics::retention_metrics(steps).return_day;
        return metrics::session_metrics(steps).total_reward;
    }

    CemObjective linear_policy_objective(const EnvSetup& setup, const StateFeaturizer& featurizer, int episodes, std::uint64_t seed)
    {
        const ItemCatalog catalog = setup.catalog();
        return [=](const std::vector<Eigen::VectorXd>& candidates, int iteration) {
            const std::uint64_t round_seed = derive_seed(seed, "cem.round", static_cast<std::uint64_t>(iteration));
            std::vector<double> values;
            values.reserve(candidates.size());
            for (const auto& theta : candidates) {
                LinearPolicyAgent agent(featurizer, catalog, setup.config.slate_size, theta);
                values.push_back(episode_score(evaluate_agent(agent, setup, episodes, round_seed), setup.config.mode));
            }
            return values;
        };
    }

} // namespace slatesim::agents
