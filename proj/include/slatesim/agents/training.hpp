#pragma once

#include <slatesim/agents/agent.hpp>
#include <slatesim/agents/cem.hpp>
#include <slatesim/env/environment.hpp>

#include <iosfwd>
#include <memory>

namespace slatesim::agents {

    /// Immediate normalized reward r_t, or -return_day on leave steps (0 otherwise).
    enum class RewardSignal { immediate, return_time };
    RewardSignal default_signal(env::TaskMode mode);
    double transition_reward(const env::StepResult& result, RewardSignal signal);

    struct TrainLoopConfig {
        long updates = 2000;
        RewardSignal signal = RewardSignal::immediate;
        std::ostream* progress = nullptr; // JSON lines
        long progress_every = 100;
    };

    struct TrainLoopResult {
        long env_steps = 0;
        long learning_updates = 0; // update() calls that returned losses
        double mean_reward = 0.0; // transition reward over all env steps
        Losses last_losses;
    };

    /// One batched environment step then one agent update, `updates` times, with exploration on.
    TrainLoopResult train_agent(Agent& agent, env::BatchEnvironment& envs, const StateFeaturizer& featurizer, const TrainLoopConfig& config);

    /// Everything needed to spin up fresh evaluation environments.
    struct EnvSetup {
        env::EnvConfig config;
        std::shared_ptr<const env::ResponseModel> model;
        std::shared_ptr<const env::UserPool> users;
        std::shared_ptr<const env::RetentionModel> retention;

        ItemCatalog catalog() const;
    };

    /// Greedy roll-out of `episodes` episodes spread over at most `max_lanes` scalar environments
    /// seeded by BatchEnvironment::lane_seeds(seed, lanes). Episode ids are local * lanes + lane.
    Trajectory evaluate_agent(Agent& agent, const EnvSetup& setup, int episodes, std::uint64_t seed, int max_lanes = 64);

    /// Mean per-session score of a trajectory: -return_day in cross_session mode, total session
    /// reward otherwise.
    double episode_score(const Trajectory& steps, env::TaskMode mode);

    /// Each CEM round evaluates every candidate on the same seed, derived from (seed, round).
    CemObjective linear_policy_objective(const EnvSetup& setup, const StateFeaturizer& featurizer, int episodes, std::uint64_t seed);

} // namespace slatesim::agents
