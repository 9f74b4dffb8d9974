#pragma once

#include <slatesim/agents/agent.hpp>

#include <functional>

namespace slatesim::agents {

    struct CemConfig {
        int population = 20;
        double elite_frac = 0.2;
        int iterations = 20;
        double initial_std = 0.5;
        double min_variance = 1e-4;
        std::uint64_t seed = 1;

        int elite_count() const;
        void validate() const;
    };

    struct CemIteration {
        double population_mean = 0.0;
        double elite_mean = 0.0;
        double best_value = 0.0; // best seen so far
        bool frozen = false;
    };

    struct CemResult {
        Eigen::VectorXd mean;
        Eigen::VectorXd std;
        Eigen::VectorXd best_params;
        double best_value = 0.0;
        std::vector<CemIteration> iterations;
        std::vector<std::string> warnings;

        std::vector<double> best_trace() const;
    };

    /// Scores a whole population at once; `iteration` lets callers share random numbers per round.
    using CemObjective = std::function<std::vector<double>(const std::vector<Eigen::VectorXd>& candidates, int iteration)>;

    /// Maximizes `objective` with a diagonal Gaussian search distribution. Candidates are drawn
    /// mean + std * N(0, 1) coordinate by coordinate, candidate by candidate. When every objective
    /// in a round is equal the distribution is left unchanged and a warning is recorded.
    CemResult cem_optimize(const CemObjective& objective, const Eigen::VectorXd& initial_mean, const CemConfig& config);

    /// hyper = tanh(W s + b) decoded against the catalog; parameters are [vec(W) column-major, b].
    class LinearPolicyAgent final : public Agent {
    public:
        LinearPolicyAgent(StateFeaturizer featurizer, ItemCatalog catalog, int k, const Eigen::VectorXd& params);
        static Eigen::Index param_count(Eigen::Index state_dim, Eigen::Index action_dim) { return action_dim * state_dim + action_dim; }

        std::string name() const override { return "cem"; }
        Decision decide(const Observation& obs, bool explore) override;
        std::vector<nn::NamedStore> stores() const override { return {{"policy/", &_store}}; }
        std::vector<std::pair<std::string, nn::ParamStore<float>*>> mutable_stores() override;

    private:
        StateFeaturizer _featurizer;
        ItemCatalog _catalog;
        int _k;
        nn::ParamStore<float> _store;
        nn::ParamId _w, _b;
    };

} // namespace slatesim::agents
