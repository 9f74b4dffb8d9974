#pragma once

#include <slatesim/core/types.hpp>
#include <slatesim/nn/checkpoint.hpp>

#include <map>
#include <string>
#include <vector>

namespace slatesim::agents {

    /// Agent-side view of an observation: profile, mean history item features, mean features of
    /// items with any positive feedback, and the history fill fraction.
    class StateFeaturizer {
    public:
        StateFeaturizer() = default;
        StateFeaturizer(Eigen::MatrixXf item_features, Eigen::Index profile_dim, BehaviorSchema schema);

        Eigen::Index dim() const { return _profile_dim + 2 * _items.cols() + 1; }
        Eigen::VectorXf operator()(const Observation& obs) const;
        const Eigen::MatrixXf& item_features() const { return _items; }

    private:
        Eigen::MatrixXf _items;
        Eigen::Index _profile_dim = 0;
        BehaviorBits _positive_mask = 0;
    };

    /// Scores every item by <hyper, e_i> after optional N(0, noise^2) perturbation of `hyper` and
    /// returns the top-k, ties to the lower id. Always consumes 2 * d engine draws when noise > 0.
    /// `perturbed` receives the vector actually used.
    SlateAction hyperaction_to_slate(const Eigen::VectorXf& hyper, const ItemCatalog& catalog, int k, double noise, Rng* rng,
        Eigen::VectorXf* perturbed = nullptr);

    struct Transition {
        Eigen::VectorXf state;
        Eigen::VectorXf action;
        double reward = 0.0;
        Eigen::VectorXf next_state;
        bool done = false;
        int return_day = 0;
    };

    /// Fixed-capacity ring buffer. Each sample draws distinct slots.
    class ReplayBuffer {
    public:
        explicit ReplayBuffer(std::size_t capacity = 100'000);

        void push(Transition t);
        std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;
        std::size_t size() const { return _data.size(); }
        std::size_t capacity() const { return _capacity; }
        std::uint64_t inserted() const { return _inserted; }
        const Transition& at(std::size_t i) const { return _data[i]; }

    private:
        std::size_t _capacity;
        std::vector<Transition> _data;
        std::uint64_t _inserted = 0;
    };

    struct Decision {
        SlateAction slate;
        Eigen::VectorXf state; // featurized
        Eigen::VectorXf action; // hyper-action; empty for agents without one
    };

    using Losses = std::map<std::string, double>;

    class Agent {
    public:
        virtual ~Agent() = default;
        virtual std::string name() const = 0;
        virtual Decision decide(const Observation& obs, bool explore) = 0;
        SlateAction act(const Observation& obs, bool explore) { return decide(obs, explore).slate; }
        virtual void observe(const Transition&) {}
        /// Empty until the agent has enough data to learn.
        virtual Losses update() { return {}; }
        /// Fraction of training completed, for schedules such as exploration annealing.
        virtual void set_progress(double) {}
        virtual std::vector<nn::NamedStore> stores() const { return {}; }
        virtual std::vector<std::pair<std::string, nn::ParamStore<float>*>> mutable_stores() { return {}; }
    };

    /// Uniform random slates; consumes exactly k draws per call whatever the catalog.
    class RandomAgent final : public Agent {
    public:
        RandomAgent(ItemCatalog catalog, int k, StateFeaturizer featurizer, std::uint64_t seed);
        std::string name() const override { return "random"; }
        Decision decide(const Observation& obs, bool explore) override;

    private:
        ItemCatalog _catalog;
        int _k;
        StateFeaturizer _featurizer;
        Rng _rng;
    };

    /// Writes every store of `agent` into one checkpoint; `load_agent` restores them in place.
    void save_agent(const std::filesystem::path& path, const Agent& agent, const nlohmann::json& meta);
    void load_agent(const std::filesystem::path& path, Agent& agent);

} // namespace slatesim::agents
