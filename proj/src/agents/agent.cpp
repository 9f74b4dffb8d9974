#include <slatesim/agents/agent.hpp>

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace slatesim::agents {

    StateFeaturizer::StateFeaturizer(Eigen::MatrixXf item_features, Eigen::Index profile_dim, BehaviorSchema schema)
        : _items(std::move(item_features)), _profile_dim(profile_dim)
    {
        for (int b = 0; b < schema.size(); ++b)
            if (schema.weight(b) > 0.0)
                _positive_mask |= BehaviorBits{1} << b;
    }

    Eigen::VectorXf StateFeaturizer::operator()(const Observation& obs) const
    {
        if (obs.profile.feature_dim() != _profile_dim)
            throw ShapeError("featurizer: profile dimension mismatch");
        const Eigen::Index d = _items.cols();
        Eigen::VectorXf out = Eigen::VectorXf::Zero(dim());
        out.head(_profile_dim) = obs.profile.dense_features;
        Eigen::VectorXf all = Eigen::VectorXf::Zero(d);
        Eigen::VectorXf liked = Eigen::VectorXf::Zero(d);
        int liked_count = 0;
        for (std::size_t s = obs.first_filled(); s < obs.capacity(); ++s) {
            const ItemId item = obs.history_items[s];
            if (item < 0 || item >= _items.rows())
                throw DataError("featurizer: history item outside the catalog");
            all += _items.row(item).transpose();
            if (obs.history_feedback[s] & _positive_mask) {
                liked += _items.row(item).transpose();
                ++liked_count;
            }
        }
        if (obs.history_len > 0)
            out.segment(_profile_dim, d) = all / static_cast<float>(obs.history_len);
        if (liked_count > 0)
            out.segment(_profile_dim + d, d) = liked / static_cast<float>(liked_count);
        out[dim() - 1] = obs.capacity() == 0 ? 0.0f : static_cast<float>(obs.history_len) / static_cast<float>(obs.capacity());
        return out;
    }

    SlateAction hyperaction_to_slate(const Eigen::VectorXf& hyper, const ItemCatalog& catalog, int k, double noise, Rng* rng,
        Eigen::VectorXf* perturbed)
    {
        if (k < 1 || k > catalog.size)
            throw ConfigError("hyperaction_to_slate: slate size " + std::to_string(k) + " outside 1.." + std::to_string(catalog.size));
        if (hyper.size() != catalog.embedding_dim())
            throw ShapeError("hyperaction_to_slate: hyper-action dimension differs from the catalog embedding");
        Eigen::VectorXf v = hyper;
        if (noise > 0.0) {
            if (!rng)
                throw ConfigError("hyperaction_to_slate: exploration needs an rng");
            for (Eigen::Index i = 0; i < v.size(); ++i)
                v[i] += static_cast<float>(noise * standard_normal(*rng));
        }
        const Eigen::VectorXf scores = catalog.features * v;
        std::vector<ItemId> order(static_cast<std::size_t>(catalog.size));
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](ItemId a, ItemId b) {
            return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
        });
        order.resize(static_cast<std::size_t>(k));
        if (perturbed)
            *perturbed = std::move(v);
        return {order};
    }

    ReplayBuffer::ReplayBuffer(std::size_t capacity) : _capacity(capacity)
    {
        if (capacity == 0)
            throw ConfigError("replay buffer capacity must be positive");
    }

    void ReplayBuffer::push(Transition t)
    {
        if (_data.size() < _capacity)
            _data.push_back(std::move(t));
        else
            _data[static_cast<std::size_t>(_inserted % _capacity)] = std::move(t);
        ++_inserted;
    }

    std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const
    {
        if (n > _data.size())
            throw ShapeError("replay buffer holds fewer transitions than requested");
        // Partial Fisher-Yates over slot indices; sparse map keeps it O(n).
        std::unordered_map<std::size_t, std::size_t> swapped;
        std::vector<const Transition*> out;
        out.reserve(n);
        const std::size_t size = _data.size();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + uniform_index(rng, size - i);
            const auto at = [&](std::size_t slot) {
                const auto it = swapped.find(slot);
                return it == swapped.end() ? slot : it->second;
            };
            const std::size_t picked = at(j);
            swapped[j] = at(i);
            out.push_back(&_data[picked]);
        }
        return out;
    }

    RandomAgent::RandomAgent(ItemCatalog catalog, int k, StateFeaturizer featurizer, std::uint64_t seed)
        : _catalog(std::move(catalog)), _k(k), _featurizer(std::move(featurizer)), _rng(seed)
    {
        if (k < 1 || k > _catalog.size)
            throw ConfigError("random agent: slate size outside the catalog");
    }

    Decision RandomAgent::decide(const Observation& obs, bool)
    {
        // Sequential draws without replacement: draw t picks among the size - t remaining ids.
        std::unordered_map<ItemId, ItemId> swapped;
        Decision d;
        for (int t = 0; t < _k; ++t) {
            const auto j = static_cast<ItemId>(t + static_cast<int>(uniform_index(_rng, static_cast<std::size_t>(_catalog.size - t))));
            const auto at = [&](ItemId slot) {
                const auto it = swapped.find(slot);
                return it == swapped.end() ? slot : it->second;
            };
            const ItemId picked = at(j);
            swapped[j] = at(t);
            d.slate.items.push_back(picked);
        }
        if (_featurizer.dim() > 1)
            d.state = _featurizer(obs);
        return d;
    }

    void save_agent(const std::filesystem::path& path, const Agent& agent, const nlohmann::json& meta)
    {
        auto full = meta;
        full["agent"] = agent.name();
        nn::write_checkpoint(path, agent.stores(), full);
    }

    void load_agent(const std::filesystem::path& path, Agent& agent)
    {
        const auto ckpt = nn::read_checkpoint(path);
        if (ckpt.meta.value("agent", "") != agent.name())
            throw DataError("checkpoint " + path.string() + " does not hold a '" + agent.name() + "' agent");
        for (auto& [prefix, store] : agent.mutable_stores())
            nn::load_into(ckpt, prefix, *store);
    }

} // namespace slatesim::agents
