#include <slatesim/agents/cf.hpp>
#include <slatesim/metrics/metrics.hpp>
#include <slatesim/nn/adam.hpp>

#include <numeric>

namespace slatesim::agents {

    int click_behavior(const BehaviorSchema& schema)
    {
        for (const char* name : {"is_click", "click"})
            if (const auto idx = schema.index_of(name))
                return *idx;
        return 0;
    }

    ClickExamples click_examples(const data::LogDataset& data)
    {
        const int click = click_behavior(data.schema);
        const Eigen::Index f = data.users.empty() ? 0 : data.users.front().feature_dim();
        ClickExamples ex;
        ex.profiles.resize(static_cast<Eigen::Index>(data.records.size()), f);
        for (std::size_t i = 0; i < data.records.size(); ++i) {
            const auto& rec = data.records[i];
            if (rec.user < 0 || static_cast<std::size_t>(rec.user) >= data.users.size())
                throw DataError("cf: record user outside the profile table");
            ex.users.push_back(rec.user);
            ex.items.push_back(rec.item);
            ex.labels.push_back(has_behavior(rec.behaviors, click) ? 1 : 0);
            ex.profiles.row(static_cast<Eigen::Index>(i)) = data.users[static_cast<std::size_t>(rec.user)].dense_features.transpose();
        }
        return ex;
    }

    CfModel<float> make_cf_model(const data::LogDataset& train, const CfConfig& config)
    {
        if (config.embedding_dim < 1)
            throw ConfigError("cf: embedding_dim must be positive");
        Rng rng(derive_seed(config.seed, "cf.init"));
        const Eigen::Index f = train.users.empty() ? 0 : train.users.front().feature_dim();
        CfModel<float> model(static_cast<Eigen::Index>(train.users.size()), train.items.size, f, config.embedding_dim, rng);
        for (const auto& rec : train.records) {
            model.known_users[static_cast<std::size_t>(rec.user)] = 1;
            if (train.items.contains(rec.item))
                model.known_items[static_cast<std::size_t>(rec.item)] = 1;
        }
        return model;
    }

    CfFitResult fit_cf(CfModel<float>& model, const data::LogDataset& train, const CfConfig& config)
    {
        if (config.epochs < 1 || config.batch_size < 1)
            throw ConfigError("cf: epochs and batch_size must be positive");
        const ClickExamples ex = click_examples(train);
        if (ex.size() == 0)
            throw DataError("cf: empty training log");
        nn::AdamConfig adam;
        adam.learning_rate = config.learning_rate;
        adam.l2 = config.l2;
        nn::OptimizerState<float> opt(model.params, adam);
        Rng shuffle(derive_seed(config.seed, "cf.shuffle"));
        std::vector<std::size_t> order(ex.size());
        std::iota(order.begin(), order.end(), 0);

        CfFitResult result;
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[uniform_index(shuffle, i)]);
            double sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
                const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - start);
                model.params.zero_grad();
                sum += cf_loss(model, ex, std::span<const std::size_t>(order).subspan(start, len), true);
                opt.step(model.params);
                ++batches;
            }
            result.epoch_loss.push_back(sum / static_cast<double>(batches));
        }
        return result;
    }

    std::optional<double> cf_auc(const CfModel<float>& model, const data::LogDataset& test)
    {
        const ClickExamples ex = click_examples(test);
        const Eigen::VectorXf z = model.logits(ex.users, ex.profiles, ex.items);
        const std::vector<double> scores(z.data(), z.data() + z.size());
        return metrics::auc(scores, ex.labels);
    }

    CfAgent::CfAgent(CfModel<float> model, int k) : _model(std::move(model)), _k(k)
    {
        if (k < 1 || k > _model.item_count())
            throw ConfigError("cf agent: slate size outside the catalog");
    }

    Decision CfAgent::decide(const Observation& obs, bool)
    {
        const UserId user = obs.profile.user_id;
        const Eigen::RowVectorXf u = _model.user_vectors(std::span<const UserId>(&user, 1), obs.profile.dense_features.transpose()).row(0);
        const auto& table = _model.params.value(_model.item_table);
        const auto& bias = _model.params.value(_model.item_bias);
        const Eigen::Index n = _model.item_count();
        Eigen::VectorXf scores(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index row = _model.item_row(static_cast<ItemId>(i));
            scores[i] = table.row(row).dot(u) + bias(row, 0);
        }
        std::vector<ItemId> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + _k, order.end(),
            [&](ItemId a, ItemId b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
        order.resize(static_cast<std::size_t>(_k));
        Decision d;
        d.slate.items = std::move(order);
        return d;
    }

} // namespace slatesim::agents
