#pragma once

#include <slatesim/agents/agent.hpp>
#include <slatesim/data/dataset.hpp>
#include <slatesim/nn/layers.hpp>

#include <optional>
#include <span>

namespace slatesim::agents {

    using nn::Matrix;
    using nn::Vector;

    /// Two-tower click model. User tower: id embedding plus DNN(profile); item tower: id embedding
    /// plus a scalar bias. Ids unseen in training share one default row per tower.
    template <typename Scalar>
    struct CfModel {
        nn::ParamStore<Scalar> params;
        nn::ParamId user_table, item_table, item_bias;
        nn::Mlp profile_tower;
        std::vector<std::uint8_t> known_users;
        std::vector<std::uint8_t> known_items;

        struct Cache {
            std::vector<Eigen::Index> user_rows;
            std::vector<Eigen::Index> item_rows;
            nn::MlpCache<Scalar> tower;
            Matrix<Scalar> users; // n x d
            Matrix<Scalar> items; // n x d
        };

        CfModel() = default;
        CfModel(Eigen::Index users, Eigen::Index items, Eigen::Index profile_dim, Eigen::Index dim, Rng& rng)
            : known_users(static_cast<std::size_t>(users), 0), known_items(static_cast<std::size_t>(items), 0)
        {
            user_table = params.add("cf.user_table", nn::normal_embedding<Scalar>(users + 1, dim, rng));
            item_table = params.add("cf.item_table", nn::normal_embedding<Scalar>(items + 1, dim, rng));
            item_bias = params.add("cf.item_bias", Matrix<Scalar>::Zero(items + 1, 1));
            profile_tower = nn::make_mlp(params, "cf.profile", profile_dim, 2 * dim, dim, rng);
        }

        template <typename Other>
        CfModel<Other> cast() const
        {
            CfModel<Other> out;
            out.params = params.template cast<Other>();
            out.user_table = user_table;
            out.item_table = item_table;
            out.item_bias = item_bias;
            out.profile_tower = profile_tower;
            out.known_users = known_users;
            out.known_items = known_items;
            return out;
        }

        Eigen::Index user_count() const { return static_cast<Eigen::Index>(known_users.size()); }
        Eigen::Index item_count() const { return static_cast<Eigen::Index>(known_items.size()); }

        Eigen::Index user_row(UserId u) const
        {
            return u >= 0 && u < user_count() && known_users[static_cast<std::size_t>(u)] ? u : user_count();
        }
        Eigen::Index item_row(ItemId i) const
        {
            return i >= 0 && i < item_count() && known_items[static_cast<std::size_t>(i)] ? i : item_count();
        }

        /// User-tower output for each row of `profiles`.
        Matrix<Scalar> user_vectors(std::span<const UserId> users, const Matrix<Scalar>& profiles, Cache* cache = nullptr) const
        {
            Matrix<Scalar> out = nn::forward(params, profile_tower, profiles, {}, cache ? &cache->tower : nullptr);
            const auto& table = params.value(user_table);
            for (Eigen::Index r = 0; r < out.rows(); ++r) {
                const Eigen::Index row = user_row(users[static_cast<std::size_t>(r)]);
                out.row(r) += table.row(row);
                if (cache)
                    cache->user_rows.push_back(row);
            }
            return out;
        }

        /// Click logits for (users[n], profiles.row(n), items[n]).
        Vector<Scalar> logits(std::span<const UserId> users, const Matrix<Scalar>& profiles, std::span<const ItemId> items,
            Cache* cache = nullptr) const
        {
            if (users.size() != items.size() || static_cast<Eigen::Index>(users.size()) != profiles.rows())
                throw ShapeError("cf: batch arrays differ in length");
            const Matrix<Scalar> u = user_vectors(users, profiles, cache);
            Matrix<Scalar> e(u.rows(), u.cols());
            Vector<Scalar> out(u.rows());
            const auto& table = params.value(item_table);
            const auto& bias = params.value(item_bias);
            for (Eigen::Index r = 0; r < u.rows(); ++r) {
                const Eigen::Index row = item_row(items[static_cast<std::size_t>(r)]);
                e.row(r) = table.row(row);
                out[r] = u.row(r).dot(e.row(r)) + bias(row, 0);
                if (cache)
                    cache->item_rows.push_back(row);
            }
            if (cache) {
                cache->users = u;
                cache->items = e;
            }
            return out;
        }

        void backward(const Cache& cache, const Vector<Scalar>& d_logits)
        {
            const Matrix<Scalar> d_u = cache.items.array().colwise() * d_logits.array();
            const Matrix<Scalar> d_e = cache.users.array().colwise() * d_logits.array();
            auto& g_user = params.grad(user_table);
            auto& g_item = params.grad(item_table);
            auto& g_bias = params.grad(item_bias);
            for (Eigen::Index r = 0; r < d_logits.size(); ++r) {
                g_user.row(cache.user_rows[static_cast<std::size_t>(r)]) += d_u.row(r);
                g_item.row(cache.item_rows[static_cast<std::size_t>(r)]) += d_e.row(r);
                g_bias(cache.item_rows[static_cast<std::size_t>(r)], 0) += d_logits[r];
            }
            nn::backward(params, profile_tower, cache.tower, d_u);
        }
    };

    struct ClickExamples {
        std::vector<UserId> users;
        Eigen::MatrixXf profiles;
        std::vector<ItemId> items;
        std::vector<std::uint8_t> labels;

        std::size_t size() const { return users.size(); }
    };

    /// Click bit of the first behavior in the schema named "click" or "is_click", else behavior 0.
    int click_behavior(const BehaviorSchema& schema);
    ClickExamples click_examples(const data::LogDataset& data);

    /// Mean softplus BCE on logits over the rows listed in `rows`.
    template <typename Scalar>
    double cf_loss(CfModel<Scalar>& model, const ClickExamples& ex, std::span<const std::size_t> rows, bool with_grad)
    {
        const auto n = static_cast<Eigen::Index>(rows.size());
        std::vector<UserId> users(rows.size());
        std::vector<ItemId> items(rows.size());
        Matrix<Scalar> profiles(n, ex.profiles.cols());
        Vector<Scalar> y(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const std::size_t i = rows[static_cast<std::size_t>(r)];
            users[static_cast<std::size_t>(r)] = ex.users[i];
            items[static_cast<std::size_t>(r)] = ex.items[i];
            profiles.row(r) = ex.profiles.row(static_cast<Eigen::Index>(i)).template cast<Scalar>();
            y[r] = static_cast<Scalar>(ex.labels[i]);
        }
        typename CfModel<Scalar>::Cache cache;
        const Vector<Scalar> z = model.logits(users, profiles, items, with_grad ? &cache : nullptr);
        double total = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            const double zr = static_cast<double>(z[r]);
            total += std::max(zr, 0.0) - zr * static_cast<double>(y[r]) + std::log1p(std::exp(-std::abs(zr)));
        }
        if (with_grad)
            model.backward(cache, (nn::sigmoid(z) - y) / static_cast<Scalar>(n));
        return total / static_cast<double>(n);
    }

    struct CfConfig {
        int embedding_dim = 16;
        int epochs = 10;
        int batch_size = 64;
        double learning_rate = 5e-4;
        double l2 = 1e-5;
        std::uint64_t seed = 1;
    };

    struct CfFitResult {
        std::vector<double> epoch_loss;
    };

    /// Marks the ids present in `train` as known, then fits with Adam on shuffled mini-batches.
    CfModel<float> make_cf_model(const data::LogDataset& train, const CfConfig& config);
    CfFitResult fit_cf(CfModel<float>& model, const data::LogDataset& train, const CfConfig& config);
    std::optional<double> cf_auc(const CfModel<float>& model, const data::LogDataset& test);

    /// Recommends the k items with the highest predicted click logit.
    class CfAgent final : public Agent {
    public:
        CfAgent(CfModel<float> model, int k);
        std::string name() const override { return "cf"; }
        Decision decide(const Observation& obs, bool explore) override;
        std::vector<nn::NamedStore> stores() const override { return {{"cf/", &_model.params}}; }
        std::vector<std::pair<std::string, nn::ParamStore<float>*>> mutable_stores() override { return {{"cf/", &_model.params}}; }
        const CfModel<float>& model() const { return _model; }

    private:
        CfModel<float> _model;
        int _k;
    };

} // namespace slatesim::agents
