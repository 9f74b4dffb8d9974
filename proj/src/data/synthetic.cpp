#include <slatesim/core/error.hpp>
#include <slatesim/core/geometric.hpp>
#include <slatesim/data/synthetic.hpp>

#include <cmath>
#include <numeric>

namespace slatesim::data {

    namespace {

        double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

        // Per-behavior response curves: the first positive behavior is the most frequent,
        // later ones progressively rarer; the negative behavior is rare and anti-aligned.
        void behavior_curves(const BehaviorSchema& schema, Eigen::VectorXd& slope, Eigen::VectorXd& offset)
        {
            const int b = schema.size();
            slope.resize(b);
            offset.resize(b);
            int positive_rank = 0;
            for (int i = 0; i < b; ++i) {
                if (schema.weight(i) < 0.0) {
                    slope[i] = -2.0;
                    offset[i] = -4.0;
                }
                else {
                    slope[i] = positive_rank == 0 ? 4.0 : 3.0;
                    offset[i] = positive_rank == 0 ? 0.0 : -0.75 - 0.75 * positive_rank;
                    ++positive_rank;
                }
            }
        }

    } // namespace

    double SyntheticGroundTruth::behavior_probability(UserId user, ItemId item, int behavior) const
    {
        const double score = user_latent.row(user).dot(item_latent.row(item));
        return logistic(slope[behavior] * score + offset[behavior]);
    }

    BehaviorBits sample_behaviors(const SyntheticGroundTruth& truth, UserId user, ItemId item, Rng& rng)
    {
        BehaviorBits bits = 0;
        for (int b = 0; b < truth.slope.size(); ++b)
            if (uniform01(rng) < truth.behavior_probability(user, item, b))
                bits |= BehaviorBits{1} << b;
        return bits;
    }

    SyntheticLog synth_generate(const SyntheticConfig& config)
    {
        if (config.users < 1 || config.items < 1 || config.days < 1 || config.latent_dim < 1 || config.max_requests_per_session < 1
            || config.exposures_per_request < 1 || config.exposures_per_request > config.items || config.max_return_day < 1)
            throw DataError("invalid synthetic log sizes");
        if (!(config.p_ret_min > 0.0 && config.p_ret_min <= config.p_ret_max && config.p_ret_max <= 1.0))
            throw DataError("invalid synthetic return probability range");

        Rng latent_rng(derive_seed(config.seed, "synth.latent"));
        Rng profile_rng(derive_seed(config.seed, "synth.profile"));
        Rng timeline_rng(derive_seed(config.seed, "synth.timeline"));
        Rng behavior_rng(derive_seed(config.seed, "synth.behavior"));

        SyntheticLog out;
        auto& truth = out.truth;
        const double latent_std = std::pow(static_cast<double>(config.latent_dim), -0.25);
        auto draw_latent = [&](int rows) {
            Eigen::MatrixXd m(rows, config.latent_dim);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < config.latent_dim; ++j)
                    m(i, j) = standard_normal(latent_rng) * latent_std;
            return m;
        };
        truth.user_latent = draw_latent(config.users);
        truth.item_latent = draw_latent(config.items);
        behavior_curves(config.schema, truth.slope, truth.offset);
        truth.p_ret.resize(config.users);
        for (int u = 0; u < config.users; ++u)
            truth.p_ret[u] = config.p_ret_min + (config.p_ret_max - config.p_ret_min) * uniform01(latent_rng);

        auto& data = out.dataset;
        data.schema = config.schema;
        for (int u = 0; u < config.users; ++u) {
            Eigen::VectorXf features(config.latent_dim);
            for (int j = 0; j < config.latent_dim; ++j)
                features[j] = static_cast<float>(truth.user_latent(u, j) + config.profile_noise * standard_normal(profile_rng));
            data.users.push_back({u, std::move(features)});
            data.user_original_ids.push_back(u);
        }
        data.items.size = config.items;
        data.items.features = truth.item_latent.cast<float>();
        data.item_original_ids.resize(static_cast<std::size_t>(config.items));
        std::iota(data.item_original_ids.begin(), data.item_original_ids.end(), 0);

        std::vector<ItemId> pool(static_cast<std::size_t>(config.items));
        std::iota(pool.begin(), pool.end(), 0);
        constexpr std::int64_t day_ms = 86'400'000;
        for (int u = 0; u < config.users; ++u) {
            int day = 0;
            while (day < config.days) {
                const int requests = 1 + static_cast<int>(uniform_index(timeline_rng, static_cast<std::size_t>(config.max_requests_per_session)));
                for (int r = 0; r < requests; ++r) {
                    // Partial Fisher-Yates over the item pool gives distinct exposures.
                    for (int k = 0; k < config.exposures_per_request; ++k) {
                        const std::size_t j = static_cast<std::size_t>(k)
                            + uniform_index(timeline_rng, pool.size() - static_cast<std::size_t>(k));
                        std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
                    }
                    const std::int64_t request_time = day * day_ms + 9LL * 3'600'000 + r * 1'800'000LL;
                    for (int k = 0; k < config.exposures_per_request; ++k) {
                        const ItemId item = pool[static_cast<std::size_t>(k)];
                        data.records.push_back({u, item, request_time + k * 1000LL, day, sample_behaviors(truth, u, item, behavior_rng)});
                    }
                }
                day += sample_truncated_geometric(truth.p_ret[u], config.max_return_day, timeline_rng);
            }
        }
        out.dataset = segment_sessions(std::move(out.dataset));
        return out;
    }

} // namespace slatesim::data
