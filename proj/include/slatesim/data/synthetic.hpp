#pragma once

#include <slatesim/core/rng.hpp>
#include <slatesim/data/dataset.hpp>

#include <Eigen/Core>

namespace slatesim::data {

    struct SyntheticConfig {
        int users = 200;
        int items = 100;
        int days = 30;
        std::uint64_t seed = 1;

        int latent_dim = 8;
        int max_requests_per_session = 2;
        int exposures_per_request = 5;
        /// Per-user next-day return probability is uniform in [p_ret_min, p_ret_max].
        double p_ret_min = 0.3;
        double p_ret_max = 0.9;
        int max_return_day = 10;
        /// Std-dev of the noise added to the latent preference to form the profile.
        double profile_noise = 0.1;
        BehaviorSchema schema = BehaviorSchema::kuairand();
    };

    /// Ground truth behind a synthetic log: behavior b of (u, i) fires with probability
    /// sigmoid(slope[b] * <user_latent[u], item_latent[i]> + offset[b]).
    struct SyntheticGroundTruth {
        Eigen::MatrixXd user_latent; // users x latent_dim
        Eigen::MatrixXd item_latent; // items x latent_dim
        Eigen::VectorXd slope; // per behavior
        Eigen::VectorXd offset; // per behavior
        Eigen::VectorXd p_ret; // per user

        double behavior_probability(UserId user, ItemId item, int behavior) const;
    };

    /// Independent Bernoulli draw for every behavior of (user, item).
    BehaviorBits sample_behaviors(const SyntheticGroundTruth& truth, UserId user, ItemId item, Rng& rng);

    struct SyntheticLog {
        LogDataset dataset; // segmented
        SyntheticGroundTruth truth;
    };

    /// Seed-deterministic synthetic log. Users are active on day 0 and return after gaps drawn
    /// geometric(p_ret) clamped to max_return_day until `days` is reached. Each session has
    /// 1..max_requests_per_session requests of exposures_per_request distinct random items.
    /// Profiles are the user latent plus Gaussian noise; catalog features are the item latents.
    SyntheticLog synth_generate(const SyntheticConfig& config);

} // namespace slatesim::data
