#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace slatesim {

    using UserId = std::int32_t;
    using ItemId = std::int32_t;

    /// One bit per behavior, bit i set when behavior i of the schema fired.
    using BehaviorBits = std::uint32_t;

    /// b x K immediate feedback matrix.
    using BitMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

    inline constexpr ItemId kPaddingItem = -1;
    inline constexpr int kMaxBehaviors = 32;

    struct UserProfile {
        UserId user_id = 0;
        Eigen::VectorXf dense_features;

        Eigen::Index feature_dim() const { return dense_features.size(); }
        bool operator==(const UserProfile& other) const
        {
            return user_id == other.user_id && dense_features.size() == other.dense_features.size()
                && dense_features == other.dense_features;
        }
    };

    /// Items are re-indexed to 0..size-1; row i of `features` belongs to item i.
    struct ItemCatalog {
        std::int32_t size = 0;
        Eigen::MatrixXf features;

        Eigen::Index embedding_dim() const { return features.cols(); }
        bool contains(ItemId id) const { return id >= 0 && id < size; }
        bool operator==(const ItemCatalog& other) const
        {
            return size == other.size && features.rows() == other.features.rows() && features.cols() == other.features.cols()
                && features == other.features;
        }
    };

    struct InteractionRecord {
        UserId user = 0;
        ItemId item = 0;
        std::int64_t timestamp = 0; // ms since epoch
        std::int32_t date = 0; // day key
        BehaviorBits behaviors = 0;

        bool operator==(const InteractionRecord&) const = default;
    };

    /// Ordered behavior signals with their reward weights. At most one weight is negative.
    class BehaviorSchema {
    public:
        BehaviorSchema() = default;
        BehaviorSchema(std::vector<std::string> names, std::vector<double> weights);

        /// click, long_view, like, comment, follow, forward, hate with weights 1 and -1 for hate.
        static BehaviorSchema kuairand();
        /// like, hate (ratings > 3 map to like).
        static BehaviorSchema movielens();

        int size() const { return static_cast<int>(names_.size()); }
        const std::vector<std::string>& names() const { return names_; }
        const std::vector<double>& weights() const { return weights_; }
        double weight(int behavior) const { return weights_[static_cast<std::size_t>(behavior)]; }

        std::optional<int> index_of(const std::string& name) const;
        /// Index of the negative-weight behavior, if the schema has one.
        std::optional<int> negative_index() const { return negative_; }

        /// Largest and smallest per-item reward.
        double max_item_reward() const;
        double min_item_reward() const;

        bool operator==(const BehaviorSchema&) const = default;

    private:
        std::vector<std::string> names_;
        std::vector<double> weights_;
        std::optional<int> negative_;
    };

    inline bool has_behavior(BehaviorBits bits, int behavior) { return (bits >> behavior) & 1U; }

    /// Profile plus the most recent H interactions, right-aligned: slot H-1 is the newest.
    struct Observation {
        UserProfile profile;
        std::vector<ItemId> history_items; // length H
        std::vector<BehaviorBits> history_feedback; // length H
        std::size_t history_len = 0;

        std::size_t capacity() const { return history_items.size(); }
        bool is_padding(std::size_t slot) const { return slot < capacity() - history_len; }
        std::size_t first_filled() const { return capacity() - history_len; }

        static Observation empty(UserProfile profile, std::size_t capacity);
        /// Appends one interaction, dropping the oldest when full.
        void push(ItemId item, BehaviorBits feedback);
    };

    struct SlateAction {
        std::vector<ItemId> items;

        std::size_t size() const { return items.size(); }
        bool operator==(const SlateAction&) const = default;
    };

    struct FeedbackBundle {
        BitMatrix immediate; // b x K
        bool leave = false;
        int return_day = 0;
        double reward = 0.0; // normalized
        double raw_reward = 0.0;
    };

} // namespace slatesim
