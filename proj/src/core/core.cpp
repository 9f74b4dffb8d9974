#include <slatesim/core/error.hpp>
#include <slatesim/core/profile_encoding.hpp>
#include <slatesim/core/types.hpp>
#include <slatesim/core/validate.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_set>

namespace slatesim {

    BehaviorSchema::BehaviorSchema(std::vector<std::string> names, std::vector<double> weights)
        : names_(std::move(names)), weights_(std::move(weights))
    {
        if (names_.empty() || names_.size() != weights_.size())
            throw ConfigError("behavior schema needs one weight per behavior name");
        if (names_.size() > static_cast<std::size_t>(kMaxBehaviors))
            throw ConfigError("behavior schema supports at most 32 behaviors");
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            if (!std::isfinite(weights_[i]))
                throw ConfigError("behavior weight for '" + names_[i] + "' is not finite");
            if (weights_[i] < 0.0) {
                if (negative_)
                    throw ConfigError("at most one behavior may carry a negative weight");
                negative_ = static_cast<int>(i);
            }
        }
    }

    BehaviorSchema BehaviorSchema::kuairand()
    {
        return BehaviorSchema({"click", "long_view", "like", "comment", "follow", "forward", "hate"},
            {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0});
    }

    BehaviorSchema BehaviorSchema::movielens()
    {
        return BehaviorSchema({"like", "hate"}, {1.0, -1.0});
    }

    std::optional<int> BehaviorSchema::index_of(const std::string& name) const
    {
        auto it = std::find(names_.begin(), names_.end(), name);
        if (it == names_.end())
            return std::nullopt;
        return static_cast<int>(it - names_.begin());
    }

    double BehaviorSchema::max_item_reward() const
    {
        double total = 0.0;
        for (double w : weights_)
            total += std::max(w, 0.0);
        return total;
    }

    double BehaviorSchema::min_item_reward() const
    {
        double total = 0.0;
        for (double w : weights_)
            total += std::min(w, 0.0);
        return total;
    }

    Observation Observation::empty(UserProfile profile, std::size_t capacity)
    {
        Observation obs;
        obs.profile = std::move(profile);
        obs.history_items.assign(capacity, kPaddingItem);
        obs.history_feedback.assign(capacity, 0);
        obs.history_len = 0;
        return obs;
    }

    void Observation::push(ItemId item, BehaviorBits feedback)
    {
        const std::size_t cap = capacity();
        if (cap == 0)
            return;
        std::rotate(history_items.begin(), history_items.begin() + 1, history_items.end());
        std::rotate(history_feedback.begin(), history_feedback.begin() + 1, history_feedback.end());
        history_items[cap - 1] = item;
        history_feedback[cap - 1] = feedback;
        history_len = std::min(history_len + 1, cap);
    }

    std::optional<SlateViolation> validate_slate(const SlateAction& slate, const ItemCatalog& catalog, std::size_t slate_size)
    {
        if (slate.items.size() != slate_size)
            return SlateViolation{SlateViolationKind::wrong_length,
                "wrong length: expected " + std::to_string(slate_size) + ", got " + std::to_string(slate.items.size())};
        for (ItemId id : slate.items)
            if (!catalog.contains(id))
                return SlateViolation{SlateViolationKind::unknown_item, "unknown item " + std::to_string(id)};
        std::unordered_set<ItemId> seen;
        for (ItemId id : slate.items)
            if (!seen.insert(id).second)
                return SlateViolation{SlateViolationKind::duplicate_item, "duplicate item " + std::to_string(id)};
        return std::nullopt;
    }

    void require_valid_slate(const SlateAction& slate, const ItemCatalog& catalog, std::size_t slate_size)
    {
        if (auto violation = validate_slate(slate, catalog, slate_size))
            throw EnvironmentError("invalid slate: " + violation->message);
    }

    bool feedback_consistent(const FeedbackBundle& fb, int max_return_day)
    {
        if (!fb.leave)
            return fb.return_day == 0;
        return fb.return_day >= 1 && fb.return_day <= max_return_day;
    }

    Eigen::Index ProfileSchema::encoded_dim() const
    {
        Eigen::Index dim = 0;
        for (const auto& field : fields)
            dim += field.width();
        return dim;
    }

    Eigen::VectorXf encode_profile(const std::vector<std::string>& raw_fields, const ProfileSchema& schema)
    {
        if (raw_fields.size() != schema.fields.size())
            throw DataError("profile has " + std::to_string(raw_fields.size()) + " fields, schema expects "
                + std::to_string(schema.fields.size()));

        Eigen::VectorXf out = Eigen::VectorXf::Zero(schema.encoded_dim());
        Eigen::Index offset = 0;
        for (std::size_t f = 0; f < schema.fields.size(); ++f) {
            const auto& field = schema.fields[f];
            const std::string& raw = raw_fields[f];
            if (field.kind == ProfileField::Kind::categorical) {
                auto it = std::find(field.levels.begin(), field.levels.end(), raw);
                if (it != field.levels.end())
                    out[offset + (it - field.levels.begin())] = 1.0f;
            }
            else {
                double value = 0.0;
                auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
                if (ec != std::errc() || ptr != raw.data() + raw.size())
                    throw DataError("numeric profile field '" + field.name + "' has value '" + raw + "'");
                out[offset] = static_cast<float>(value);
            }
            offset += field.width();
        }
        return out;
    }

} // namespace slatesim
