#pragma once

#include <slatesim/core/types.hpp>

#include <optional>
#include <string>

namespace slatesim {

    enum class SlateViolationKind {
        wrong_length,
        unknown_item,
        duplicate_item,
    };

    struct SlateViolation {
        SlateViolationKind kind;
        std::string message;
    };

    /// Checks length == slate_size, catalog membership and uniqueness, in that order.
    /// Returns the first violation, or nothing when the slate is well formed.
    std::optional<SlateViolation> validate_slate(const SlateAction& slate, const ItemCatalog& catalog, std::size_t slate_size);

    /// Same check, but throws EnvironmentError with the violation message.
    void require_valid_slate(const SlateAction& slate, const ItemCatalog& catalog, std::size_t slate_size);

    /// Returns true iff (leave = 0 and return_day = 0) or (leave = 1 and 1 <= return_day <= max_return_day).
    bool feedback_consistent(const FeedbackBundle& fb, int max_return_day);

} // namespace slatesim
