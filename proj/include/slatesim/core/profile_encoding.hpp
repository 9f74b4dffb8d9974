#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace slatesim {

    /// One raw profile field. Categorical fields become a one-hot segment over `levels`;
    /// values outside `levels` map to an all-zero segment. Numeric fields are copied.
    struct ProfileField {
        enum class Kind { categorical, numeric };

        std::string name;
        Kind kind = Kind::categorical;
        std::vector<std::string> levels;

        Eigen::Index width() const { return kind == Kind::categorical ? static_cast<Eigen::Index>(levels.size()) : 1; }
    };

    struct ProfileSchema {
        std::vector<ProfileField> fields;

        Eigen::Index encoded_dim() const;
    };

    /// Encodes one raw record (one string per field, in schema order). Throws DataError on a
    /// field-count mismatch or an unparsable numeric value.
    Eigen::VectorXf encode_profile(const std::vector<std::string>& raw_fields, const ProfileSchema& schema);

} // namespace slatesim
