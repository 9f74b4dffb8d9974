#pragma once

#include <Eigen/Core>

#include <cmath>

namespace slatesim {

    /// Cosine of two vectors; a zero-norm argument counts as orthogonal to everything.
    template <typename DerivedA, typename DerivedB>
    double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
    {
        const auto da = a.template cast<double>();
        const auto db = b.template cast<double>();
        const double na = da.norm();
        const double nb = db.norm();
        if (na == 0.0 || nb == 0.0)
            return 0.0;
        return da.dot(db) / (na * nb);
    }

} // namespace slatesim
