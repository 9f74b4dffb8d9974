#pragma once

#include <slatesim/nn/layers.hpp>

#include <algorithm>
#include <cmath>

namespace slatesim::nn {

    inline constexpr double kProbabilityEpsilon = 1e-7;

    template <typename Scalar>
    struct BceResult {
        Scalar loss = 0;
        Matrix<Scalar> grad; // d loss / d pred, same shape as pred
    };

    /// Mean binary cross-entropy over all cells. Predictions are clamped to [eps, 1 - eps];
    /// cells that hit the clamp get zero gradient.
    template <typename Scalar>
    BceResult<Scalar> bce_loss(const Matrix<Scalar>& pred, const Matrix<Scalar>& label)
    {
        if (pred.size() == 0)
            throw ShapeError("bce_loss: empty batch");
        if (pred.rows() != label.rows() || pred.cols() != label.cols())
            throw ShapeError("bce_loss: prediction/label shape mismatch");

        const auto eps = static_cast<Scalar>(kProbabilityEpsilon);
        const auto count = static_cast<Scalar>(pred.size());
        BceResult<Scalar> out;
        out.grad.resize(pred.rows(), pred.cols());
        double total = 0.0;
        for (Eigen::Index j = 0; j < pred.cols(); ++j) {
            for (Eigen::Index i = 0; i < pred.rows(); ++i) {
                const Scalar raw = pred(i, j);
                const Scalar p = std::clamp(raw, eps, Scalar(1) - eps);
                const Scalar y = label(i, j);
                total += -static_cast<double>(y * std::log(p) + (Scalar(1) - y) * std::log(Scalar(1) - p));
                const bool clamped = raw < eps || raw > Scalar(1) - eps;
                out.grad(i, j) = clamped ? Scalar(0) : (-y / p + (Scalar(1) - y) / (Scalar(1) - p)) / count;
            }
        }
        out.loss = static_cast<Scalar>(total / static_cast<double>(pred.size()));
        return out;
    }

    /// BCE on sigmoid(logits); the returned gradient is with respect to the logits.
    template <typename Scalar>
    BceResult<Scalar> bce_with_logits(const Matrix<Scalar>& logits, const Matrix<Scalar>& label)
    {
        Matrix<Scalar> prob = sigmoid(logits);
        BceResult<Scalar> out = bce_loss<Scalar>(prob, label);
        out.grad.array() *= prob.array() * (Scalar(1) - prob.array());
        return out;
    }

} // namespace slatesim::nn
