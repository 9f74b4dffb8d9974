#pragma once

#include <slatesim/nn/param_store.hpp>

#include <concepts>
#include <string>

namespace slatesim::nn {

    /// y = x W + c, row-wise. Pure; shapes are checked.
    template <typename Scalar>
    Matrix<Scalar> affine_map(const Matrix<Scalar>& weight, const RowVector<Scalar>& bias, const Matrix<Scalar>& x)
    {
        if (x.cols() != weight.rows() || bias.size() != weight.cols())
            throw ShapeError("affine_map: x is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + ", W is "
                + std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()));
        Matrix<Scalar> y = x * weight;
        y.rowwise() += bias;
        return y;
    }

    /// Controls dropout. Inactive (identity) unless `training` and an rng is supplied.
    struct ForwardMode {
        bool training = false;
        double dropout = 0.0;
        Rng* rng = nullptr;

        bool dropout_active() const { return training && dropout > 0.0 && rng != nullptr; }

        static ForwardMode eval() { return {}; }
        static ForwardMode train(double rate, Rng& rng) { return {true, rate, &rng}; }
    };

    /// Inverted dropout. Returns the mask (0 or 1/(1-rate)); empty when inactive.
    template <typename Scalar>
    Matrix<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, const ForwardMode& mode)
    {
        if (!mode.dropout_active())
            return {};
        const auto keep = static_cast<Scalar>(1.0 / (1.0 - mode.dropout));
        Matrix<Scalar> mask(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                mask(i, j) = uniform01(*mode.rng) < mode.dropout ? Scalar(0) : keep;
        return mask;
    }

    template <typename Scalar>
    void apply_mask(Matrix<Scalar>& x, const Matrix<Scalar>& mask)
    {
        if (mask.size() != 0)
            x.array() *= mask.array();
    }

    struct Dense {
        ParamId weight;
        ParamId bias;
        Eigen::Index in = 0;
        Eigen::Index out = 0;
    };

    template <typename Scalar>
    Dense make_dense(ParamStore<Scalar>& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
    {
        Dense layer;
        layer.in = in;
        layer.out = out;
        layer.weight = store.add(name + ".weight", xavier_uniform<Scalar>(in, out, rng));
        layer.bias = store.add(name + ".bias", Matrix<Scalar>::Zero(1, out));
        return layer;
    }

    template <typename Scalar>
    Matrix<Scalar> forward(const ParamStore<Scalar>& store, const Dense& layer, const Matrix<Scalar>& x)
    {
        return affine_map<Scalar>(store.value(layer.weight), store.value(layer.bias), x);
    }

    /// Accumulates dW, dc into the store and returns dx.
    template <typename Scalar>
    Matrix<Scalar> backward(ParamStore<Scalar>& store, const Dense& layer, const Matrix<Scalar>& x, const Matrix<Scalar>& dy)
    {
        store.grad(layer.weight).noalias() += x.transpose() * dy;
        store.grad(layer.bias) += dy.colwise().sum();
        return dy * store.value(layer.weight).transpose();
    }

    template <std::floating_point Scalar>
    Scalar sigmoid(Scalar z)
    {
        if (z >= Scalar(0)) {
            const Scalar e = std::exp(-z);
            return Scalar(1) / (Scalar(1) + e);
        }
        const Scalar e = std::exp(z);
        return e / (Scalar(1) + e);
    }

    template <typename Derived>
    auto sigmoid(const Eigen::MatrixBase<Derived>& z)
    {
        using Scalar = typename Derived::Scalar;
        return z.unaryExpr([](Scalar v) { return sigmoid(v); }).eval();
    }

    /// Two-layer DNN: in -> hidden (ReLU, dropout) -> out (linear).
    struct Mlp {
        Dense hidden;
        Dense output;
    };

    template <typename Scalar>
    Mlp make_mlp(ParamStore<Scalar>& store, const std::string& name, Eigen::Index in, Eigen::Index hidden, Eigen::Index out, Rng& rng)
    {
        Mlp mlp;
        mlp.hidden = make_dense(store, name + ".hidden", in, hidden, rng);
        mlp.output = make_dense(store, name + ".output", hidden, out, rng);
        return mlp;
    }

    template <typename Scalar>
    struct MlpCache {
        Matrix<Scalar> input;
        Matrix<Scalar> pre; // hidden pre-activation
        Matrix<Scalar> mask; // dropout mask, empty in eval
        Matrix<Scalar> hidden; // post ReLU and dropout
    };

    template <typename Scalar>
    Matrix<Scalar> forward(const ParamStore<Scalar>& store, const Mlp& mlp, const Matrix<Scalar>& x, const ForwardMode& mode = {},
        MlpCache<Scalar>* cache = nullptr)
    {
        Matrix<Scalar> pre = forward(store, mlp.hidden, x);
        Matrix<Scalar> hidden = pre.cwiseMax(Scalar(0));
        Matrix<Scalar> mask = dropout_mask<Scalar>(hidden.rows(), hidden.cols(), mode);
        apply_mask(hidden, mask);
        Matrix<Scalar> y = forward(store, mlp.output, hidden);
        if (cache) {
            cache->input = x;
            cache->pre = std::move(pre);
            cache->mask = std::move(mask);
            cache->hidden = std::move(hidden);
        }
        return y;
    }

    template <typename Scalar>
    Matrix<Scalar> backward(ParamStore<Scalar>& store, const Mlp& mlp, const MlpCache<Scalar>& cache, const Matrix<Scalar>& dy)
    {
        Matrix<Scalar> dh = backward(store, mlp.output, cache.hidden, dy);
        apply_mask(dh, cache.mask);
        dh.array() *= (cache.pre.array() > Scalar(0)).template cast<Scalar>();
        return backward(store, mlp.hidden, cache.input, dh);
    }

} // namespace slatesim::nn
