#pragma once

#include <slatesim/core/error.hpp>
#include <slatesim/core/rng.hpp>

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace slatesim::nn {

    template <typename Scalar>
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    template <typename Scalar>
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    template <typename Scalar>
    using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

    /// Handle into a ParamStore. Stays valid across copies and scalar casts of the store.
    struct ParamId {
        std::size_t index = static_cast<std::size_t>(-1);
    };

    /// Named trainable tensors with gradient accumulators of identical shape.
    template <typename Scalar>
    class ParamStore {
    public:
        using scalar_t = Scalar;
        using matrix_t = Matrix<Scalar>;

        struct Entry {
            std::string name;
            matrix_t value;
            matrix_t grad;
        };

        ParamId add(std::string name, matrix_t init)
        {
            for (const auto& e : _entries)
                if (e.name == name)
                    throw ShapeError("duplicate parameter name '" + name + "'");
            matrix_t grad = matrix_t::Zero(init.rows(), init.cols());
            _entries.push_back({std::move(name), std::move(init), std::move(grad)});
            return {_entries.size() - 1};
        }

        matrix_t& value(ParamId id) { return _entries[id.index].value; }
        const matrix_t& value(ParamId id) const { return _entries[id.index].value; }
        matrix_t& grad(ParamId id) { return _entries[id.index].grad; }
        const matrix_t& grad(ParamId id) const { return _entries[id.index].grad; }

        std::vector<Entry>& entries() { return _entries; }
        const std::vector<Entry>& entries() const { return _entries; }
        std::size_t size() const { return _entries.size(); }

        Eigen::Index scalar_count() const
        {
            Eigen::Index n = 0;
            for (const auto& e : _entries)
                n += e.value.size();
            return n;
        }

        void zero_grad()
        {
            for (auto& e : _entries)
                e.grad.setZero();
        }

        bool all_finite() const
        {
            for (const auto& e : _entries)
                if (!e.value.allFinite())
                    return false;
            return true;
        }

        bool grads_finite() const
        {
            for (const auto& e : _entries)
                if (!e.grad.allFinite())
                    return false;
            return true;
        }

        std::optional<ParamId> find(const std::string& name) const
        {
            for (std::size_t i = 0; i < _entries.size(); ++i)
                if (_entries[i].name == name)
                    return ParamId{i};
            return std::nullopt;
        }

        template <typename Other>
        ParamStore<Other> cast() const
        {
            ParamStore<Other> out;
            for (const auto& e : _entries)
                out.add(e.name, e.value.template cast<Other>());
            return out;
        }

        /// Copies values from a store with the same layout.
        template <typename Other>
        void assign_values(const ParamStore<Other>& other)
        {
            if (other.size() != size())
                throw ShapeError("parameter layouts differ");
            for (std::size_t i = 0; i < _entries.size(); ++i) {
                const auto& src = other.entries()[i].value;
                if (src.rows() != _entries[i].value.rows() || src.cols() != _entries[i].value.cols())
                    throw ShapeError("shape mismatch for '" + _entries[i].name + "'");
                _entries[i].value = src.template cast<Scalar>();
            }
        }

        bool operator==(const ParamStore& other) const
        {
            if (size() != other.size())
                return false;
            for (std::size_t i = 0; i < size(); ++i)
                if (_entries[i].name != other._entries[i].name || _entries[i].value != other._entries[i].value)
                    return false;
            return true;
        }

    private:
        std::vector<Entry> _entries;
    };

    /// target <- tau * online + (1 - tau) * target, tensor by tensor.
    template <typename Scalar>
    void soft_update(ParamStore<Scalar>& target, const ParamStore<Scalar>& online, double tau)
    {
        if (!(tau > 0.0 && tau <= 1.0))
            throw ShapeError("soft update rate must lie in (0, 1]");
        if (target.size() != online.size())
            throw ShapeError("parameter layouts differ");
        const auto t = static_cast<Scalar>(tau);
        for (std::size_t i = 0; i < target.size(); ++i) {
            auto& dst = target.entries()[i].value;
            dst = t * online.entries()[i].value + (Scalar(1) - t) * dst;
        }
    }

    // Initializers.

    template <typename Scalar>
    Matrix<Scalar> xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng)
    {
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Matrix<Scalar> m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                m(i, j) = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * bound);
        return m;
    }

    template <typename Scalar>
    Matrix<Scalar> normal_embedding(Eigen::Index rows, Eigen::Index cols, Rng& rng)
    {
        const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
        Matrix<Scalar> m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                m(i, j) = static_cast<Scalar>(standard_normal(rng) * scale);
        return m;
    }

} // namespace slatesim::nn
