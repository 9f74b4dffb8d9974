#pragma once

#include <slatesim/nn/layers.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace slatesim::nn {

    /// Residual multi-head self-attention followed by a residual position-wise FFN (d -> 2d -> d).
    struct AttentionBlock {
        ParamId query;
        ParamId key;
        ParamId value;
        ParamId out;
        Mlp ffn;
    };

    struct AttentionEncoder {
        ParamId positions; // learned, max_len x dim
        std::vector<AttentionBlock> blocks;
        Eigen::Index dim = 0;
        Eigen::Index max_len = 0;
        Eigen::Index heads = 1;
    };

    template <typename Scalar>
    AttentionEncoder make_attention_encoder(ParamStore<Scalar>& store, const std::string& name, Eigen::Index dim, Eigen::Index max_len,
        int layers, int heads, Rng& rng)
    {
        if (heads < 1 || dim % heads != 0)
            throw ShapeError("attention dim must be divisible by the head count");
        AttentionEncoder enc;
        enc.dim = dim;
        enc.max_len = max_len;
        enc.heads = heads;
        enc.positions = store.add(name + ".positions", normal_embedding<Scalar>(max_len, dim, rng));
        for (int l = 0; l < layers; ++l) {
            const std::string prefix = name + ".block" + std::to_string(l);
            AttentionBlock block;
            block.query = store.add(prefix + ".query", xavier_uniform<Scalar>(dim, dim, rng));
            block.key = store.add(prefix + ".key", xavier_uniform<Scalar>(dim, dim, rng));
            block.value = store.add(prefix + ".value", xavier_uniform<Scalar>(dim, dim, rng));
            block.out = store.add(prefix + ".out", xavier_uniform<Scalar>(dim, dim, rng));
            block.ffn = make_mlp(store, prefix + ".ffn", dim, 2 * dim, dim, rng);
            enc.blocks.push_back(block);
        }
        return enc;
    }

    template <typename Scalar>
    struct AttentionBlockCache {
        Matrix<Scalar> input;
        Matrix<Scalar> query;
        Matrix<Scalar> key;
        Matrix<Scalar> value;
        std::vector<Matrix<Scalar>> probs; // per head, n x n
        Matrix<Scalar> concat;
        Matrix<Scalar> attn_mask;
        MlpCache<Scalar> ffn;
        Matrix<Scalar> ffn_mask;
    };

    template <typename Scalar>
    struct AttentionCache {
        Eigen::Index length = 0;
        Eigen::Index position_offset = 0;
        std::vector<Eigen::Index> valid;
        std::vector<AttentionBlockCache<Scalar>> blocks;
    };

    template <typename Scalar>
    void softmax_rows(Matrix<Scalar>& m)
    {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const Scalar top = m.row(i).maxCoeff();
            m.row(i) = (m.row(i).array() - top).exp().matrix();
            m.row(i) /= m.row(i).sum();
        }
    }

    /// Encodes `sequence` (L x dim) and mean-pools over unmasked rows (mask[i] != 0).
    /// Masked rows take no part as keys or in pooling. Row i uses positional slot
    /// position_offset + i.
    template <typename Scalar>
    Vector<Scalar> attention_encode(const ParamStore<Scalar>& store, const AttentionEncoder& enc, const Matrix<Scalar>& sequence,
        std::span<const std::uint8_t> mask, const ForwardMode& mode = {}, AttentionCache<Scalar>* cache = nullptr,
        Eigen::Index position_offset = 0)
    {
        const Eigen::Index length = sequence.rows();
        if (sequence.cols() != enc.dim || static_cast<Eigen::Index>(mask.size()) != length)
            throw ShapeError("attention_encode: sequence/mask shape mismatch");
        if (length < 1 || position_offset < 0 || position_offset + length > enc.max_len)
            throw ShapeError("attention_encode: sequence length outside positional range");

        std::vector<Eigen::Index> valid;
        for (Eigen::Index i = 0; i < length; ++i)
            if (mask[static_cast<std::size_t>(i)])
                valid.push_back(i);
        if (valid.empty())
            throw ShapeError("attention_encode: every position is masked");

        const auto n = static_cast<Eigen::Index>(valid.size());
        const auto& pos = store.value(enc.positions);
        Matrix<Scalar> x(n, enc.dim);
        for (Eigen::Index i = 0; i < n; ++i)
            x.row(i) = sequence.row(valid[i]) + pos.row(position_offset + valid[i]);

        if (cache) {
            cache->length = length;
            cache->position_offset = position_offset;
            cache->valid = valid;
            cache->blocks.clear();
        }

        const Eigen::Index head_dim = enc.dim / enc.heads;
        const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
        for (const auto& block : enc.blocks) {
            AttentionBlockCache<Scalar> bc;
            Matrix<Scalar> q = x * store.value(block.query);
            Matrix<Scalar> k = x * store.value(block.key);
            Matrix<Scalar> v = x * store.value(block.value);
            Matrix<Scalar> concat(n, enc.dim);
            for (Eigen::Index h = 0; h < enc.heads; ++h) {
                Matrix<Scalar> scores = q.middleCols(h * head_dim, head_dim) * k.middleCols(h * head_dim, head_dim).transpose() * scale;
                softmax_rows(scores);
                concat.middleCols(h * head_dim, head_dim) = scores * v.middleCols(h * head_dim, head_dim);
                if (cache)
                    bc.probs.push_back(std::move(scores));
            }
            Matrix<Scalar> attended = concat * store.value(block.out);
            Matrix<Scalar> attn_mask = dropout_mask<Scalar>(n, enc.dim, mode);
            apply_mask(attended, attn_mask);
            Matrix<Scalar> mid = x + attended;

            Matrix<Scalar> ffn = forward(store, block.ffn, mid, mode, cache ? &bc.ffn : nullptr);
            Matrix<Scalar> ffn_mask = dropout_mask<Scalar>(n, enc.dim, mode);
            apply_mask(ffn, ffn_mask);

            if (cache) {
                bc.input = std::move(x);
                bc.query = std::move(q);
                bc.key = std::move(k);
                bc.value = std::move(v);
                bc.concat = std::move(concat);
                bc.attn_mask = std::move(attn_mask);
                bc.ffn_mask = std::move(ffn_mask);
                cache->blocks.push_back(std::move(bc));
            }
            x = mid + ffn;
        }
        return x.colwise().mean().transpose();
    }

    /// Backpropagates d(pooled) through a cached encode; accumulates parameter gradients
    /// and returns d(sequence) with zero rows at masked positions.
    template <typename Scalar>
    Matrix<Scalar> attention_backward(ParamStore<Scalar>& store, const AttentionEncoder& enc, const AttentionCache<Scalar>& cache,
        const Vector<Scalar>& d_pooled)
    {
        const auto n = static_cast<Eigen::Index>(cache.valid.size());
        const Eigen::Index head_dim = enc.dim / enc.heads;
        const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));

        Matrix<Scalar> dx = Matrix<Scalar>::Ones(n, 1) * (d_pooled.transpose() / static_cast<Scalar>(n));
        for (std::size_t b = enc.blocks.size(); b-- > 0;) {
            const auto& block = enc.blocks[b];
            const auto& bc = cache.blocks[b];

            Matrix<Scalar> d_ffn = dx;
            apply_mask(d_ffn, bc.ffn_mask);
            Matrix<Scalar> d_mid = dx + backward(store, block.ffn, bc.ffn, d_ffn);

            Matrix<Scalar> d_attended = d_mid;
            apply_mask(d_attended, bc.attn_mask);
            store.grad(block.out).noalias() += bc.concat.transpose() * d_attended;
            Matrix<Scalar> d_concat = d_attended * store.value(block.out).transpose();

            Matrix<Scalar> dq(n, enc.dim), dk(n, enc.dim), dv(n, enc.dim);
            for (Eigen::Index h = 0; h < enc.heads; ++h) {
                const auto& probs = bc.probs[static_cast<std::size_t>(h)];
                const auto d_head = d_concat.middleCols(h * head_dim, head_dim);
                Matrix<Scalar> d_probs = d_head * bc.value.middleCols(h * head_dim, head_dim).transpose();
                dv.middleCols(h * head_dim, head_dim) = probs.transpose() * d_head;
                Vector<Scalar> row_dot = (d_probs.array() * probs.array()).rowwise().sum();
                Matrix<Scalar> d_scores = (probs.array() * (d_probs.colwise() - row_dot).array()).matrix() * scale;
                dq.middleCols(h * head_dim, head_dim) = d_scores * bc.key.middleCols(h * head_dim, head_dim);
                dk.middleCols(h * head_dim, head_dim) = d_scores.transpose() * bc.query.middleCols(h * head_dim, head_dim);
            }
            store.grad(block.query).noalias() += bc.input.transpose() * dq;
            store.grad(block.key).noalias() += bc.input.transpose() * dk;
            store.grad(block.value).noalias() += bc.input.transpose() * dv;
            dx = d_mid + dq * store.value(block.query).transpose() + dk * store.value(block.key).transpose()
                + dv * store.value(block.value).transpose();
        }

        Matrix<Scalar> d_sequence = Matrix<Scalar>::Zero(cache.length, enc.dim);
        auto& d_pos = store.grad(enc.positions);
        for (Eigen::Index i = 0; i < n; ++i) {
            d_sequence.row(cache.valid[static_cast<std::size_t>(i)]) = dx.row(i);
            d_pos.row(cache.position_offset + cache.valid[static_cast<std::size_t>(i)]) += dx.row(i);
        }
        return d_sequence;
    }

} // namespace slatesim::nn
