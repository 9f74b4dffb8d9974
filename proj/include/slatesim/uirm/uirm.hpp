#pragma once

#include <slatesim/core/similarity.hpp>
#include <slatesim/core/validate.hpp>
#include <slatesim/nn/attention.hpp>

#include <algorithm>
#include <cmath>

namespace slatesim::uirm {

    using nn::Matrix;
    using nn::RowVector;
    using nn::Vector;

    struct UirmConfig {
        int embedding_dim = 32;
        int history_length = 50;
        int layers = 2;
        int heads = 2;
        double dropout = 0.2;
        double rho = 0.1;
        /// Logits are divided by this before the sigmoid at serving time; 1 leaves them as trained.
        double temperature = 1.0;
    };

    template <typename Scalar>
    struct BehaviorLikelihood {
        Matrix<Scalar> probs; // b x K
        Matrix<Scalar> logits; // b x K
        Vector<Scalar> penalty; // K
    };

    /// penalty_i = mean over j != i of max(0, cos(e_i, e_j)); rows of `embeddings` are the slate items.
    template <typename Scalar>
    Vector<Scalar> item_correlation(const Matrix<Scalar>& embeddings)
    {
        const Eigen::Index k = embeddings.rows();
        if (k < 1)
            throw ShapeError("item_correlation: empty slate");
        Vector<Scalar> penalty = Vector<Scalar>::Zero(k);
        if (k == 1)
            return penalty;
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = i + 1; j < k; ++j) {
                const auto c = static_cast<Scalar>(std::max(0.0, cosine_similarity(embeddings.row(i), embeddings.row(j))));
                penalty[i] += c;
                penalty[j] += c;
            }
        return penalty / static_cast<Scalar>(k - 1);
    }

    /// d penalty / d embeddings contracted with `d_penalty`.
    template <typename Scalar>
    Matrix<Scalar> item_correlation_backward(const Matrix<Scalar>& embeddings, const Vector<Scalar>& d_penalty)
    {
        const Eigen::Index k = embeddings.rows();
        Matrix<Scalar> grad = Matrix<Scalar>::Zero(k, embeddings.cols());
        if (k < 2)
            return grad;
        const Vector<Scalar> norms = embeddings.rowwise().norm();
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = i + 1; j < k; ++j) {
                if (norms[i] == Scalar(0) || norms[j] == Scalar(0))
                    continue;
                const Scalar inv = Scalar(1) / (norms[i] * norms[j]);
                const Scalar c = embeddings.row(i).dot(embeddings.row(j)) * inv;
                if (c <= Scalar(0))
                    continue;
                const Scalar g = (d_penalty[i] + d_penalty[j]) / static_cast<Scalar>(k - 1);
                grad.row(i) += g * (embeddings.row(j) * inv - c * embeddings.row(i) / (norms[i] * norms[i]));
                grad.row(j) += g * (embeddings.row(i) * inv - c * embeddings.row(j) / (norms[j] * norms[j]));
            }
        return grad;
    }

    /// Draws one Bernoulli per (behavior, position), then clears the positive behaviors of any
    /// position whose negative behavior fired. Always consumes b * K uniforms.
    template <typename Scalar>
    BitMatrix sample_feedback(const BehaviorLikelihood<Scalar>& likelihood, const BehaviorSchema& schema, Rng& rng)
    {
        const auto& p = likelihood.probs;
        BitMatrix bits(p.rows(), p.cols());
        for (Eigen::Index k = 0; k < p.cols(); ++k)
            for (Eigen::Index b = 0; b < p.rows(); ++b)
                bits(b, k) = uniform01(rng) < static_cast<double>(p(b, k)) ? 1 : 0;
        if (const auto neg = schema.negative_index())
            for (Eigen::Index k = 0; k < p.cols(); ++k)
                if (bits(*neg, k))
                    for (Eigen::Index b = 0; b < p.rows(); ++b)
                        if (b != *neg)
                            bits(b, k) = 0;
        return bits;
    }

    /// User immediate response model. History tokens are item embeddings concatenated with their
    /// feedback bits and projected back to d; an attention encoder pools them into h, and the
    /// state is h concatenated with the profile. The head maps the state to per-behavior scales
    /// w and offsets c; logit[b][k] = w_b * <u(s), e_k> + c_b - rho * penalty_k.
    template <typename Scalar>
    class UirmModel {
    public:
        struct StateCache {
            bool empty_history = false;
            std::vector<ItemId> items;
            Matrix<Scalar> token_input; // L x (d + b)
            nn::AttentionCache<Scalar> encoder;
            Vector<Scalar> state;
        };

        struct HeadCache {
            Vector<Scalar> state;
            nn::MlpCache<Scalar> head;
            Matrix<Scalar> head_out; // 1 x 2b
            Matrix<Scalar> projected; // 1 x d
            std::vector<ItemId> items;
            Matrix<Scalar> slate_embeddings; // K x d
            Vector<Scalar> scores; // K
        };

        UirmModel() = default;

        UirmModel(const UirmConfig& config, int item_count, Eigen::Index feature_dim, BehaviorSchema schema, Rng& rng)
            : _config(config), _schema(std::move(schema)), _item_count(item_count), _feature_dim(feature_dim)
        {
            if (item_count < 1 || config.embedding_dim < 1 || config.history_length < 1 || feature_dim < 0)
                throw ConfigError("uirm: invalid dimensions");
            if (config.rho < 0.0 || !(config.temperature > 0.0))
                throw ConfigError("uirm: rho must be >= 0 and temperature > 0");
            const Eigen::Index d = config.embedding_dim;
            const Eigen::Index b = _schema.size();
            const Eigen::Index ds = d + feature_dim;
            _item_embedding = params.add("item_embedding", nn::normal_embedding<Scalar>(item_count, d, rng));
            _token = nn::make_dense(params, "token", d + b, d, rng);
            _default_token = params.add("default_token", nn::normal_embedding<Scalar>(1, d, rng));
            _encoder = nn::make_attention_encoder(params, "encoder", d, config.history_length, config.layers, config.heads, rng);
            _head = nn::make_mlp(params, "behavior_head", ds, 2 * ds, 2 * b, rng);
            _projection = nn::make_dense(params, "state_projection", ds, d, rng);
        }

        nn::ParamStore<Scalar> params;

        const UirmConfig& config() const { return _config; }
        const BehaviorSchema& schema() const { return _schema; }
        int item_count() const { return _item_count; }
        Eigen::Index feature_dim() const { return _feature_dim; }
        Eigen::Index embedding_dim() const { return _config.embedding_dim; }
        Eigen::Index state_dim() const { return _config.embedding_dim + _feature_dim; }
        double rho() const { return _config.rho; }
        void set_rho(double rho)
        {
            if (rho < 0.0)
                throw ConfigError("uirm: rho must be >= 0");
            _config.rho = rho;
        }
        void set_temperature(double t)
        {
            if (!(t > 0.0))
                throw ConfigError("uirm: temperature must be positive");
            _config.temperature = t;
        }

        const Matrix<Scalar>& item_embeddings() const { return params.value(_item_embedding); }

        template <typename Other>
        UirmModel<Other> cast() const
        {
            UirmModel<Other> out;
            out._config = _config;
            out._schema = _schema;
            out._item_count = _item_count;
            out._feature_dim = _feature_dim;
            out._item_embedding = _item_embedding;
            out._token = _token;
            out._default_token = _default_token;
            out._encoder = _encoder;
            out._head = _head;
            out._projection = _projection;
            out.params = params.template cast<Other>();
            return out;
        }

        Vector<Scalar> encode_state(const Observation& obs, const nn::ForwardMode& mode = {}, StateCache* cache = nullptr) const
        {
            if (obs.profile.feature_dim() != _feature_dim)
                throw ShapeError("uirm: profile has " + std::to_string(obs.profile.feature_dim()) + " features, model expects "
                    + std::to_string(_feature_dim));
            const Eigen::Index d = _config.embedding_dim;
            const Eigen::Index b = _schema.size();
            const auto horizon = static_cast<std::size_t>(_config.history_length);
            const std::size_t len = std::min(obs.history_len, horizon);
            const std::size_t first = obs.capacity() - len;

            Vector<Scalar> h;
            std::vector<std::uint8_t> mask;
            if (len == 0) {
                mask.assign(1, 1);
                h = nn::attention_encode<Scalar>(params, _encoder, params.value(_default_token), mask, mode,
                    cache ? &cache->encoder : nullptr, _config.history_length - 1);
                if (cache) {
                    cache->empty_history = true;
                    cache->items.clear();
                    cache->token_input.resize(0, 0);
                }
            } else {
                const auto& table = params.value(_item_embedding);
                Matrix<Scalar> input(static_cast<Eigen::Index>(len), d + b);
                std::vector<ItemId> items(len);
                for (std::size_t r = 0; r < len; ++r) {
                    const ItemId item = obs.history_items[first + r];
                    if (item < 0 || item >= _item_count)
                        throw DataError("uirm: unknown item " + std::to_string(item) + " in history");
                    items[r] = item;
                    const auto row = static_cast<Eigen::Index>(r);
                    input.row(row).head(d) = table.row(item);
                    const BehaviorBits bits = obs.history_feedback[first + r];
                    for (Eigen::Index j = 0; j < b; ++j)
                        input(row, d + j) = has_behavior(bits, static_cast<int>(j)) ? Scalar(1) : Scalar(0);
                }
                Matrix<Scalar> tokens = nn::forward(params, _token, input);
                mask.assign(len, 1);
                h = nn::attention_encode<Scalar>(params, _encoder, tokens, mask, mode, cache ? &cache->encoder : nullptr,
                    _config.history_length - static_cast<Eigen::Index>(len));
                if (cache) {
                    cache->empty_history = false;
                    cache->items = std::move(items);
                    cache->token_input = std::move(input);
                }
            }
            Vector<Scalar> state(state_dim());
            state.head(d) = h;
            state.tail(_feature_dim) = obs.profile.dense_features.template cast<Scalar>();
            if (cache)
                cache->state = state;
            return state;
        }

        /// Accumulates parameter gradients for d(loss)/d(state).
        void encode_state_backward(const StateCache& cache, const Vector<Scalar>& d_state)
        {
            const Eigen::Index d = _config.embedding_dim;
            const Vector<Scalar> d_h = d_state.head(d);
            Matrix<Scalar> d_tokens = nn::attention_backward(params, _encoder, cache.encoder, d_h);
            if (cache.empty_history) {
                params.grad(_default_token) += d_tokens;
                return;
            }
            Matrix<Scalar> d_input = nn::backward(params, _token, cache.token_input, d_tokens);
            auto& d_table = params.grad(_item_embedding);
            for (std::size_t r = 0; r < cache.items.size(); ++r)
                d_table.row(cache.items[r]) += d_input.row(static_cast<Eigen::Index>(r)).head(d);
        }

        /// Validates the slate against the catalog, then scores it.
        BehaviorLikelihood<Scalar> behavior_likelihood(const Vector<Scalar>& state, const SlateAction& slate) const
        {
            ItemCatalog catalog;
            catalog.size = _item_count;
            require_valid_slate(slate, catalog, slate.size());
            return score(state, slate.items);
        }

        /// Scores without slate validation; ids must be in range.
        BehaviorLikelihood<Scalar> score(const Vector<Scalar>& state, const std::vector<ItemId>& items, const nn::ForwardMode& mode = {},
            HeadCache* cache = nullptr) const
        {
            if (state.size() != state_dim())
                throw ShapeError("uirm: state dimension mismatch");
            if (items.empty())
                throw ShapeError("uirm: empty slate");
            const Eigen::Index b = _schema.size();
            const auto k = static_cast<Eigen::Index>(items.size());
            const auto& table = params.value(_item_embedding);

            Matrix<Scalar> slate_embeddings(k, _config.embedding_dim);
            for (Eigen::Index i = 0; i < k; ++i) {
                const ItemId item = items[static_cast<std::size_t>(i)];
                if (item < 0 || item >= _item_count)
                    throw EnvironmentError("uirm: unknown item " + std::to_string(item));
                slate_embeddings.row(i) = table.row(item);
            }

            const Matrix<Scalar> s = state.transpose();
            Matrix<Scalar> head_out = nn::forward(params, _head, s, mode, cache ? &cache->head : nullptr);
            Matrix<Scalar> projected = nn::forward(params, _projection, s);
            Vector<Scalar> scores = slate_embeddings * projected.transpose();

            BehaviorLikelihood<Scalar> out;
            out.penalty = _config.rho > 0.0 ? item_correlation<Scalar>(slate_embeddings) : Vector<Scalar>::Zero(k);
            out.logits.resize(b, k);
            const auto rho = static_cast<Scalar>(_config.rho);
            for (Eigen::Index j = 0; j < k; ++j)
                for (Eigen::Index beh = 0; beh < b; ++beh)
                    out.logits(beh, j) = head_out(0, beh) * scores[j] + head_out(0, b + beh) - rho * out.penalty[j];
            const auto inv_t = static_cast<Scalar>(1.0 / _config.temperature);
            out.probs = nn::sigmoid(out.logits * inv_t);

            if (cache) {
                cache->state = state;
                cache->head_out = std::move(head_out);
                cache->projected = std::move(projected);
                cache->items = items;
                cache->slate_embeddings = std::move(slate_embeddings);
                cache->scores = std::move(scores);
            }
            return out;
        }

        /// Backpropagates d(loss)/d(logits) (pre-temperature); accumulates parameter gradients and
        /// returns d(loss)/d(state).
        Vector<Scalar> score_backward(const HeadCache& cache, const Matrix<Scalar>& d_logits)
        {
            const Eigen::Index b = _schema.size();
            const Eigen::Index k = d_logits.cols();
            Matrix<Scalar> d_head(1, 2 * b);
            d_head.leftCols(b) = (d_logits * cache.scores).transpose();
            d_head.rightCols(b) = d_logits.rowwise().sum().transpose();
            const RowVector<Scalar> w = cache.head_out.leftCols(b);
            const Vector<Scalar> d_scores = (w * d_logits).transpose();

            const Matrix<Scalar> d_projected = d_scores.transpose() * cache.slate_embeddings;
            Matrix<Scalar> d_embed = d_scores * cache.projected;
            if (_config.rho > 0.0) {
                const Vector<Scalar> d_penalty = -static_cast<Scalar>(_config.rho) * d_logits.colwise().sum().transpose();
                d_embed += item_correlation_backward<Scalar>(cache.slate_embeddings, d_penalty);
            }
            auto& d_table = params.grad(_item_embedding);
            for (Eigen::Index i = 0; i < k; ++i)
                d_table.row(cache.items[static_cast<std::size_t>(i)]) += d_embed.row(i);

            const Matrix<Scalar> s = cache.state.transpose();
            Matrix<Scalar> d_state = nn::backward(params, _head, cache.head, d_head);
            d_state += nn::backward(params, _projection, s, d_projected);
            return d_state.transpose();
        }

    private:
        template <typename Other>
        friend class UirmModel;

        UirmConfig _config;
        BehaviorSchema _schema;
        int _item_count = 0;
        Eigen::Index _feature_dim = 0;
        nn::ParamId _item_embedding;
        nn::Dense _token;
        nn::ParamId _default_token;
        nn::AttentionEncoder _encoder;
        nn::Mlp _head;
        nn::Dense _projection;
    };

} // namespace slatesim::uirm
