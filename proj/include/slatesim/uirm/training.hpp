#pragma once

#include <slatesim/data/dataset.hpp>
#include <slatesim/uirm/uirm.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>

namespace slatesim::uirm {

    /// One logged request rebuilt as a training example: the observation the user was in, the
    /// items shown together, and their b x K labels.
    struct LoggedRequest {
        Observation observation;
        std::vector<ItemId> items;
        BitMatrix labels;
    };

    /// Groups each user's records into requests (same date, consecutive timestamps at most
    /// `gap_ms` apart, no repeated item) and attaches the prior history. When `context` is given,
    /// its records of the same user precede those of `data` in the history.
    std::vector<LoggedRequest> build_requests(const data::LogDataset& data, const data::LogDataset* context, int history_length,
        std::int64_t gap_ms = 60'000);

    /// Mean BCE over every (behavior, position) cell of the batch, from logits. With `with_grad`
    /// the gradients are accumulated into model.params (not zeroed here).
    template <typename Scalar>
    double request_batch_loss(UirmModel<Scalar>& model, std::span<const LoggedRequest> batch, const nn::ForwardMode& mode, bool with_grad)
    {
        std::size_t cells = 0;
        for (const auto& req : batch)
            cells += static_cast<std::size_t>(req.labels.size());
        if (cells == 0)
            throw ShapeError("request_batch_loss: empty batch");
        const auto inv_cells = static_cast<Scalar>(1.0 / static_cast<double>(cells));

        double total = 0.0;
        for (const auto& req : batch) {
            typename UirmModel<Scalar>::StateCache state_cache;
            typename UirmModel<Scalar>::HeadCache head_cache;
            const Vector<Scalar> state = model.encode_state(req.observation, mode, with_grad ? &state_cache : nullptr);
            const auto likelihood = model.score(state, req.items, mode, with_grad ? &head_cache : nullptr);
            Matrix<Scalar> d_logits(likelihood.logits.rows(), likelihood.logits.cols());
            for (Eigen::Index k = 0; k < d_logits.cols(); ++k)
                for (Eigen::Index b = 0; b < d_logits.rows(); ++b) {
                    const Scalar z = likelihood.logits(b, k);
                    const Scalar y = req.labels(b, k) ? Scalar(1) : Scalar(0);
                    const Scalar softplus = z > Scalar(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
                    total += static_cast<double>(softplus - y * z);
                    d_logits(b, k) = (nn::sigmoid(z) - y) * inv_cells;
                }
            if (with_grad) {
                const Vector<Scalar> d_state = model.score_backward(head_cache, d_logits);
                model.encode_state_backward(state_cache, d_state);
            }
        }
        return total / static_cast<double>(cells);
    }

    struct PretrainConfig {
        int epochs = 10;
        int batch_size = 64;
        double learning_rate = 5e-4;
        double l2 = 1e-5;
        std::uint64_t seed = 1;
        /// Evaluated after every epoch when non-empty.
        std::span<const LoggedRequest> validation;
        /// Stop once the validation click AUC reaches this value.
        std::optional<double> stop_at_click_auc;
        /// Receives one JSON line per epoch (epoch, loss, auc) when set.
        std::ostream* progress = nullptr;
    };

    struct PretrainResult {
        std::vector<double> epoch_loss;
        std::vector<std::vector<std::optional<double>>> epoch_auc; // per epoch, per behavior
        bool diverged = false;
    };

    /// Point-wise BCE pretraining with rho held at 0. On a non-finite loss or gradient the
    /// parameters of the last completed epoch are restored and `diverged` is set.
    PretrainResult pretrain(UirmModel<float>& model, std::span<const LoggedRequest> train, const PretrainConfig& config);

    /// Per-behavior AUC of the served probabilities; empty where the behavior has one class.
    std::vector<std::optional<double>> evaluate_auc(const UirmModel<float>& model, std::span<const LoggedRequest> test);

    void save_uirm(const std::filesystem::path& path, const UirmModel<float>& model);
    UirmModel<float> load_uirm(const std::filesystem::path& path);

} // namespace slatesim::uirm
