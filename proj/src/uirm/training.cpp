#include <slatesim/metrics/metrics.hpp>
#include <slatesim/nn/adam.hpp>
#include <slatesim/nn/checkpoint.hpp>
#include <slatesim/uirm/training.hpp>

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>

namespace slatesim::uirm {

    namespace {

        struct HistoryEntry {
            std::int64_t timestamp;
            ItemId item;
            BehaviorBits bits;
        };

        BitMatrix labels_of(const std::vector<BehaviorBits>& bits, int behaviors)
        {
            BitMatrix out(behaviors, static_cast<Eigen::Index>(bits.size()));
            for (std::size_t k = 0; k < bits.size(); ++k)
                for (int b = 0; b < behaviors; ++b)
                    out(b, static_cast<Eigen::Index>(k)) = has_behavior(bits[k], b) ? 1 : 0;
            return out;
        }

    } // namespace

    std::vector<LoggedRequest> build_requests(const data::LogDataset& data, const data::LogDataset* context, int history_length,
        std::int64_t gap_ms)
    {
        if (history_length < 1)
            throw ConfigError("build_requests: history length must be positive");
        const auto capacity = static_cast<std::size_t>(history_length);
        const int behaviors = data.schema.size();
        const auto ranges = data.user_ranges();
        const auto context_ranges = context ? context->user_ranges() : decltype(ranges){};

        std::vector<LoggedRequest> out;
        for (std::size_t u = 0; u < ranges.size(); ++u) {
            const auto [begin, end] = ranges[u];
            if (begin == end)
                continue;

            std::vector<HistoryEntry> prior;
            if (context && u < context_ranges.size())
                for (std::size_t i = context_ranges[u].first; i < context_ranges[u].second; ++i) {
                    const auto& r = context->records[i];
                    prior.push_back({r.timestamp, r.item, r.behaviors});
                }
            const std::int64_t first_ts = data.records[begin].timestamp;
            std::erase_if(prior, [&](const HistoryEntry& h) { return h.timestamp >= first_ts; });
            std::stable_sort(prior.begin(), prior.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });

            Observation obs = Observation::empty(data.users[u], capacity);
            for (const auto& h : prior)
                obs.push(h.item, h.bits);

            std::size_t i = begin;
            while (i < end) {
                std::size_t j = i + 1;
                std::set<ItemId> seen{data.records[i].item};
                while (j < end && data.records[j].date == data.records[i].date
                    && data.records[j].timestamp - data.records[j - 1].timestamp <= gap_ms && !seen.contains(data.records[j].item)) {
                    seen.insert(data.records[j].item);
                    ++j;
                }
                LoggedRequest req;
                req.observation = obs;
                std::vector<BehaviorBits> bits;
                for (std::size_t t = i; t < j; ++t) {
                    req.items.push_back(data.records[t].item);
                    bits.push_back(data.records[t].behaviors);
                }
                req.labels = labels_of(bits, behaviors);
                out.push_back(std::move(req));
                for (std::size_t t = i; t < j; ++t)
                    obs.push(data.records[t].item, data.records[t].behaviors);
                i = j;
            }
        }
        return out;
    }

    PretrainResult pretrain(UirmModel<float>& model, std::span<const LoggedRequest> train, const PretrainConfig& config)
    {
        if (train.empty())
            throw DataError("pretrain: empty training set");
        if (config.epochs < 1 || config.batch_size < 1)
            throw ConfigError("pretrain: epochs and batch size must be positive");

        const double serving_rho = model.rho();
        model.set_rho(0.0);

        nn::OptimizerState<float> optimizer(model.params, {config.learning_rate, 0.9, 0.999, 1e-8, config.l2});
        Rng shuffle_rng(derive_seed(config.seed, "uirm.shuffle"));
        Rng dropout_rng(derive_seed(config.seed, "uirm.dropout"));
        const auto mode = nn::ForwardMode::train(model.config().dropout, dropout_rng);
        const auto click = model.schema().index_of("click").value_or(0);

        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::vector<LoggedRequest> batch;

        PretrainResult result;
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            const auto snapshot = model.params;
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);

            double loss_sum = 0.0;
            std::size_t batches = 0;
            bool failed = false;
            for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
                const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
                batch.clear();
                for (std::size_t t = start; t < stop; ++t)
                    batch.push_back(train[order[t]]);
                model.params.zero_grad();
                const double loss = request_batch_loss<float>(model, batch, mode, true);
                if (!std::isfinite(loss) || !optimizer.step(model.params)) {
                    failed = true;
                    break;
                }
                loss_sum += loss;
                ++batches;
            }
            if (failed || !model.params.all_finite()) {
                model.params = snapshot;
                result.diverged = true;
                break;
            }
            result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));

            std::vector<std::optional<double>> aucs;
            if (!config.validation.empty()) {
                model.set_rho(serving_rho);
                aucs = evaluate_auc(model, config.validation);
                model.set_rho(0.0);
            }
            result.epoch_auc.push_back(aucs);
            if (config.progress) {
                nlohmann::ordered_json line{{"epoch", epoch + 1}, {"loss", result.epoch_loss.back()}};
                if (!aucs.empty() && aucs[static_cast<std::size_t>(click)])
                    line["click_auc"] = *aucs[static_cast<std::size_t>(click)];
                *config.progress << line.dump() << '\n';
            }
            if (config.stop_at_click_auc && !aucs.empty() && aucs[static_cast<std::size_t>(click)]
                && *aucs[static_cast<std::size_t>(click)] >= *config.stop_at_click_auc)
                break;
        }
        model.set_rho(serving_rho);
        return result;
    }

    std::vector<std::optional<double>> evaluate_auc(const UirmModel<float>& model, std::span<const LoggedRequest> test)
    {
        const int behaviors = model.schema().size();
        std::vector<std::vector<double>> scores(static_cast<std::size_t>(behaviors));
        std::vector<std::vector<std::uint8_t>> labels(static_cast<std::size_t>(behaviors));
        for (const auto& req : test) {
            const Vector<float> state = model.encode_state(req.observation);
            const auto likelihood = model.score(state, req.items);
            for (Eigen::Index k = 0; k < likelihood.probs.cols(); ++k)
                for (int b = 0; b < behaviors; ++b) {
                    scores[static_cast<std::size_t>(b)].push_back(likelihood.probs(b, k));
                    labels[static_cast<std::size_t>(b)].push_back(req.labels(b, k));
                }
        }
        std::vector<std::optional<double>> out;
        for (int b = 0; b < behaviors; ++b)
            out.push_back(metrics::auc(scores[static_cast<std::size_t>(b)], labels[static_cast<std::size_t>(b)]));
        return out;
    }

    void save_uirm(const std::filesystem::path& path, const UirmModel<float>& model)
    {
        const auto& c = model.config();
        nlohmann::json meta{{"kind", "uirm"}, {"embedding_dim", c.embedding_dim}, {"history_length", c.history_length},
            {"layers", c.layers}, {"heads", c.heads}, {"dropout", c.dropout}, {"rho", c.rho}, {"temperature", c.temperature},
            {"item_count", model.item_count()}, {"feature_dim", model.feature_dim()}, {"behaviors", model.schema().names()},
            {"weights", model.schema().weights()}};
        nn::write_checkpoint(path, model.params, meta);
    }

    UirmModel<float> load_uirm(const std::filesystem::path& path)
    {
        const auto ckpt = nn::read_checkpoint(path);
        const auto& m = ckpt.meta;
        if (m.value("kind", "") != "uirm")
            throw DataError("checkpoint " + path.string() + " is not a simulator checkpoint");
        UirmConfig c;
        c.embedding_dim = m.at("embedding_dim").get<int>();
        c.history_length = m.at("history_length").get<int>();
        c.layers = m.at("layers").get<int>();
        c.heads = m.at("heads").get<int>();
        c.dropout = m.at("dropout").get<double>();
        c.rho = m.at("rho").get<double>();
        c.temperature = m.at("temperature").get<double>();
        BehaviorSchema schema(m.at("behaviors").get<std::vector<std::string>>(), m.at("weights").get<std::vector<double>>());
        Rng init(0);
        UirmModel<float> model(c, m.at("item_count").get<int>(), m.at("feature_dim").get<Eigen::Index>(), schema, init);
        nn::load_into(ckpt, "", model.params);
        return model;
    }

} // namespace slatesim::uirm
