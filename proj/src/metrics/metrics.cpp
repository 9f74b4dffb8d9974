#include <slatesim/core/error.hpp>
#include <slatesim/core/similarity.hpp>
#include <slatesim/metrics/metrics.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace slatesim::metrics {

    std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> labels)
    {
        if (scores.size() != labels.size())
            throw ShapeError("auc: scores and labels differ in length");
        std::vector<std::size_t> order(scores.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

        // Average ranks over tie groups, then the rank-sum form of the U statistic.
        double positive_rank_sum = 0.0;
        std::size_t positives = 0;
        for (std::size_t i = 0; i < order.size();) {
            std::size_t j = i;
            while (j < order.size() && scores[order[j]] == scores[order[i]])
                ++j;
            const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
            for (std::size_t t = i; t < j; ++t)
                if (labels[order[t]]) {
                    positive_rank_sum += mid_rank;
                    ++positives;
                }
            i = j;
        }
        const std::size_t negatives = scores.size() - positives;
        if (positives == 0 || negatives == 0)
            return std::nullopt;
        const double np = static_cast<double>(positives);
        const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
        return u / (np * static_cast<double>(negatives));
    }

    double slate_l_reward(const BitMatrix& feedback, const BehaviorSchema& schema)
    {
        if (feedback.rows() != schema.size())
            throw ShapeError("feedback rows do not match the behavior schema");
        if (feedback.cols() == 0)
            return 0.0;
        double total = 0.0;
        for (Eigen::Index k = 0; k < feedback.cols(); ++k)
            for (Eigen::Index b = 0; b < feedback.rows(); ++b)
                if (feedback(b, k))
                    total += schema.weight(static_cast<int>(b));
        return total / static_cast<double>(feedback.cols());
    }

    LReward l_reward(std::span<const BitMatrix> batch, const BehaviorSchema& schema)
    {
        if (batch.empty())
            throw ShapeError("l_reward: empty batch");
        LReward out;
        out.max = -std::numeric_limits<double>::infinity();
        double sum = 0.0;
        for (const auto& fb : batch) {
            const double r = slate_l_reward(fb, schema);
            sum += r;
            out.max = std::max(out.max, r);
        }
        out.avg = sum / static_cast<double>(batch.size());
        return out;
    }

    int coverage(std::span<const SlateAction> batch)
    {
        std::set<ItemId> seen;
        for (const auto& slate : batch)
            seen.insert(slate.items.begin(), slate.items.end());
        return static_cast<int>(seen.size());
    }

    double ild(std::span<const SlateAction> batch, const Eigen::MatrixXf& item_embeddings)
    {
        double total = 0.0;
        std::size_t slates = 0;
        for (const auto& slate : batch) {
            const std::size_t k = slate.size();
            if (k < 2)
                continue;
            double pairs = 0.0;
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j)
                    if (i != j)
                        pairs += 1.0 - cosine_similarity(item_embeddings.row(slate.items[i]), item_embeddings.row(slate.items[j]));
            total += pairs / static_cast<double>(k * (k - 1));
            ++slates;
        }
        return slates == 0 ? 0.0 : total / static_cast<double>(slates);
    }

    SessionMetrics session_metrics(const Trajectory& steps)
    {
        std::map<std::pair<std::int64_t, int>, std::pair<int, double>> sessions;
        double reward_sum = 0.0;
        for (const auto& s : steps) {
            auto& [depth, total] = sessions[{s.episode, s.session_index}];
            ++depth;
            total += s.reward;
            reward_sum += s.reward;
        }
        SessionMetrics out;
        out.sessions = sessions.size();
        if (sessions.empty())
            return out;
        double depth_sum = 0.0;
        double total_sum = 0.0;
        for (const auto& [key, value] : sessions) {
            depth_sum += value.first;
            total_sum += value.second;
        }
        out.depth = depth_sum / static_cast<double>(sessions.size());
        out.total_reward = total_sum / static_cast<double>(sessions.size());
        out.avg_reward = reward_sum / static_cast<double>(steps.size());
        return out;
    }

    RetentionMetrics retention_metrics(const Trajectory& steps)
    {
        RetentionMetrics out;
        double days = 0.0;
        std::size_t next_day = 0;
        for (const auto& s : steps) {
            if (!s.leave || s.return_day < 1)
                continue;
            ++out.sessions;
            days += s.return_day;
            next_day += s.return_day == 1;
        }
        if (out.sessions > 0) {
            out.return_day = days / static_cast<double>(out.sessions);
            out.user_retention = static_cast<double>(next_day) / static_cast<double>(out.sessions);
        }
        return out;
    }

    MetricsReport aggregate(const std::vector<MetricSample>& samples)
    {
        std::map<std::string, std::vector<double>> columns;
        for (const auto& sample : samples)
            for (const auto& [name, value] : sample)
                columns[name].push_back(value);
        MetricsReport report;
        for (const auto& [name, values] : columns) {
            MetricValue v;
            v.count = values.size();
            v.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
            if (values.size() > 1) {
                double ss = 0.0;
                for (double x : values)
                    ss += (x - v.mean) * (x - v.mean);
                v.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
            }
            report.values[name] = v;
        }
        return report;
    }

    MetricSample trajectory_metrics(const Trajectory& steps, const BehaviorSchema& schema, const Eigen::MatrixXf& item_embeddings,
        std::size_t batch_size)
    {
        if (batch_size == 0)
            throw ConfigError("trajectory_metrics: batch size must be positive");
        MetricSample out;
        if (steps.empty())
            throw ShapeError("trajectory_metrics: empty trajectory");

        std::vector<BitMatrix> feedback;
        std::vector<SlateAction> slates;
        for (const auto& s : steps) {
            feedback.push_back(s.feedback);
            slates.push_back({s.slate});
        }
        const auto lr = l_reward(feedback, schema);
        out["avg_l_reward"] = lr.avg;
        out["max_l_reward"] = lr.max;

        double cov = 0.0;
        double div = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < slates.size(); begin += batch_size) {
            const std::size_t end = std::min(slates.size(), begin + batch_size);
            const std::span<const SlateAction> chunk(slates.data() + begin, end - begin);
            cov += coverage(chunk);
            div += ild(chunk, item_embeddings);
            ++batches;
        }
        out["coverage"] = cov / static_cast<double>(batches);
        out["ild"] = div / static_cast<double>(batches);

        const auto sm = session_metrics(steps);
        out["depth"] = sm.depth;
        out["avg_reward"] = sm.avg_reward;
        out["total_reward"] = sm.total_reward;
        const auto rm = retention_metrics(steps);
        out["return_day"] = rm.return_day;
        out["user_retention"] = rm.user_retention;
        return out;
    }

    std::string report_to_json(const MetricsReport& report)
    {
        nlohmann::ordered_json doc = nlohmann::ordered_json::object();
        for (const auto& [name, v] : report.values)
            doc[name] = {{"mean", v.mean}, {"std", v.std}, {"count", v.count}};
        return doc.dump(2) + "\n";
    }

    MetricsReport report_from_json(const std::string& text)
    {
        MetricsReport report;
        try {
            const auto doc = nlohmann::json::parse(text);
            for (const auto& [name, v] : doc.items())
                report.values[name] = {v.at("mean").get<double>(), v.at("std").get<double>(), v.at("count").get<std::size_t>()};
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("metrics report: ") + e.what());
        }
        return report;
    }

    std::string report_to_csv(const MetricsReport& report)
    {
        std::ostringstream out;
        out << "metric,mean,std,count\n";
        char buffer[64];
        for (const auto& [name, v] : report.values) {
            out << name;
            std::snprintf(buffer, sizeof buffer, ",%.17g", v.mean);
            out << buffer;
            std::snprintf(buffer, sizeof buffer, ",%.17g", v.std);
            out << buffer << ',' << v.count << '\n';
        }
        return out.str();
    }

} // namespace slatesim::metrics
