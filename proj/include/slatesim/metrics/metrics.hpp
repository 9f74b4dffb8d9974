#pragma once

#include <slatesim/core/trajectory.hpp>
#include <slatesim/core/types.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slatesim::metrics {

    /// Mann-Whitney AUC with ties counted one half. Empty when either class is absent.
    std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

    /// Item-wise weighted reward of one slate, averaged over positions (raw scale).
    double slate_l_reward(const BitMatrix& feedback, const BehaviorSchema& schema);

    struct LReward {
        double avg = 0.0;
        double max = 0.0;
    };
    LReward l_reward(std::span<const BitMatrix> batch, const BehaviorSchema& schema);

    /// Distinct items across the batch.
    int coverage(std::span<const SlateAction> batch);

    /// Mean over slates of the mean ordered-pair cosine dissimilarity. Slates with fewer than
    /// two items carry no pairs and are skipped.
    double ild(std::span<const SlateAction> batch, const Eigen::MatrixXf& item_embeddings);

    struct SessionMetrics {
        double depth = 0.0;
        double avg_reward = 0.0;
        double total_reward = 0.0;
        std::size_t sessions = 0;
    };
    /// Sessions are keyed by (episode, session_index); rewards are the normalized r_t.
    SessionMetrics session_metrics(const Trajectory& steps);

    struct RetentionMetrics {
        double return_day = 0.0;
        double user_retention = 0.0;
        std::size_t sessions = 0;
    };
    /// Over steps that carry a sampled return day.
    RetentionMetrics retention_metrics(const Trajectory& steps);

    struct MetricValue {
        double mean = 0.0;
        double std = 0.0;
        std::size_t count = 0;

        bool operator==(const MetricValue&) const = default;
    };

    /// Ordered metric name -> summary. Std is the sample standard deviation (0 for one value).
    struct MetricsReport {
        std::map<std::string, MetricValue> values;

        bool operator==(const MetricsReport&) const = default;
    };

    using MetricSample = std::map<std::string, double>;

    MetricsReport aggregate(const std::vector<MetricSample>& samples);

    /// Evaluation-batch quantities of a trajectory: L-reward over all steps, coverage and ILD
    /// per mini-batch of `batch_size` consecutive steps (averaged), session and retention metrics.
    MetricSample trajectory_metrics(const Trajectory& steps, const BehaviorSchema& schema, const Eigen::MatrixXf& item_embeddings,
        std::size_t batch_size);

    std::string report_to_json(const MetricsReport& report);
    MetricsReport report_from_json(const std::string& text);
    /// Header `metric,mean,std,count` then one row per metric.
    std::string report_to_csv(const MetricsReport& report);

} // namespace slatesim::metrics
