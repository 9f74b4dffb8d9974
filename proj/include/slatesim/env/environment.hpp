#pragma once

#include <slatesim/core/trajectory.hpp>
#include <slatesim/data/dataset.hpp>
#include <slatesim/env/retention.hpp>
#include <slatesim/uirm/uirm.hpp>

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace slatesim::env {

    enum class TaskMode { request, whole_session, cross_session };

    TaskMode parse_mode(const std::string& text);
    std::string to_string(TaskMode mode);

    struct EnvConfig {
        TaskMode mode = TaskMode::whole_session;
        int slate_size = 20;
        /// Also the initial temper.
        int max_step = 20;
        double temper_rate = 1.0;
        double leave_threshold = 1.0;
        /// temper -= rate * r_t instead of temper -= rate * (1 - r_t).
        bool literal_temper_rule = false;
        int max_sessions = 10;
        int max_return_day = 10;
        /// Normalizing constant r_max; 0 takes the schema's largest per-item reward.
        double reward_scale = 0.0;
        int history_length = 50;
        std::uint64_t seed = 1;

        double initial_temper() const { return static_cast<double>(max_step); }
        void validate() const;
    };

    struct Reward {
        double raw = 0.0;
        double normalized = 0.0;
    };

    /// raw = mean over positions of the weighted behavior sum; normalized = raw / r_max.
    Reward reward_func(const BitMatrix& feedback, const BehaviorSchema& schema, double r_max);

    struct TemperUpdate {
        double temper = 0.0;
        bool leave = false;
    };

    /// `step_in_session` counts the step just taken (1-based).
    TemperUpdate update_temper_and_leave(double temper, int step_in_session, double reward, const EnvConfig& config);

    /// Return day in {1..D}; one engine draw.
    int sample_return_day(double p_ret, int max_return_day, Rng& rng);

    /// What the environment needs from a user response simulator.
    class ResponseModel {
    public:
        virtual ~ResponseModel() = default;
        virtual const BehaviorSchema& schema() const = 0;
        virtual int item_count() const = 0;
        virtual Eigen::Index state_dim() const = 0;
        virtual Eigen::VectorXf encode_state(const Observation& obs) const = 0;
        /// b x K behavior probabilities for a validated slate.
        virtual Eigen::MatrixXf probabilities(const Eigen::VectorXf& state, const SlateAction& slate) const = 0;
        /// One row per item; used as the catalog features.
        virtual Eigen::MatrixXf item_embeddings() const = 0;
    };

    class UirmResponse final : public ResponseModel {
    public:
        explicit UirmResponse(std::shared_ptr<const uirm::UirmModel<float>> model);

        const BehaviorSchema& schema() const override { return _model->schema(); }
        int item_count() const override { return _model->item_count(); }
        Eigen::Index state_dim() const override { return _model->state_dim(); }
        Eigen::VectorXf encode_state(const Observation& obs) const override { return _model->encode_state(obs); }
        Eigen::MatrixXf probabilities(const Eigen::VectorXf& state, const SlateAction& slate) const override
        {
            return _model->score(state, slate.items).probs;
        }
        Eigen::MatrixXf item_embeddings() const override { return _model->item_embeddings(); }

        const uirm::UirmModel<float>& model() const { return *_model; }

    private:
        std::shared_ptr<const uirm::UirmModel<float>> _model;
    };

    /// Users the environment samples from, each with the logged prefix that seeds its history.
    struct UserPool {
        std::vector<UserProfile> profiles;
        std::vector<std::vector<std::pair<ItemId, BehaviorBits>>> prefixes; // chronological, at most H

        std::size_t size() const { return profiles.size(); }
        static UserPool from_log(const data::LogDataset& data, int history_length);
    };

    /// Builds retention-fitting rows from a segmented log: for every session with a successor, the
    /// simulator state after the session, its mean normalized reward, and the gap to the next one.
    RetentionExamples build_retention_examples(const ResponseModel& model, const data::LogDataset& data, int history_length,
        int max_return_day, double r_max);

    struct StepInfo {
        UserId user = 0;
        int session_index = 0;
        int step_in_session = 0;
        double temper = 0.0;
        double p_ret = 0.0; // set when leave fired
        std::int64_t day = 0; // simulated-day clock (cross_session only)
        /// Return days that started a further session in this episode so far.
        std::vector<int> inter_session_returns;
        TrajectoryStep record;
    };

    struct StepResult {
        Observation observation;
        FeedbackBundle feedback;
        bool done = false;
        StepInfo info;
    };

    class Environment {
    public:
        Environment(EnvConfig config, std::shared_ptr<const ResponseModel> model, std::shared_ptr<const UserPool> users,
            std::shared_ptr<const RetentionModel> retention);

        const EnvConfig& config() const { return _config; }
        const ResponseModel& response_model() const { return *_model; }
        const ItemCatalog& catalog() const { return _catalog; }
        double reward_scale() const { return _r_max; }

        Observation reset();
        StepResult step(const SlateAction& action);

        const Observation& observation() const { return _obs; }
        bool done() const { return _done; }
        bool started() const { return _started; }
        std::int64_t episodes_started() const { return _episode; }

    private:
        EnvConfig _config;
        std::shared_ptr<const ResponseModel> _model;
        std::shared_ptr<const UserPool> _users;
        std::shared_ptr<const RetentionModel> _retention;
        ItemCatalog _catalog;
        double _r_max = 1.0;

        Rng _user_rng;
        Rng _feedback_rng;
        Rng _return_rng;

        Observation _obs;
        UserId _user = 0;
        double _temper = 0.0;
        int _step_in_session = 0;
        int _session_index = 0;
        double _session_reward_sum = 0.0;
        std::int64_t _day = 0;
        std::vector<int> _returns;
        bool _done = true;
        bool _started = false;
        std::int64_t _episode = -1;
    };

    /// n independent lanes; lane i seeds from `lane_seeds[i]`. Lanes reset themselves when done.
    class BatchEnvironment {
    public:
        BatchEnvironment(const EnvConfig& config, std::size_t lanes, std::shared_ptr<const ResponseModel> model,
            std::shared_ptr<const UserPool> users, std::shared_ptr<const RetentionModel> retention);
        BatchEnvironment(const EnvConfig& config, const std::vector<std::uint64_t>& lane_seeds, std::shared_ptr<const ResponseModel> model,
            std::shared_ptr<const UserPool> users, std::shared_ptr<const RetentionModel> retention);

        /// Lane 0 uses the master seed itself so a one-lane batch reproduces the scalar environment.
        static std::vector<std::uint64_t> lane_seeds(std::uint64_t master, std::size_t lanes);

        std::size_t size() const { return _lanes.size(); }
        const Environment& lane(std::size_t i) const { return _lanes[i]; }
        std::vector<Observation> observations() const;

        /// One action per lane. A finished lane's result carries its terminal observation; the
        /// lane has already been reset when this returns.
        std::vector<StepResult> step(const std::vector<SlateAction>& actions);

    private:
        std::vector<Environment> _lanes;
    };

    /// Appends trajectory records as JSON lines.
    class TrajectoryLogger {
    public:
        explicit TrajectoryLogger(std::ostream& out) : _out(out) {}
        void log(const TrajectoryStep& step);

    private:
        std::ostream& _out;
    };

} // namespace slatesim::env
