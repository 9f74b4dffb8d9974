#include <slatesim/core/geometric.hpp>
#include <slatesim/core/validate.hpp>
#include <slatesim/env/environment.hpp>

#include <ostream>

namespace slatesim::env {

    TaskMode parse_mode(const std::string& text)
    {
        if (text == "request")
            return TaskMode::request;
        if (text == "whole_session")
            return TaskMode::whole_session;
        if (text == "cross_session")
            return TaskMode::cross_session;
        throw ConfigError("unknown task mode '" + text + "' (request | whole_session | cross_session)");
    }

    std::string to_string(TaskMode mode)
    {
        switch (mode) {
        case TaskMode::request:
            return "request";
        case TaskMode::whole_session:
            return "whole_session";
        case TaskMode::cross_session:
            return "cross_session";
        }
        return "whole_session";
    }

    void EnvConfig::validate() const
    {
        if (slate_size < 1)
            throw ConfigError("env: slate size must be >= 1");
        if (max_step < 1)
            throw ConfigError("env: max_step must be >= 1");
        if (!(leave_threshold < initial_temper()))
            throw ConfigError("env: leave threshold must be below the initial temper");
        if (!(temper_rate > 0.0))
            throw ConfigError("env: temper rate must be positive");
        if (max_sessions < 1 || max_return_day < 1 || history_length < 1)
            throw ConfigError("env: max_sessions, max_return_day and history_length must be >= 1");
        if (reward_scale < 0.0)
            throw ConfigError("env: reward scale must be >= 0");
    }

    Reward reward_func(const BitMatrix& feedback, const BehaviorSchema& schema, double r_max)
    {
        if (feedback.rows() != schema.size())
            throw ShapeError("reward_func: feedback rows do not match the schema");
        if (!(r_max > 0.0))
            throw ConfigError("reward_func: r_max must be positive");
        Reward r;
        if (feedback.cols() == 0)
            return r;
        double total = 0.0;
        for (Eigen::Index k = 0; k < feedback.cols(); ++k)
            for (Eigen::Index b = 0; b < feedback.rows(); ++b)
                if (feedback(b, k))
                    total += schema.weight(static_cast<int>(b));
        r.raw = total / static_cast<double>(feedback.cols());
        r.normalized = r.raw / r_max;
        return r;
    }

    TemperUpdate update_temper_and_leave(double temper, int step_in_session, double reward, const EnvConfig& config)
    {
        TemperUpdate out;
        const double drain = config.literal_temper_rule ? reward : 1.0 - reward;
        out.temper = temper - config.temper_rate * drain;
        out.leave = out.temper <= config.leave_threshold || step_in_session >= config.max_step;
        return out;
    }

    int sample_return_day(double p_ret, int max_return_day, Rng& rng)
    {
        return sample_truncated_geometric(p_ret, max_return_day, rng);
    }

    UirmResponse::UirmResponse(std::shared_ptr<const uirm::UirmModel<float>> model) : _model(std::move(model))
    {
        if (!_model)
            throw ConfigError("UirmResponse: null model");
    }

    UserPool UserPool::from_log(const data::LogDataset& data, int history_length)
    {
        UserPool pool;
        const auto ranges = data.user_ranges();
        const auto cap = static_cast<std::size_t>(history_length);
        for (std::size_t u = 0; u < data.users.size(); ++u) {
            pool.profiles.push_back(data.users[u]);
            std::vector<std::pair<ItemId, BehaviorBits>> prefix;
            if (u < ranges.size()) {
                const auto [begin, end] = ranges[u];
                const std::size_t from = end - std::min(end - begin, cap);
                for (std::size_t i = from; i < end; ++i)
                    prefix.emplace_back(data.records[i].item, data.records[i].behaviors);
            }
            pool.prefixes.push_back(std::move(prefix));
        }
        return pool;
    }

    RetentionExamples build_retention_examples(const ResponseModel& model, const data::LogDataset& data, int history_length,
        int max_return_day, double r_max)
    {
        if (!data.segmented())
            throw DataError("retention examples need a session-segmented log");
        std::vector<Eigen::VectorXf> states;
        RetentionExamples out;
        const auto& schema = data.schema;
        for (std::size_t u = 0; u < data.sessions.size(); ++u) {
            const auto& sessions = data.sessions[u];
            Observation obs = Observation::empty(data.users[u], static_cast<std::size_t>(history_length));
            for (std::size_t s = 0; s < sessions.size(); ++s) {
                double reward = 0.0;
                for (std::size_t i = sessions[s].begin; i < sessions[s].end; ++i) {
                    const auto& r = data.records[i];
                    for (int b = 0; b < schema.size(); ++b)
                        if (has_behavior(r.behaviors, b))
                            reward += schema.weight(b);
                    obs.push(r.item, r.behaviors);
                }
                if (s + 1 == sessions.size())
                    break;
                const int gap = sessions[s + 1].date - sessions[s].date;
                states.push_back(model.encode_state(obs));
                out.next_day.push_back(gap == 1 ? 1 : 0);
                out.return_day.push_back(std::clamp(gap, 1, max_return_day));
                out.session_reward.push_back(reward / static_cast<double>(std::max<std::size_t>(1, sessions[s].size())) / r_max);
            }
        }
        out.states.resize(static_cast<Eigen::Index>(states.size()), model.state_dim());
        for (std::size_t i = 0; i < states.size(); ++i)
            out.states.row(static_cast<Eigen::Index>(i)) = states[i].transpose();
        return out;
    }

    Environment::Environment(EnvConfig config, std::shared_ptr<const ResponseModel> model, std::shared_ptr<const UserPool> users,
        std::shared_ptr<const RetentionModel> retention)
        : _config(config), _model(std::move(model)), _users(std::move(users)), _retention(std::move(retention)),
          _user_rng(derive_seed(config.seed, "env.user")), _feedback_rng(derive_seed(config.seed, "env.feedback")),
          _return_rng(derive_seed(config.seed, "env.return"))
    {
        _config.validate();
        if (!_model || !_users || !_retention)
            throw ConfigError("environment: model, user pool and retention model are required");
        if (_users->size() == 0)
            throw EnvironmentError("environment: empty user pool");
        if (_config.slate_size > _model->item_count())
            throw ConfigError("environment: slate size exceeds the catalog");
        _catalog.size = _model->item_count();
        _catalog.features = _model->item_embeddings();
        _r_max = _config.reward_scale > 0.0 ? _config.reward_scale : _model->schema().max_item_reward();
        if (!(_r_max > 0.0))
            throw ConfigError("environment: the schema has no positive reward");
    }

    Observation Environment::reset()
    {
        const std::size_t u = uniform_index(_user_rng, _users->size());
        _user = static_cast<UserId>(u);
        _obs = Observation::empty(_users->profiles[u], static_cast<std::size_t>(_config.history_length));
        for (const auto& [item, bits] : _users->prefixes[u]) {
            if (!_catalog.contains(item))
                throw EnvironmentError("environment: logged history item " + std::to_string(item) + " outside the catalog");
            _obs.push(item, bits);
        }
        _temper = _config.initial_temper();
        _step_in_session = 0;
        _session_index = 0;
        _session_reward_sum = 0.0;
        _day = 0;
        _returns.clear();
        _done = false;
        _started = true;
        ++_episode;
        return _obs;
    }

    StepResult Environment::step(const SlateAction& action)
    {
        if (!_started || _done)
            throw EnvironmentError("environment: step on a finished episode; call reset()");
        require_valid_slate(action, _catalog, static_cast<std::size_t>(_config.slate_size));

        const Eigen::VectorXf state = _model->encode_state(_obs);
        uirm::BehaviorLikelihood<float> likelihood;
        likelihood.probs = _model->probabilities(state, action);
        StepResult result;
        result.feedback.immediate = uirm::sample_feedback(likelihood, _model->schema(), _feedback_rng);

        const Reward reward = reward_func(result.feedback.immediate, _model->schema(), _r_max);
        result.feedback.raw_reward = reward.raw;
        result.feedback.reward = reward.normalized;

        ++_step_in_session;
        _session_reward_sum += reward.normalized;
        const TemperUpdate tu = update_temper_and_leave(_temper, _step_in_session, reward.normalized, _config);
        _temper = tu.temper;
        const bool leave = _config.mode == TaskMode::request || tu.leave;
        result.feedback.leave = leave;
        if (leave) {
            const double signal
                = _retention->config().session_mean_reward ? _session_reward_sum / static_cast<double>(_step_in_session) : reward.normalized;
            result.info.p_ret = _retention->probability(state, signal);
            result.feedback.return_day = sample_return_day(result.info.p_ret, _config.max_return_day, _return_rng);
        }

        for (std::size_t k = 0; k < action.items.size(); ++k) {
            BehaviorBits bits = 0;
            for (Eigen::Index b = 0; b < result.feedback.immediate.rows(); ++b)
                if (result.feedback.immediate(b, static_cast<Eigen::Index>(k)))
                    bits |= BehaviorBits{1} << b;
            _obs.push(action.items[k], bits);
        }

        auto& rec = result.info.record;
        rec.episode = _episode;
        rec.session_index = _session_index;
        rec.step = _step_in_session;
        rec.user = _user;
        rec.slate = action.items;
        rec.feedback = result.feedback.immediate;
        rec.raw_reward = reward.raw;
        rec.reward = reward.normalized;
        rec.temper = _temper;
        rec.leave = leave;
        rec.return_day = result.feedback.return_day;

        result.info.user = _user;
        result.info.session_index = _session_index;
        result.info.step_in_session = _step_in_session;
        result.info.temper = _temper;

        switch (_config.mode) {
        case TaskMode::request:
        case TaskMode::whole_session:
            _done = leave;
            break;
        case TaskMode::cross_session:
            if (leave) {
                if (_session_index + 1 >= _config.max_sessions) {
                    _done = true;
                } else {
                    _returns.push_back(result.feedback.return_day);
                    _day += result.feedback.return_day;
                    ++_session_index;
                    _step_in_session = 0;
                    _session_reward_sum = 0.0;
                    _temper = _config.initial_temper();
                }
            }
            break;
        }
        result.info.day = _day;
        result.info.inter_session_returns = _returns;
        result.done = _done;
        result.observation = _obs;
        return result;
    }

    std::vector<std::uint64_t> BatchEnvironment::lane_seeds(std::uint64_t master, std::size_t lanes)
    {
        std::vector<std::uint64_t> seeds;
        for (std::size_t i = 0; i < lanes; ++i)
            seeds.push_back(i == 0 ? master : derive_seed(master, "env.lane", i));
        return seeds;
    }

    BatchEnvironment::BatchEnvironment(const EnvConfig& config, std::size_t lanes, std::shared_ptr<const ResponseModel> model,
        std::shared_ptr<const UserPool> users, std::shared_ptr<const RetentionModel> retention)
        : BatchEnvironment(config, lane_seeds(config.seed, lanes), std::move(model), std::move(users), std::move(retention))
    {
    }

    BatchEnvironment::BatchEnvironment(const EnvConfig& config, const std::vector<std::uint64_t>& seeds,
        std::shared_ptr<const ResponseModel> model, std::shared_ptr<const UserPool> users, std::shared_ptr<const RetentionModel> retention)
    {
        if (seeds.empty())
            throw ConfigError("batch environment: at least one lane");
        for (auto seed : seeds) {
            EnvConfig lane = config;
            lane.seed = seed;
            _lanes.emplace_back(lane, model, users, retention);
            _lanes.back().reset();
        }
    }

    std::vector<Observation> BatchEnvironment::observations() const
    {
        std::vector<Observation> out;
        for (const auto& lane : _lanes)
            out.push_back(lane.observation());
        return out;
    }

    std::vector<StepResult> BatchEnvironment::step(const std::vector<SlateAction>& actions)
    {
        if (actions.size() != _lanes.size())
            throw EnvironmentError("batch environment: expected " + std::to_string(_lanes.size()) + " actions, got "
                + std::to_string(actions.size()));
        std::vector<StepResult> out;
        out.reserve(_lanes.size());
        const auto n = static_cast<std::int64_t>(_lanes.size());
        for (std::size_t i = 0; i < _lanes.size(); ++i) {
            out.push_back(_lanes[i].step(actions[i]));
            out.back().info.record.episode = out.back().info.record.episode * n + static_cast<std::int64_t>(i);
            if (out.back().done)
                _lanes[i].reset();
        }
        return out;
    }

    void TrajectoryLogger::log(const TrajectoryStep& step)
    {
        write_trajectory_jsonl(_out, Trajectory{step});
    }

} // namespace slatesim::env
