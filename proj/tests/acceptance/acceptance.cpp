// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as arguments to run a
// subset, e.g. `acceptance 2 4`.

#include <slatesim/agents/actor_critic.hpp>
#include <slatesim/agents/cem.hpp>
#include <slatesim/agents/cf.hpp>
#include <slatesim/agents/nets.hpp>
#include <slatesim/agents/training.hpp>
#include <slatesim/core/geometric.hpp>
#include <slatesim/data/synthetic.hpp>
#include <slatesim/harness/experiment.hpp>
#include <slatesim/metrics/metrics.hpp>
#include <slatesim/nn/grad_check.hpp>
#include <slatesim/uirm/training.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <tuple>

#ifndef SLATESIM_SOURCE_DIR
#define SLATESIM_SOURCE_DIR "."
#endif

using namespace slatesim;
namespace fs = std::filesystem;

namespace {

    struct Outcome {
        bool pass = false;
        std::string detail;
    };

    template <typename... Args>
    std::string fmt(const char* pattern, Args... args)
    {
        char buf[1024];
        std::snprintf(buf, sizeof buf, pattern, args...);
        return buf;
    }

    fs::path scratch(const std::string& name)
    {
        const fs::path p = fs::temp_directory_path() / ("slatesim_acceptance_" + name);
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }

    std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }

    Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng)
    {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m(i) = standard_normal(rng);
        return m;
    }

    /// Same behavior probabilities for every item and state.
    class ConstantResponse final : public env::ResponseModel {
    public:
        ConstantResponse(Eigen::VectorXf probs, int items) : _schema(BehaviorSchema::kuairand()), _probs(std::move(probs)), _items(items)
        {
            Rng rng(3);
            _emb = gaussian(items, 4, rng).cast<float>();
        }
        const BehaviorSchema& schema() const override { return _schema; }
        int item_count() const override { return _items; }
        Eigen::Index state_dim() const override { return 1; }
        Eigen::VectorXf encode_state(const Observation&) const override { return Eigen::VectorXf::Zero(1); }
        Eigen::MatrixXf probabilities(const Eigen::VectorXf&, const SlateAction& slate) const override
        {
            return _probs.replicate(1, static_cast<Eigen::Index>(slate.size()));
        }
        Eigen::MatrixXf item_embeddings() const override { return _emb; }

    private:
        BehaviorSchema _schema;
        Eigen::VectorXf _probs;
        int _items;
        Eigen::MatrixXf _emb;
    };

    std::shared_ptr<env::UserPool> single_user()
    {
        auto pool = std::make_shared<env::UserPool>();
        pool->profiles.push_back({0, Eigen::VectorXf::Zero(2)});
        pool->prefixes.emplace_back();
        return pool;
    }

    std::shared_ptr<env::RetentionModel> frozen_retention(std::optional<double> p_ret)
    {
        Rng rng(1);
        env::RetentionConfig c;
        c.frozen_p_ret = p_ret;
        return std::make_shared<env::RetentionModel>(env::RetentionHead<float>(1, rng), c);
    }

    // ------------------------------------------------------------------ 1

    Outcome gradient_fidelity()
    {
        std::map<std::string, nn::GradientCheckResult> worst;
        auto record = [&](const std::string& name, const nn::GradientCheckResult& r) { worst[name] = r; };
        constexpr Eigen::Index every = 1 << 20;

        // Simulator: history encoder and behavior head, trained jointly through the request loss.
        const auto log = data::synth_generate({.users = 12, .items = 30, .days = 6, .seed = 11}).dataset;
        auto requests = uirm::build_requests(log, nullptr, 6);
        requests.resize(std::min<std::size_t>(requests.size(), 4));
        uirm::UirmConfig uc;
        uc.embedding_dim = 8;
        uc.history_length = 6;
        uc.rho = 0.3;
        Rng init(5);
        auto sim = uirm::UirmModel<float>(uc, log.items.size, log.users.front().feature_dim(), log.schema, init).cast<double>();
        Rng rng(6);
        record("simulator", nn::gradient_check(
                                sim.params,
                                [&](nn::ParamStore<double>&, bool g) {
                                    return uirm::request_batch_loss<double>(sim, requests, nn::ForwardMode::eval(), g);
                                },
                                rng, every));

        env::RetentionHead<double> head = env::RetentionHead<float>(6, rng).cast<double>();
        const Eigen::MatrixXd states = gaussian(10, 6, rng);
        std::vector<std::uint8_t> labels;
        for (int i = 0; i < 10; ++i)
            labels.push_back(uniform01(rng) < 0.5);
        record("retention head", nn::gradient_check(
                                     head.params, [&](nn::ParamStore<double>&, bool g) { return env::retention_head_loss<double>(head, states, labels, g); },
                                     rng, every));

        auto cf = agents::make_cf_model(log, agents::CfConfig{4, 1, 64, 5e-4, 0.0, 3}).cast<double>();
        const auto examples = agents::click_examples(log);
        std::vector<std::size_t> rows(std::min<std::size_t>(16, examples.items.size()));
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        cf.known_items[static_cast<std::size_t>(examples.items[0])] = 0;
        record("cf towers",
            nn::gradient_check(cf.params, [&](nn::ParamStore<double>&, bool g) { return agents::cf_loss(cf, examples, rows, g); }, rng, every));

        const Eigen::MatrixXd s = gaussian(8, 6, rng);
        const Eigen::MatrixXd a = gaussian(8, 3, rng).array().tanh();
        const Eigen::VectorXd y = gaussian(8, 1, rng).col(0);
        agents::ActorNet<double> actor = agents::ActorNet<float>(6, 3, rng).cast<double>();
        agents::CriticNet<double> critic = agents::CriticNet<float>(6, 3, rng).cast<double>();
        agents::CriticNet<double> value = agents::CriticNet<float>(6, 0, rng, "value").cast<double>();
        const Eigen::MatrixXd none(8, 0);
        record("critic (Q)", nn::gradient_check(
                                 critic.params, [&](nn::ParamStore<double>&, bool g) { return agents::critic_loss(critic, s, a, y, g); }, rng, every));
        record("critic (V)", nn::gradient_check(
                                 value.params, [&](nn::ParamStore<double>&, bool g) { return agents::critic_loss(value, s, none, y, g); }, rng, every));
        record("actor (deterministic)", nn::gradient_check(
                                            actor.params,
                                            [&](nn::ParamStore<double>&, bool g) {
                                                const double l = agents::deterministic_actor_loss(actor, critic, s, g);
                                                critic.params.zero_grad();
                                                return l;
                                            },
                                            rng, every));
        agents::GaussianPolicy<double> policy = agents::GaussianPolicy<float>(6, 3, 0.3, rng).cast<double>();
        record("actor (gaussian)", nn::gradient_check(
                                       policy.actor.params,
                                       [&](nn::ParamStore<double>&, bool g) { return agents::policy_gradient_loss(policy, s, a, y, 0.01, g); },
                                       rng, every));

        bool pass = true;
        std::string detail;
        for (const auto& [name, r] : worst) {
            pass = pass && r.max_relative_error < 1e-4 && r.coordinates > 0;
            detail += fmt("%s %.2e over %ld coords; ", name.c_str(), r.max_relative_error, static_cast<long>(r.coordinates));
        }
        return {pass, detail + "bound 1e-4"};
    }

    // ------------------------------------------------------------------ 2

    Outcome geometric_retention()
    {
        env::EnvConfig c;
        c.mode = env::TaskMode::request;
        c.slate_size = 3;
        c.max_step = 5;
        c.max_return_day = 10;
        c.seed = 17;
        Eigen::VectorXf probs = Eigen::VectorXf::Constant(7, 0.3f);
        env::Environment e(c, std::make_shared<ConstantResponse>(probs, 10), single_user(), frozen_retention(0.4));
        const SlateAction slate{{0, 1, 2}};

        constexpr int sessions = 100'000;
        std::vector<double> freq(10, 0.0);
        for (int i = 0; i < sessions; ++i) {
            e.reset();
            const auto r = e.step(slate);
            if (!r.done || r.feedback.return_day < 1 || r.feedback.return_day > 10)
                return {false, fmt("request step %d did not end with a return day in 1..10", i)};
            freq[static_cast<std::size_t>(r.feedback.return_day - 1)] += 1.0 / sessions;
        }
        double worst = 0.0;
        std::string detail;
        for (int d = 1; d <= 10; ++d) {
            const double expected = d < 10 ? std::pow(0.6, d - 1) * 0.4 : std::pow(0.6, 9);
            worst = std::max(worst, std::abs(freq[static_cast<std::size_t>(d - 1)] - expected));
            detail += fmt("%d:%.4f/%.4f ", d, freq[static_cast<std::size_t>(d - 1)], expected);
        }
        return {worst <= 0.01, fmt("max deviation %.4f; observed/expected ", worst) + detail};
    }

    // ------------------------------------------------------------------ 3

    Outcome uirm_learnability()
    {
        data::SyntheticConfig sc;
        sc.users = 2000;
        sc.items = 500;
        sc.days = 11;
        sc.seed = 41;
        const auto log = data::synth_generate(sc).dataset;
        const auto split = data::split_train_test(log, 0.8);
        uirm::UirmConfig uc;
        const auto train = uirm::build_requests(split.train, nullptr, uc.history_length);
        const auto test = uirm::build_requests(split.test, &split.train, uc.history_length);

        Rng init(42);
        uirm::UirmModel<float> model(uc, log.items.size, log.users.front().feature_dim(), log.schema, init);
        uirm::PretrainConfig pc;
        pc.epochs = 10;
        pc.seed = 43;
        pc.validation = test;
        pc.stop_at_click_auc = 0.85;
        const auto result = uirm::pretrain(model, train, pc);

        const int click = agents::click_behavior(log.schema);
        double best = 0.0;
        std::string trace;
        for (const auto& epoch : result.epoch_auc) {
            const auto v = epoch[static_cast<std::size_t>(click)].value_or(0.0);
            best = std::max(best, v);
            trace += fmt("%.3f ", v);
        }
        return {best >= 0.85 && result.epoch_auc.size() <= 10 && !result.diverged,
            fmt("%zu interactions, %zu epochs, held-out click AUC per epoch: ", log.records.size(), result.epoch_auc.size()) + trace};
    }

    // ------------------------------------------------------------------ 4

    int recurrence_depth(double r, int max_step, double rate, double threshold)
    {
        double temper = max_step;
        for (int t = 1;; ++t) {
            temper -= rate * (1.0 - r);
            if (temper <= threshold || t >= max_step)
                return t;
        }
    }

    Outcome leave_dynamics()
    {
        const std::vector<std::pair<double, int>> cases = {{0.0, 0}, {0.5, 3}, {1.0, 6}};
        const std::vector<int> expected = {14, 15, 15};
        bool pass = true;
        std::string detail;
        for (std::size_t i = 0; i < cases.size(); ++i) {
            const auto [r, on] = cases[i];
            Eigen::VectorXf probs = Eigen::VectorXf::Zero(7);
            probs.head(on).setOnes();
            env::EnvConfig c;
            c.mode = env::TaskMode::whole_session;
            c.slate_size = 4;
            c.max_step = 15;
            c.temper_rate = 1.0;
            c.leave_threshold = 1.0;
            env::Environment e(c, std::make_shared<ConstantResponse>(probs, 10), single_user(), frozen_retention(0.5));
            e.reset();
            int depth = 0;
            bool exact = true;
            for (bool done = false; !done;) {
                const auto res = e.step(SlateAction{{0, 1, 2, 3}});
                exact = exact && res.feedback.reward == r;
                done = res.done;
                ++depth;
            }
            const int analytic = recurrence_depth(r, 15, 1.0, 1.0);
            pass = pass && exact && depth == analytic && depth == expected[i];
            detail += fmt("r=%.1f depth %d (recurrence %d, expected %d)%s; ", r, depth, analytic, expected[i], exact ? "" : " reward mismatch");
        }
        return {pass, detail};
    }

    // ------------------------------------------------------------------ 5

    double oracle_cosine(const Eigen::MatrixXf& e, ItemId a, ItemId b)
    {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (Eigen::Index j = 0; j < e.cols(); ++j) {
            const double x = e(a, j), y = e(b, j);
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        return dot / std::sqrt(na * nb);
    }

    Outcome metric_oracles()
    {
        Rng rng(2718);
        int mismatches = 0;
        std::string first;
        double worst = 0.0;
        auto close = [&](const char* what, double got, double want, int instance) {
            const double diff = std::abs(got - want);
            worst = std::max(worst, diff);
            if (diff <= 1e-10)
                return;
            if (mismatches++ == 0)
                first = fmt("%s on instance %d: %.17g vs %.17g", what, instance, got, want);
        };

        for (int inst = 0; inst < 1000; ++inst) {
            const int items = 2 + static_cast<int>(uniform_index(rng, 29));
            const Eigen::MatrixXf emb = gaussian(items, 1 + static_cast<Eigen::Index>(uniform_index(rng, 6)), rng).cast<float>();
            const BehaviorSchema schema = uniform01(rng) < 0.5 ? BehaviorSchema::kuairand() : BehaviorSchema::movielens();

            std::vector<SlateAction> slates;
            std::vector<BitMatrix> feedback;
            const int n = 1 + static_cast<int>(uniform_index(rng, 10));
            for (int s = 0; s < n; ++s) {
                const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(std::min(6, items))));
                std::vector<ItemId> pool(static_cast<std::size_t>(items));
                std::iota(pool.begin(), pool.end(), 0);
                for (int i = 0; i < k; ++i)
                    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(i) + uniform_index(rng, pool.size() - static_cast<std::size_t>(i))]);
                slates.push_back({{pool.begin(), pool.begin() + k}});
                BitMatrix fb(schema.size(), k);
                for (Eigen::Index c = 0; c < fb.size(); ++c)
                    fb(c) = uniform01(rng) < 0.3;
                feedback.push_back(fb);
            }

            // Coverage: distinct ids after sort/unique.
            std::vector<ItemId> all;
            for (const auto& s : slates)
                all.insert(all.end(), s.items.begin(), s.items.end());
            std::sort(all.begin(), all.end());
            const auto distinct = static_cast<int>(std::unique(all.begin(), all.end()) - all.begin());
            if (metrics::coverage(slates) != distinct && mismatches++ == 0)
                first = fmt("coverage on instance %d", inst);

            // ILD: unordered pairs, skipping single-item slates.
            double ild_sum = 0.0;
            int ild_slates = 0;
            for (const auto& s : slates) {
                if (s.items.size() < 2)
                    continue;
                double acc = 0.0;
                int pairs = 0;
                for (std::size_t i = 0; i < s.items.size(); ++i)
                    for (std::size_t j = i + 1; j < s.items.size(); ++j, ++pairs)
                        acc += 1.0 - oracle_cosine(emb, s.items[i], s.items[j]);
                ild_sum += acc / pairs;
                ++ild_slates;
            }
            close("ild", metrics::ild(slates, emb), ild_slates ? ild_sum / ild_slates : 0.0, inst);

            // L-reward: per-behavior counts times weights, over slate length.
            double lr_sum = 0.0, lr_max = -1e300;
            for (const auto& fb : feedback) {
                double r = 0.0;
                for (int b = 0; b < schema.size(); ++b)
                    r += schema.weights()[static_cast<std::size_t>(b)] * static_cast<double>(fb.row(b).cast<int>().sum());
                r /= static_cast<double>(fb.cols());
                lr_sum += r;
                lr_max = std::max(lr_max, r);
            }
            const auto lr = metrics::l_reward(feedback, schema);
            close("avg l-reward", lr.avg, lr_sum / n, inst);
            close("max l-reward", lr.max, lr_max, inst);

            // Trajectory: random sessions, shuffled.
            Trajectory traj;
            const int episodes = 1 + static_cast<int>(uniform_index(rng, 4));
            for (int ep = 0; ep < episodes; ++ep) {
                const int sessions = 1 + static_cast<int>(uniform_index(rng, 3));
                for (int s = 0; s < sessions; ++s) {
                    const int steps = 1 + static_cast<int>(uniform_index(rng, 6));
                    for (int t = 1; t <= steps; ++t) {
                        TrajectoryStep st;
                        st.episode = ep;
                        st.session_index = s;
                        st.step = t;
                        st.reward = uniform01(rng);
                        st.leave = t == steps;
                        st.return_day = st.leave ? 1 + static_cast<int>(uniform_index(rng, 10)) : 0;
                        traj.push_back(st);
                    }
                }
            }
            for (std::size_t i = traj.size(); i > 1; --i)
                std::swap(traj[i - 1], traj[uniform_index(rng, i)]);

            auto sorted = traj;
            std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return std::tie(a.episode, a.session_index) < std::tie(b.episode, b.session_index); });
            double depth_sum = 0.0, total_sum = 0.0, reward_sum = 0.0, day_sum = 0.0;
            int groups = 0, leaves = 0, next_day = 0;
            for (std::size_t i = 0; i < sorted.size(); ++groups) {
                std::size_t j = i;
                double total = 0.0;
                while (j < sorted.size() && sorted[j].episode == sorted[i].episode && sorted[j].session_index == sorted[i].session_index)
                    total += sorted[j++].reward;
                depth_sum += static_cast<double>(j - i);
                total_sum += total;
                i = j;
            }
            for (const auto& st : traj) {
                reward_sum += st.reward;
                if (st.leave) {
                    ++leaves;
                    day_sum += st.return_day;
                    next_day += st.return_day == 1;
                }
            }
            const auto sm = metrics::session_metrics(traj);
            close("depth", sm.depth, depth_sum / groups, inst);
            close("total reward", sm.total_reward, total_sum / groups, inst);
            close("avg reward", sm.avg_reward, reward_sum / static_cast<double>(traj.size()), inst);
            const auto rm = metrics::retention_metrics(traj);
            close("return day", rm.return_day, day_sum / leaves, inst);
            close("user retention", rm.user_retention, static_cast<double>(next_day) / leaves, inst);

            // AUC: pairwise comparison with half credit for ties.
            const int m = 2 + static_cast<int>(uniform_index(rng, 40));
            std::vector<double> scores;
            std::vector<std::uint8_t> labels;
            const bool coarse = uniform01(rng) < 0.5;
            for (int i = 0; i < m; ++i) {
                scores.push_back(coarse ? std::round(uniform01(rng) * 5.0) / 5.0 : uniform01(rng));
                labels.push_back(uniform01(rng) < 0.4);
            }
            double wins = 0.0, pos = 0.0, neg = 0.0;
            for (int i = 0; i < m; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                (labels[ui] ? pos : neg) += 1.0;
                if (!labels[ui])
                    continue;
                for (int j = 0; j < m; ++j) {
                    const auto uj = static_cast<std::size_t>(j);
                    if (!labels[uj])
                        wins += scores[ui] > scores[uj] ? 1.0 : scores[ui] == scores[uj] ? 0.5 : 0.0;
                }
            }
            const auto got = metrics::auc(scores, labels);
            if (pos == 0.0 || neg == 0.0) {
                if (got.has_value() && mismatches++ == 0)
                    first = fmt("auc defined for a single-class instance %d", inst);
            } else if (!got) {
                if (mismatches++ == 0)
                    first = fmt("auc missing on instance %d", inst);
            } else {
                close("auc", *got, wins / (pos * neg), inst);
            }
        }
        return {mismatches == 0,
            fmt("1000 instances, %d mismatches, max real deviation %.2e", mismatches, worst) + (first.empty() ? "" : "; first: " + first)};
    }

    // ------------------------------------------------------------------ 6, 7

    harness::ExperimentConfig agent_world(env::TaskMode mode)
    {
        harness::ExperimentConfig c = harness::parse_config(R"(
run.allow_off_grid = true
run.seed = 2024
[data]
users = 300
items = 100
days = 30
[sim]
embedding_dim = 16
history_length = 20
epochs = 5
learning_rate = 5e-3
[env]
K = 10
max_step = 10
max_sessions = 3
)");
        c.env.mode = mode;
        return c;
    }

    agents::EnvSetup build_world(const harness::ExperimentConfig& c, const fs::path& dir)
    {
        harness::stage_ingest(c, c.seed, dir);
        harness::stage_pretrain(c, c.seed, dir);
        return harness::load_environment(c, dir);
    }

    agents::StateFeaturizer featurizer_of(const agents::EnvSetup& setup)
    {
        return agents::StateFeaturizer(setup.model->item_embeddings(), setup.users->profiles.front().feature_dim(), setup.model->schema());
    }

    double score(agents::Agent& agent, const agents::EnvSetup& setup, std::uint64_t seed, int episodes)
    {
        return agents::episode_score(agents::evaluate_agent(agent, setup, episodes, seed), setup.config.mode);
    }

    template <typename AgentT>
    double trained_score(const agents::EnvSetup& setup, std::uint64_t seed, long updates, std::uint64_t eval_seed, int episodes)
    {
        const auto featurizer = featurizer_of(setup);
        agents::ActorCriticConfig ac = harness::ExperimentConfig().agent.ac;
        ac.slate_size = setup.config.slate_size;
        ac.seed = derive_seed(seed, "agent");
        AgentT agent(featurizer, setup.catalog(), ac);
        env::BatchEnvironment envs(setup.config, env::BatchEnvironment::lane_seeds(derive_seed(seed, "env.train"), 64), setup.model, setup.users,
            setup.retention);
        agents::TrainLoopConfig loop;
        loop.updates = updates;
        loop.signal = agents::default_signal(setup.config.mode);
        agents::train_agent(agent, envs, featurizer, loop);
        return score(agent, setup, eval_seed, episodes);
    }

    Outcome agent_ordering()
    {
        const auto c = agent_world(env::TaskMode::whole_session);
        const auto setup = build_world(c, scratch("ordering"));
        const auto featurizer = featurizer_of(setup);
        int ddpg_wins = 0, td3_wins = 0;
        std::string detail;
        for (int s = 0; s < 5; ++s) {
            const std::uint64_t seed = harness::replicate_seed(c, s);
            const std::uint64_t eval_seed = derive_seed(seed, "eval");
            agents::RandomAgent random(setup.catalog(), setup.config.slate_size, featurizer, derive_seed(seed, "agent.random"));
            const double r = score(random, setup, eval_seed, 100);
            const double d = trained_score<agents::DdpgAgent>(setup, seed, 2000, eval_seed, 100);
            const double t = trained_score<agents::Td3Agent>(setup, seed, 2000, eval_seed, 100);
            ddpg_wins += d >= 1.2 * r;
            td3_wins += t >= 1.2 * r;
            detail += fmt(" [random %.3f ddpg %.3f td3 %.3f]", r, d, t);
        }
        return {ddpg_wins >= 4 && td3_wins >= 4,
            fmt("mean total session reward, >= +20%% in ddpg %d/5, td3 %d/5 seeds;", ddpg_wins, td3_wins) + detail};
    }

    Outcome retention_direction()
    {
        auto c = agent_world(env::TaskMode::cross_session);
        c.env.max_step = 5;
        auto setup = build_world(c, scratch("retention"));
        auto retention = std::make_shared<env::RetentionModel>(*setup.retention);
        retention->config().frozen_personal_bias = 0.1;
        retention->config().global_bias = 0.0;
        setup.retention = retention;
        const auto featurizer = featurizer_of(setup);

        int td3_wins = 0, cem_wins = 0;
        std::string detail;
        for (int s = 0; s < 5; ++s) {
            const std::uint64_t seed = harness::replicate_seed(c, s);
            const std::uint64_t eval_seed = derive_seed(seed, "eval");
            agents::RandomAgent random(setup.catalog(), setup.config.slate_size, featurizer, derive_seed(seed, "agent.random"));
            const double r = -score(random, setup, eval_seed, 200);
            const double t = -trained_score<agents::Td3Agent>(setup, seed, 5000, eval_seed, 200);

            agents::CemConfig cc;
            cc.seed = derive_seed(seed, "cem");
            const auto objective = agents::linear_policy_objective(setup, featurizer, 32, derive_seed(seed, "cem.eval"));
            const Eigen::VectorXd init = Eigen::VectorXd::Zero(agents::LinearPolicyAgent::param_count(featurizer.dim(), setup.catalog().embedding_dim()));
            const auto result = agents::cem_optimize(objective, init, cc);
            const double first = -result.iterations.front().population_mean;
            const double last = -result.iterations.back().population_mean;
            agents::LinearPolicyAgent cem(featurizer, setup.catalog(), setup.config.slate_size, result.mean);
            const double held_out = -score(cem, setup, eval_seed, 200);

            td3_wins += t <= r - 0.2;
            cem_wins += last <= first - 0.1;
            detail += fmt(" [random %.3f td3 %.3f | cem pop0 %.3f popN %.3f mean-policy %.3f]", r, t, first, last, held_out);
        }
        return {td3_wins >= 4 && cem_wins >= 4,
            fmt("mean return day, td3 <= random - 0.2 in %d/5, cem final <= iteration-0 - 0.1 in %d/5 seeds;", td3_wins, cem_wins) + detail};
    }

    // ------------------------------------------------------------------ 8

    Outcome determinism()
    {
        const fs::path cfg = fs::path(SLATESIM_SOURCE_DIR) / "tools" / "smoke.cfg";
        auto a = harness::load_config(cfg);
        auto b = a;
        a.out = scratch("det_a");
        b.out = scratch("det_b");
        harness::run_experiment(a);
        harness::run_experiment(b);

        int compared = 0;
        std::string differing;
        for (const auto& entry : fs::recursive_directory_iterator(a.out)) {
            if (!entry.is_regular_file())
                continue;
            const auto rel = fs::relative(entry.path(), a.out);
            const auto name = rel.filename().string();
            if (name != harness::files::report && name != harness::files::table && name != harness::files::trajectory)
                continue;
            ++compared;
            if (slurp(entry.path()) != slurp(b.out / rel))
                differing += rel.generic_string() + " ";
        }
        return {compared > 0 && differing.empty(),
            fmt("%d metric files compared across two runs of %s", compared, cfg.filename().string().c_str())
                + (differing.empty() ? std::string(", all byte-identical") : "; differing: " + differing)};
    }

    // ------------------------------------------------------------------ 9

    data::ColumnSpec log_columns()
    {
        data::ColumnSpec c;
        c.behaviors = {"is_like", "is_hate"};
        return c;
    }

    std::string random_csv(std::size_t records, int users, int items, std::uint64_t seed)
    {
        Rng rng(seed);
        std::string csv = "user_id,video_id,time_ms,date,is_like,is_hate\n";
        std::map<int, std::int64_t> clock;
        for (std::size_t r = 0; r < records; ++r) {
            const int u = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(users)));
            const int i = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(items)));
            clock[u] += 1 + static_cast<std::int64_t>(uniform_index(rng, 20'000'000));
            const int like = uniform01(rng) < 0.4;
            const int hate = uniform01(rng) < 0.05;
            csv += fmt("%d,%d,%lld,%lld,%d,%d\n", 7000 + 3 * u, 90000 + 11 * i, static_cast<long long>(clock[u]),
                static_cast<long long>(clock[u] / 86'400'000), like, hate);
        }
        return csv;
    }

    using RecordKey = std::tuple<std::int64_t, std::int64_t, std::int64_t>;

    RecordKey key_of(const data::LogDataset& d, const InteractionRecord& r)
    {
        return {d.user_original_ids[static_cast<std::size_t>(r.user)], d.item_original_ids[static_cast<std::size_t>(r.item)], r.timestamp};
    }

    Outcome data_pipeline()
    {
        std::vector<std::string> failures;
        const std::vector<std::tuple<int, int, int>> shapes = {{50, 120, 5}, {400, 800, 3}, {25, 60, 20}};
        std::uint64_t seed = 100;
        for (const auto& [users, items, k] : shapes) {
            const std::string csv = random_csv(10'000, users, items, seed++);
            const auto data = data::parse_log_text(csv, log_columns(), BehaviorSchema::movielens()).dataset;
            if (data.records.size() != 10'000)
                failures.push_back("parse record count");

            std::map<std::int64_t, int> item_count;
            for (const auto& r : data.records)
                ++item_count[data.item_original_ids[static_cast<std::size_t>(r.item)]];
            std::vector<RecordKey> want;
            for (const auto& r : data.records)
                if (item_count[std::get<1>(key_of(data, r))] >= k)
                    want.push_back(key_of(data, r));
            const auto core = data::kcore_filter(data, k);
            std::vector<RecordKey> got;
            for (const auto& r : core.records)
                got.push_back(key_of(core, r));
            if (got != want)
                failures.push_back(fmt("k-core k=%d", k));

            const auto seg = data::segment_sessions(data);
            std::map<std::pair<std::int64_t, std::int32_t>, std::size_t> groups;
            for (const auto& r : data.records)
                ++groups[{data.user_original_ids[static_cast<std::size_t>(r.user)], r.date}];
            std::map<std::pair<std::int64_t, std::int32_t>, std::size_t> sessions;
            std::size_t covered = 0;
            bool members_ok = true;
            for (std::size_t u = 0; u < seg.sessions.size(); ++u)
                for (const auto& s : seg.sessions[u]) {
                    for (std::size_t i = s.begin; i < s.end; ++i)
                        members_ok = members_ok && seg.records[i].date == s.date && seg.records[i].user == static_cast<UserId>(u);
                    sessions[{seg.user_original_ids[u], s.date}] += s.size();
                    covered += s.size();
                }
            if (!members_ok || sessions != groups || covered != seg.records.size())
                failures.push_back("segmentation group-by");

            const auto split = data::split_train_test(seg, 0.8);
            std::map<UserId, std::size_t> n, train_n;
            std::map<UserId, std::int64_t> last_train, first_test;
            for (const auto& r : seg.records)
                ++n[r.user];
            for (const auto& r : split.train.records) {
                ++train_n[r.user];
                last_train[r.user] = std::max(last_train[r.user], r.timestamp);
            }
            for (const auto& r : split.test.records)
                first_test[r.user] = first_test.count(r.user) ? std::min(first_test[r.user], r.timestamp) : r.timestamp;
            bool split_ok = split.train.records.size() + split.test.records.size() == seg.records.size();
            for (const auto& [u, count] : n) {
                const auto want_train = count < 2 ? count : static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(count) - 1e-9));
                split_ok = split_ok && train_n[u] == want_train;
                if (first_test.count(u))
                    split_ok = split_ok && last_train[u] < first_test[u];
            }
            if (!split_ok)
                failures.push_back("8:2 split counts");

            for (const auto* d : {&data, &core, &seg, &split.train, &split.test})
                if (data::deserialize_dataset(data::serialize_dataset(*d)) != *d)
                    failures.push_back("binary round trip");
            const fs::path file = scratch("pipeline") / "log.bin";
            data::write_dataset(file, seg);
            if (data::read_dataset(file) != seg)
                failures.push_back("file round trip");
            const auto reparsed = data::parse_log_text(data::log_to_csv(seg, log_columns()), log_columns(), seg.schema).dataset;
            if (data::segment_sessions(reparsed) != seg)
                failures.push_back("csv round trip");
        }
        std::string detail = "3 logs of 10000 records; k-core, sessions, split, binary/file/csv round trips";
        for (const auto& f : failures)
            detail += "; mismatch: " + f;
        return {failures.empty(), detail};
    }

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient fidelity", gradient_fidelity},
        {"geometric retention", geometric_retention},
        {"simulator learnability", uirm_learnability},
        {"leave dynamics", leave_dynamics},
        {"metric oracles", metric_oracles},
        {"agent sanity ordering", agent_ordering},
        {"retention optimization direction", retention_direction},
        {"determinism", determinism},
        {"data pipeline", data_pipeline},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i)
        only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id))
            continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !out.pass;
        std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << id << " " << criteria[i].first << " (" << fmt("%.1f s", secs)
                  << "): " << out.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
