#include <slatesim/harness/experiment.hpp>

#include <slatesim/data/dataset.hpp>
#include <slatesim/uirm/training.hpp>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <ostream>

namespace slatesim::harness {

    namespace fs = std::filesystem;
    using nlohmann::ordered_json;

    namespace {

        BehaviorSchema schema_of(const ExperimentConfig& c)
        {
            return c.data.schema == "movielens" ? BehaviorSchema::movielens() : BehaviorSchema::kuairand();
        }

        double reward_scale(const ExperimentConfig& c, const BehaviorSchema& schema)
        {
            return c.env.reward_scale > 0.0 ? c.env.reward_scale : schema.max_item_reward();
        }

        void write_text(const fs::path& path, const std::string& text)
        {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out)
                throw Error("cannot write " + path.string());
            out << text;
            if (!out)
                throw Error("write failed for " + path.string());
        }

        std::string read_text(const fs::path& path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw DataError("missing artifact " + path.string());
            return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        }

        template <typename Fn>
        auto in_stage(const std::string& stage, Fn&& fn)
        {
            try {
                return fn();
            } catch (const StageError&) {
                throw;
            } catch (const std::exception& e) {
                throw StageError(stage, e.what());
            }
        }

        void save_retention(const fs::path& path, const env::RetentionModel& model)
        {
            const auto& c = model.config();
            nlohmann::json meta = {{"kind", "retention"}, {"state_dim", model.head().state_dim}, {"lambda1", c.lambda1},
                {"lambda2", c.lambda2}, {"global_bias", c.global_bias}, {"p_min", c.p_min}, {"p_max", c.p_max}};
            nn::write_checkpoint(path, model.head().params, meta);
        }

        env::RetentionModel load_retention(const fs::path& path)
        {
            const auto ckpt = nn::read_checkpoint(path);
            if (ckpt.meta.value("kind", "") != "retention")
                throw DataError(path.string() + " is not a retention checkpoint");
            Rng rng(0);
            env::RetentionHead<float> head(ckpt.meta.at("state_dim").get<Eigen::Index>(), rng);
            nn::load_into(ckpt, "", head.params);
            env::RetentionConfig c;
            c.lambda1 = ckpt.meta.at("lambda1").get<double>();
            c.lambda2 = ckpt.meta.at("lambda2").get<double>();
            c.global_bias = ckpt.meta.at("global_bias").get<double>();
            c.p_min = ckpt.meta.at("p_min").get<double>();
            c.p_max = ckpt.meta.at("p_max").get<double>();
            return env::RetentionModel(std::move(head), c);
        }

        agents::StateFeaturizer featurizer_for(const agents::EnvSetup& setup)
        {
            const Eigen::Index f = setup.users->profiles.empty() ? 0 : setup.users->profiles.front().feature_dim();
            return agents::StateFeaturizer(setup.model->item_embeddings(), f, setup.model->schema());
        }

        bool is_actor_critic(const std::string& name) { return name == "a2c" || name == "ddpg" || name == "td3"; }

    } // namespace

    fs::path output_root(const ExperimentConfig& config)
    {
        if (!config.out.empty())
            return config.out;
        if (const char* env = std::getenv("SLATESIM_OUT"); env && *env)
            return env;
        return "slatesim_out";
    }

    void stage_ingest(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir)
    {
        const BehaviorSchema schema = schema_of(config);
        data::LogDataset log;
        if (config.data.source == DataSource::synthetic) {
            data::SyntheticConfig sc;
            sc.users = config.data.users;
            sc.items = config.data.items;
            sc.days = config.data.days;
            sc.seed = derive_seed(seed, "data");
            sc.schema = schema;
            log = data::synth_generate(sc).dataset;
        } else {
            data::ColumnSpec columns;
            if (config.data.schema == "movielens")
                columns.behaviors = {"is_like", "is_hate"};
            log = data::parse_log(config.data.path, columns, schema).dataset;
        }
        if (!log.segmented())
            log = data::segment_sessions(std::move(log));
        if (config.data.kcore > 0)
            log = data::kcore_filter(log, config.data.kcore);
        if (log.records.empty())
            throw DataError("no records left after filtering");
        const auto split = data::split_train_test(log, config.data.split_ratio);
        data::write_dataset(dir / files::dataset, log);
        data::write_dataset(dir / files::train, split.train);
        data::write_dataset(dir / files::test, split.test);
    }

    void stage_pretrain(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir)
    {
        const auto train = data::read_dataset(dir / files::train);
        const auto test = data::read_dataset(dir / files::test);
        const int h = config.sim.model.history_length;
        const auto train_req = uirm::build_requests(train, nullptr, h);
        const auto test_req = uirm::build_requests(test, &train, h);

        auto model = std::make_shared<uirm::UirmModel<float>>();
        std::ofstream progress(dir / files::pretrain_log, std::ios::trunc);
        if (!config.sim.checkpoint.empty()) {
            *model = uirm::load_uirm(config.sim.checkpoint);
            if (model->item_count() != train.items.size)
                throw DataError("simulator checkpoint catalog size differs from the dataset");
        } else {
            Rng init(derive_seed(seed, "uirm.init"));
            const Eigen::Index f = train.users.empty() ? 0 : train.users.front().feature_dim();
            *model = uirm::UirmModel<float>(config.sim.model, train.items.size, f, train.schema, init);
            uirm::PretrainConfig pc;
            pc.epochs = config.sim.epochs;
            pc.batch_size = config.sim.batch_size;
            pc.learning_rate = config.sim.learning_rate;
            pc.l2 = config.sim.l2;
            pc.seed = derive_seed(seed, "uirm");
            pc.validation = test_req;
            pc.progress = &progress;
            const auto result = uirm::pretrain(*model, train_req, pc);
            if (result.diverged)
                throw Error("simulator pretraining diverged");
        }
        uirm::save_uirm(dir / files::simulator, *model);

        const auto aucs = uirm::evaluate_auc(*model, test_req);
        const int click = agents::click_behavior(train.schema);
        ordered_json summary;
        summary["click_auc"] = aucs.empty() || !aucs[static_cast<std::size_t>(click)] ? nlohmann::json(nullptr)
                                                                                    : nlohmann::json(*aucs[static_cast<std::size_t>(click)]);
        write_text(dir / "simulator.json", summary.dump(2) + "\n");

        const env::UirmResponse response(model);
        Rng init(derive_seed(seed, "retention.init"));
        env::RetentionConfig rc;
        rc.lambda1 = config.sim.lambda1;
        rc.lambda2 = config.sim.lambda2;
        env::RetentionModel retention(env::RetentionHead<float>(response.state_dim(), init), rc);
        const auto examples = env::build_retention_examples(response, train, h, config.env.max_return_day, reward_scale(config, train.schema));
        env::RetentionFitConfig fc;
        fc.epochs = config.sim.retention_epochs;
        fc.batch_size = config.sim.batch_size;
        fc.learning_rate = config.sim.learning_rate;
        fc.l2 = config.sim.l2;
        fc.seed = derive_seed(seed, "retention");
        fc.max_return_day = config.env.max_return_day;
        if (examples.states.rows() > 0)
            retention.fit(examples, fc);
        save_retention(dir / files::retention, retention);
    }

    agents::EnvSetup load_environment(const ExperimentConfig& config, const fs::path& dir)
    {
        agents::EnvSetup setup;
        setup.config = config.env;
        setup.config.history_length = config.sim.model.history_length;
        auto model = std::make_shared<uirm::UirmModel<float>>(uirm::load_uirm(dir / files::simulator));
        model->set_rho(config.sim.model.rho);
        model->set_temperature(config.sim.model.temperature);
        setup.model = std::make_shared<env::UirmResponse>(model);
        setup.users = std::make_shared<env::UserPool>(env::UserPool::from_log(data::read_dataset(dir / files::dataset), setup.config.history_length));
        setup.retention = std::make_shared<env::RetentionModel>(load_retention(dir / files::retention));
        return setup;
    }

    std::unique_ptr<agents::Agent> make_agent(const ExperimentConfig& config, const agents::EnvSetup& setup, std::uint64_t seed, const fs::path& dir)
    {
        const auto featurizer = featurizer_for(setup);
        const ItemCatalog catalog = setup.catalog();
        const std::string& name = config.agent.name;
        agents::ActorCriticConfig ac = config.agent.ac;
        ac.slate_size = config.env.slate_size;
        ac.seed = derive_seed(seed, "agent");
        if (name == "random")
            return std::make_unique<agents::RandomAgent>(catalog, config.env.slate_size, featurizer, derive_seed(seed, "agent.random"));
        if (name == "ddpg")
            return std::make_unique<agents::DdpgAgent>(featurizer, catalog, ac);
        if (name == "td3")
            return std::make_unique<agents::Td3Agent>(featurizer, catalog, ac);
        if (name == "a2c")
            return std::make_unique<agents::A2cAgent>(featurizer, catalog, ac);
        if (name == "cf") {
            agents::CfConfig cc = config.agent.cf;
            cc.seed = derive_seed(seed, "agent.cf");
            return std::make_unique<agents::CfAgent>(agents::make_cf_model(data::read_dataset(dir / files::train), cc), config.env.slate_size);
        }
        if (name == "cem") {
            const Eigen::VectorXd zero = Eigen::VectorXd::Zero(agents::LinearPolicyAgent::param_count(featurizer.dim(), catalog.embedding_dim()));
            return std::make_unique<agents::LinearPolicyAgent>(featurizer, catalog, config.env.slate_size, zero);
        }
        throw ConfigError("unknown agent '" + name + "'");
    }

    void stage_train_agent(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir)
    {
        const auto setup = load_environment(config, dir);
        auto agent = make_agent(config, setup, seed, dir);
        std::ofstream trace(dir / files::train_log, std::ios::trunc);
        const std::string& name = config.agent.name;
        nlohmann::json meta = {{"seed", seed}};

        if (is_actor_critic(name)) {
            env::EnvConfig ec = setup.config;
            env::BatchEnvironment envs(ec, env::BatchEnvironment::lane_seeds(derive_seed(seed, "env.train"), static_cast<std::size_t>(config.agent.lanes)),
                setup.model, setup.users, setup.retention);
            agents::TrainLoopConfig loop;
            loop.updates = config.agent.updates;
            loop.signal = agents::default_signal(config.env.mode);
            loop.progress = &trace;
            agents::train_agent(*agent, envs, featurizer_for(setup), loop);
        } else if (name == "cf") {
            auto& cf = dynamic_cast<agents::CfAgent&>(*agent);
            agents::CfConfig cc = config.agent.cf;
            cc.seed = derive_seed(seed, "agent.cf");
            auto model = cf.model();
            const auto fit = agents::fit_cf(model, data::read_dataset(dir / files::train), cc);
            for (std::size_t e = 0; e < fit.epoch_loss.size(); ++e)
                trace << ordered_json{{"epoch", e + 1}, {"loss", fit.epoch_loss[e]}}.dump() << '\n';
            agent = std::make_unique<agents::CfAgent>(std::move(model), config.env.slate_size);
        } else if (name == "cem") {
            const auto featurizer = featurizer_for(setup);
            agents::CemConfig cc = config.agent.cem;
            cc.seed = derive_seed(seed, "cem");
            const auto objective = agents::linear_policy_objective(setup, featurizer, config.agent.cem_episodes, derive_seed(seed, "cem.eval"));
            const Eigen::VectorXd init = Eigen::VectorXd::Zero(agents::LinearPolicyAgent::param_count(featurizer.dim(), setup.catalog().embedding_dim()));
            const auto result = agents::cem_optimize(objective, init, cc);
            for (std::size_t i = 0; i < result.iterations.size(); ++i) {
                const auto& it = result.iterations[i];
                trace << ordered_json{{"iteration", i}, {"population_mean", it.population_mean}, {"elite_mean", it.elite_mean},
                                          {"best", it.best_value}, {"frozen", it.frozen}}
                             .dump()
                      << '\n';
            }
            agent = std::make_unique<agents::LinearPolicyAgent>(featurizer, setup.catalog(), config.env.slate_size, result.best_params);
        }
        agents::save_agent(dir / files::agent, *agent, meta);
    }

    metrics::MetricSample stage_evaluate(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir)
    {
        const auto setup = load_environment(config, dir);
        auto agent = make_agent(config, setup, seed, dir);
        agents::load_agent(dir / files::agent, *agent);
        const Trajectory traj = agents::evaluate_agent(*agent, setup, config.eval_episodes, derive_seed(seed, "eval"));
        {
            std::ofstream out(dir / files::trajectory, std::ios::binary | std::ios::trunc);
            write_trajectory_jsonl(out, traj);
            if (!out)
                throw Error("cannot write the trajectory log");
        }
        auto sample = metrics::trajectory_metrics(traj, setup.model->schema(), setup.model->item_embeddings(),
            static_cast<std::size_t>(config.agent.ac.batch_size));
        const auto sim = nlohmann::json::parse(read_text(dir / "simulator.json"));
        if (!sim.at("click_auc").is_null())
            sample["simulator_click_auc"] = sim.at("click_auc").get<double>();
        return sample;
    }

    void emit_metrics(const metrics::MetricsReport& report, const fs::path& dir, const std::vector<fs::path>& artifacts)
    {
        in_stage("emit", [&] {
            fs::create_directories(dir);
            write_text(dir / files::report, metrics::report_to_json(report));
            write_text(dir / files::table, metrics::report_to_csv(report));
            ordered_json manifest;
            manifest["report"] = files::report;
            manifest["table"] = files::table;
            manifest["artifacts"] = nlohmann::json::array();
            for (const auto& p : artifacts)
                manifest["artifacts"].push_back(p.generic_string());
            write_text(dir / files::manifest, manifest.dump(2) + "\n");
            return 0;
        });
    }

    ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log)
    {
        in_stage("config", [&] {
            validate(config);
            return 0;
        });
        ExperimentResult result;
        result.dir = output_root(config);
        in_stage("setup", [&] {
            fs::create_directories(result.dir);
            write_text(result.dir / files::config, serialize_config(config));
            return 0;
        });
        std::vector<fs::path> artifacts;
        try {
            for (int r = 0; r < config.replicates; ++r) {
                const std::uint64_t seed = replicate_seed(config, r);
                const fs::path rel = "seed_" + std::to_string(r);
                const fs::path dir = result.dir / rel;
                in_stage("setup", [&] { return fs::create_directories(dir); });
                if (log)
                    *log << "replicate " << r << " seed " << seed << '\n';
                in_stage("ingest", [&] {
                    stage_ingest(config, seed, dir);
                    return 0;
                });
                in_stage("pretrain-sim", [&] {
                    stage_pretrain(config, seed, dir);
                    return 0;
                });
                in_stage("train-agent", [&] {
                    stage_train_agent(config, seed, dir);
                    return 0;
                });
                auto sample = in_stage("evaluate", [&] { return stage_evaluate(config, seed, dir); });
                emit_metrics(metrics::aggregate({sample}), dir, {files::trajectory, files::agent, files::simulator, files::retention});
                result.samples.push_back(std::move(sample));
                for (const char* name : {files::report, files::table, files::trajectory, files::agent, files::simulator, files::retention})
                    artifacts.push_back(rel / name);
            }
            result.report = metrics::aggregate(result.samples);
            emit_metrics(result.report, result.dir, artifacts);
        } catch (const StageError& e) {
            try {
                const ordered_json failure = {{"stage", e.stage()}, {"message", e.what()}, {"completed_replicates", result.samples.size()}};
                write_text(result.dir / files::failure, failure.dump(2) + "\n");
            } catch (const std::exception&) {
            }
            throw;
        }
        if (log)
            *log << metrics::report_to_csv(result.report);
        return result;
    }

    std::vector<ExperimentResult> sweep(const ExperimentConfig& config, const std::string& key, const std::vector<std::string>& values,
        std::ostream* log)
    {
        if (values.empty())
            throw ConfigError("sweep needs at least one value");
        const fs::path root = output_root(config);
        std::vector<ExperimentResult> out;
        std::string table = "key,value,metric,mean,std,count\n";
        for (const auto& v : values) {
            ExperimentConfig c = config;
            in_stage("config", [&] {
                set_value(c, key, v);
                return 0;
            });
            c.out = root / (key + "=" + v);
            if (log)
                *log << "sweep " << key << " = " << v << '\n';
            out.push_back(run_experiment(c, log));
            for (const auto& [name, m] : out.back().report.values) {
                char row[256];
                std::snprintf(row, sizeof row, "%s,%s,%s,%.17g,%.17g,%zu\n", key.c_str(), v.c_str(), name.c_str(), m.mean, m.std, m.count);
                table += row;
            }
        }
        write_text(root / "sweep.csv", table);
        return out;
    }

} // namespace slatesim::harness
