#include <slatesim/data/dataset.hpp>
#include <slatesim/harness/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace slatesim;
using namespace slatesim::harness;

namespace {

    constexpr int kOk = 0;
    constexpr int kConfigError = 2;
    constexpr int kStageError = 3;

    struct CommonOptions {
        std::string config_path;
        std::optional<std::uint64_t> seed;
        std::string mode;
        std::string agent;
        std::string out;
        std::vector<std::string> overrides;
        int replicate = 0;
    };

    void add_common(CLI::App* cmd, CommonOptions& o, bool with_replicate)
    {
        cmd->add_option("--config", o.config_path, "Experiment config file")->check(CLI::ExistingFile);
        cmd->add_option("--seed", o.seed, "Master seed");
        cmd->add_option("--mode", o.mode, "Task mode")->check(CLI::IsMember({"request", "whole_session", "cross_session"}));
        cmd->add_option("--agent", o.agent, "Agent name")->check(CLI::IsMember({"random", "cf", "a2c", "ddpg", "td3", "cem"}));
        cmd->add_option("--out", o.out, "Output directory");
        cmd->add_option("--override", o.overrides, "key=value assignment, repeatable")->take_all();
        if (with_replicate)
            cmd->add_option("--replicate", o.replicate, "Replicate index for the seed derivation")->check(CLI::NonNegativeNumber);
    }

    ExperimentConfig resolve(const CommonOptions& o)
    {
        ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
        for (const auto& kv : o.overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--override expects key=value, got '" + kv + "'");
            set_value(c, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (o.seed)
            c.seed = *o.seed;
        if (!o.mode.empty())
            set_value(c, "env.mode", o.mode);
        if (!o.agent.empty())
            set_value(c, "agent.name", o.agent);
        if (!o.out.empty())
            c.out = o.out;
        return c;
    }

    /// Runs one stage against a single replicate directory.
    template <typename Fn>
    void stage(const std::string& name, const CommonOptions& o, Fn&& fn)
    {
        const ExperimentConfig c = resolve(o);
        try {
            validate(c);
        } catch (const std::exception& e) {
            throw StageError("config", e.what());
        }
        const fs::path dir = output_root(c);
        const std::uint64_t seed = replicate_seed(c, o.replicate);
        try {
            fs::create_directories(dir);
            fn(c, seed, dir);
        } catch (const StageError&) {
            throw;
        } catch (const ConfigError& e) {
            throw StageError("config", e.what());
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
    }

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Slate recommendation simulator: data, simulator pretraining, agents and evaluation"};
    app.require_subcommand(1);

    CommonOptions o;
    auto* synth = app.add_subcommand("synth-data", "Generate a synthetic log (dataset, split and CSV) into --out");
    auto* preprocess = app.add_subcommand("preprocess", "Ingest the configured log, filter, segment and split it");
    auto* pretrain = app.add_subcommand("pretrain-sim", "Pretrain the response model and fit the retention module");
    auto* train = app.add_subcommand("train-agent", "Train the configured agent against the simulator");
    auto* evaluate = app.add_subcommand("evaluate", "Roll out the trained agent and write metrics");
    auto* sweep_cmd = app.add_subcommand("sweep", "Run the full experiment once per value of one key");
    auto* run = app.add_subcommand("run", "Full pipeline over all replicates with aggregation");
    for (auto* cmd : {synth, preprocess, pretrain, train, evaluate})
        add_common(cmd, o, true);
    add_common(sweep_cmd, o, false);
    add_common(run, o, false);

    std::string sweep_key;
    std::vector<std::string> sweep_values;
    sweep_cmd->add_option("--key", sweep_key, "Config key to vary")->required();
    sweep_cmd->add_option("--values", sweep_values, "Values, comma separated")->required()->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (synth->parsed()) {
            stage("synth-data", o, [](ExperimentConfig c, std::uint64_t seed, const fs::path& dir) {
                c.data.source = DataSource::synthetic;
                stage_ingest(c, seed, dir);
                data::write_log_csv(dir / "log.csv", data::read_dataset(dir / files::dataset), data::ColumnSpec{});
                std::cout << "wrote " << (dir / files::dataset).string() << " and " << (dir / "log.csv").string() << '\n';
            });
        } else if (preprocess->parsed()) {
            stage("ingest", o, [](const ExperimentConfig& c, std::uint64_t seed, const fs::path& dir) {
                stage_ingest(c, seed, dir);
                const auto train_set = data::read_dataset(dir / files::train);
                const auto test_set = data::read_dataset(dir / files::test);
                std::cout << "train records " << train_set.records.size() << ", test records " << test_set.records.size() << '\n';
            });
        } else if (pretrain->parsed()) {
            stage("pretrain-sim", o, [](const ExperimentConfig& c, std::uint64_t seed, const fs::path& dir) {
                stage_pretrain(c, seed, dir);
                std::cout << "wrote " << (dir / files::simulator).string() << '\n';
            });
        } else if (train->parsed()) {
            stage("train-agent", o, [](const ExperimentConfig& c, std::uint64_t seed, const fs::path& dir) {
                stage_train_agent(c, seed, dir);
                std::cout << "wrote " << (dir / files::agent).string() << '\n';
            });
        } else if (evaluate->parsed()) {
            stage("evaluate", o, [](const ExperimentConfig& c, std::uint64_t seed, const fs::path& dir) {
                const auto sample = stage_evaluate(c, seed, dir);
                const auto report = metrics::aggregate({sample});
                emit_metrics(report, dir, {files::trajectory});
                std::cout << metrics::report_to_csv(report);
            });
        } else if (sweep_cmd->parsed()) {
            sweep(resolve(o), sweep_key, sweep_values, &std::cout);
        } else if (run->parsed()) {
            run_experiment(resolve(o), &std::cout);
        }
    } catch (const StageError& e) {
        std::cerr << "error in stage " << e.stage() << ": " << e.what() << '\n';
        return e.stage() == "config" ? kConfigError : kStageError;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kStageError;
    }
    return kOk;
}
