#pragma once

#include <slatesim/agents/training.hpp>
#include <slatesim/harness/config.hpp>
#include <slatesim/metrics/metrics.hpp>

#include <iosfwd>
#include <stdexcept>

namespace slatesim::harness {

    /// A failure inside one pipeline stage; `stage` names it.
    class StageError : public Error {
    public:
        StageError(std::string stage, const std::string& message) : Error(stage + ": " + message), _stage(std::move(stage)) {}
        const std::string& stage() const { return _stage; }

    private:
        std::string _stage;
    };

    /// File names inside one replicate directory.
    namespace files {
        inline constexpr const char* dataset = "dataset.bin";
        inline constexpr const char* train = "train.bin";
        inline constexpr const char* test = "test.bin";
        inline constexpr const char* simulator = "uirm.ckpt";
        inline constexpr const char* retention = "retention.ckpt";
        inline constexpr const char* agent = "agent.ckpt";
        inline constexpr const char* pretrain_log = "pretrain.jsonl";
        inline constexpr const char* train_log = "train.jsonl";
        inline constexpr const char* trajectory = "trajectory.jsonl";
        inline constexpr const char* report = "report.json";
        inline constexpr const char* table = "metrics.csv";
        inline constexpr const char* manifest = "manifest.json";
        inline constexpr const char* config = "config.txt";
        inline constexpr const char* failure = "failure.json";
    } // namespace files

    /// Output root: config.out, else $SLATESIM_OUT, else ./slatesim_out.
    std::filesystem::path output_root(const ExperimentConfig& config);

    /// Stages of one replicate; each reads the previous stage's files from `dir`.
    void stage_ingest(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& dir);
    void stage_pretrain(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& dir);
    void stage_train_agent(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& dir);
    metrics::MetricSample stage_evaluate(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& dir);

    /// Loads the simulator artifacts of `dir` into an environment setup for `config`.
    agents::EnvSetup load_environment(const ExperimentConfig& config, const std::filesystem::path& dir);
    /// Constructs the configured agent (untrained) for `setup`.
    std::unique_ptr<agents::Agent> make_agent(const ExperimentConfig& config, const agents::EnvSetup& setup, std::uint64_t seed,
        const std::filesystem::path& dir);

    /// Writes report.json, metrics.csv and manifest.json (listing `artifacts`, relative to `dir`).
    /// Throws StageError("emit") when the directory is not writable.
    void emit_metrics(const metrics::MetricsReport& report, const std::filesystem::path& dir, const std::vector<std::filesystem::path>& artifacts);

    struct ExperimentResult {
        metrics::MetricsReport report;
        std::vector<metrics::MetricSample> samples;
        std::filesystem::path dir;
    };

    /// All replicates in dir/seed_<r>, then the aggregate in dir. Throws StageError.
    ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

    /// One experiment per value of `key`, in dir/<key>=<value>.
    std::vector<ExperimentResult> sweep(const ExperimentConfig& config, const std::string& key, const std::vector<std::string>& values,
        std::ostream* log = nullptr);

} // namespace slatesim::harness
