#pragma once

#include <slatesim/agents/actor_critic.hpp>
#include <slatesim/agents/cem.hpp>
#include <slatesim/agents/cf.hpp>
#include <slatesim/data/synthetic.hpp>
#include <slatesim/env/environment.hpp>
#include <slatesim/uirm/uirm.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace slatesim::harness {

    enum class DataSource { synthetic, csv };

    struct DataSection {
        DataSource source = DataSource::synthetic;
        std::filesystem::path path; // csv log when source = csv
        std::string schema = "kuairand"; // kuairand | movielens
        int users = 300;
        int items = 100;
        int days = 30;
        int kcore = 0; // 0 disables the filter
        double split_ratio = 0.8;
    };

    struct SimulatorSection {
        uirm::UirmConfig model;
        int epochs = 10;
        int batch_size = 64;
        double learning_rate = 5e-4;
        double l2 = 1e-5;
        std::filesystem::path checkpoint; // load instead of pretraining when set
        double lambda1 = 0.5;
        double lambda2 = 0.75;
        int retention_epochs = 20;
    };

    struct AgentSection {
        std::string name = "td3"; // random | cf | a2c | ddpg | td3 | cem
        long updates = 2000;
        int lanes = 64;
        agents::ActorCriticConfig ac;
        agents::CfConfig cf;
        agents::CemConfig cem;
        int cem_episodes = 32;
    };

    struct ExperimentConfig {
        DataSection data;
        SimulatorSection sim;
        env::EnvConfig env;
        AgentSection agent;
        int eval_episodes = 100;
        std::uint64_t seed = 1;
        int replicates = 5; // 3 and 5 are the customary counts
        std::filesystem::path out;
        bool allow_off_grid = false;

        ExperimentConfig();
        bool operator==(const ExperimentConfig& other) const;
    };

    /// Applies one `key = value` assignment. Throws ConfigError on unknown keys, unparsable or
    /// out-of-range values.
    void set_value(ExperimentConfig& config, const std::string& key, const std::string& value);
    std::string get_value(const ExperimentConfig& config, const std::string& key);
    std::vector<std::string> config_keys();

    /// Parses the flat format: one assignment per line, `#` starts a comment, and a `[section]`
    /// line prefixes following keys with `section.`.
    ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
    ExperimentConfig load_config(const std::filesystem::path& path);
    /// Every key in `config_keys()` order; reparses to an equal config.
    std::string serialize_config(const ExperimentConfig& config);

    /// Cross-field checks, search-grid membership (unless allow_off_grid) and path existence.
    void validate(const ExperimentConfig& config);

    /// Replicate r uses derive_seed(seed, "replicate", r).
    std::uint64_t replicate_seed(const ExperimentConfig& config, int replicate);

} // namespace slatesim::harness
