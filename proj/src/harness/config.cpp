#include <slatesim/harness/config.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace slatesim::harness {

    namespace {

        std::string trim(const std::string& s)
        {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos)
                return {};
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        }

        [[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why)
        {
            throw ConfigError(key + " = '" + value + "': " + why);
        }

        template <typename Int>
        Int parse_int(const std::string& key, const std::string& v)
        {
            Int out{};
            const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc{} || p != v.data() + v.size())
                bad(key, v, "expected an integer");
            return out;
        }

        double parse_double(const std::string& key, const std::string& v)
        {
            if (v.empty())
                bad(key, v, "expected a number");
            char* end = nullptr;
            const double out = std::strtod(v.c_str(), &end);
            if (end != v.c_str() + v.size() || !std::isfinite(out))
                bad(key, v, "expected a finite number");
            return out;
        }

        bool parse_bool(const std::string& key, const std::string& v)
        {
            if (v == "true" || v == "1")
                return true;
            if (v == "false" || v == "0")
                return false;
            bad(key, v, "expected true or false");
        }

        std::string fmt(double v)
        {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return buf;
        }

        struct Field {
            std::string key;
            std::function<void(ExperimentConfig&, const std::string&)> set;
            std::function<std::string(const ExperimentConfig&)> get;
        };

        template <typename Int, typename Access>
        Field int_field(std::string key, Access access, Int min_value)
        {
            return {key,
                [=](ExperimentConfig& c, const std::string& v) {
                    const Int x = parse_int<Int>(key, v);
                    if (x < min_value)
                        bad(key, v, "must be at least " + std::to_string(min_value));
                    access(c) = x;
                },
                [=](const ExperimentConfig& c) { return std::to_string(access(const_cast<ExperimentConfig&>(c))); }};
        }

        template <typename Access>
        Field real_field(std::string key, Access access, double lo, double hi, bool open_lo = false)
        {
            return {key,
                [=](ExperimentConfig& c, const std::string& v) {
                    const double x = parse_double(key, v);
                    if (x < lo || x > hi || (open_lo && x == lo))
                        bad(key, v, "outside " + std::string(open_lo ? "(" : "[") + fmt(lo) + ", " + fmt(hi) + "]");
                    access(c) = x;
                },
                [=](const ExperimentConfig& c) { return fmt(access(const_cast<ExperimentConfig&>(c))); }};
        }

        template <typename Access>
        Field bool_field(std::string key, Access access)
        {
            return {key, [=](ExperimentConfig& c, const std::string& v) { access(c) = parse_bool(key, v); },
                [=](const ExperimentConfig& c) { return std::string(access(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); }};
        }

        template <typename Access>
        Field path_field(std::string key, Access access)
        {
            return {key, [=](ExperimentConfig& c, const std::string& v) { access(c) = v; },
                [=](const ExperimentConfig& c) { return access(const_cast<ExperimentConfig&>(c)).string(); }};
        }

        Field choice_field(std::string key, std::vector<std::string> choices, std::function<std::string&(ExperimentConfig&)> access)
        {
            return {key,
                [=](ExperimentConfig& c, const std::string& v) {
                    if (std::find(choices.begin(), choices.end(), v) == choices.end())
                        bad(key, v, "unknown choice");
                    access(c) = v;
                },
                [=](const ExperimentConfig& c) { return access(const_cast<ExperimentConfig&>(c)); }};
        }

        constexpr double kInf = std::numeric_limits<double>::infinity();

        const std::vector<Field>& fields()
        {
            using C = ExperimentConfig;
            static const std::vector<Field> table = {
                {"data.source",
                    [](C& c, const std::string& v) {
                        if (v == "synthetic")
                            c.data.source = DataSource::synthetic;
                        else if (v == "csv")
                            c.data.source = DataSource::csv;
                        else
                            bad("data.source", v, "expected synthetic or csv");
                    },
                    [](const C& c) { return std::string(c.data.source == DataSource::synthetic ? "synthetic" : "csv"); }},
                path_field("data.path", [](C& c) -> auto& { return c.data.path; }),
                choice_field("data.schema", {"kuairand", "movielens"}, [](C& c) -> std::string& { return c.data.schema; }),
                int_field<int>("data.users", [](C& c) -> auto& { return c.data.users; }, 1),
                int_field<int>("data.items", [](C& c) -> auto& { return c.data.items; }, 1),
                int_field<int>("data.days", [](C& c) -> auto& { return c.data.days; }, 1),
                int_field<int>("data.kcore", [](C& c) -> auto& { return c.data.kcore; }, 0),
                real_field("data.split_ratio", [](C& c) -> auto& { return c.data.split_ratio; }, 0.0, 1.0, true),

                int_field<Eigen::Index>("sim.embedding_dim", [](C& c) -> auto& { return c.sim.model.embedding_dim; }, 1),
                int_field<int>("sim.history_length", [](C& c) -> auto& { return c.sim.model.history_length; }, 1),
                int_field<int>("sim.layers", [](C& c) -> auto& { return c.sim.model.layers; }, 1),
                int_field<int>("sim.heads", [](C& c) -> auto& { return c.sim.model.heads; }, 1),
                real_field("sim.dropout", [](C& c) -> auto& { return c.sim.model.dropout; }, 0.0, 0.99),
                real_field("sim.rho", [](C& c) -> auto& { return c.sim.model.rho; }, 0.0, kInf),
                real_field("sim.temperature", [](C& c) -> auto& { return c.sim.model.temperature; }, 0.0, kInf, true),
                int_field<int>("sim.epochs", [](C& c) -> auto& { return c.sim.epochs; }, 1),
                int_field<int>("sim.batch_size", [](C& c) -> auto& { return c.sim.batch_size; }, 1),
                real_field("sim.learning_rate", [](C& c) -> auto& { return c.sim.learning_rate; }, 0.0, 1.0, true),
                real_field("sim.l2", [](C& c) -> auto& { return c.sim.l2; }, 0.0, 1.0),
                path_field("sim.checkpoint", [](C& c) -> auto& { return c.sim.checkpoint; }),
                real_field("sim.lambda1", [](C& c) -> auto& { return c.sim.lambda1; }, 0.0, kInf),
                real_field("sim.lambda2", [](C& c) -> auto& { return c.sim.lambda2; }, 0.0, kInf),
                int_field<int>("sim.retention_epochs", [](C& c) -> auto& { return c.sim.retention_epochs; }, 1),

                {"env.mode", [](C& c, const std::string& v) { c.env.mode = env::parse_mode(v); },
                    [](const C& c) { return env::to_string(c.env.mode); }},
                int_field<int>("env.K", [](C& c) -> auto& { return c.env.slate_size; }, 1),
                int_field<int>("env.max_step", [](C& c) -> auto& { return c.env.max_step; }, 1),
                real_field("env.temper_rate", [](C& c) -> auto& { return c.env.temper_rate; }, 0.0, kInf, true),
                real_field("env.leave_threshold", [](C& c) -> auto& { return c.env.leave_threshold; }, 0.0, kInf),
                bool_field("env.literal_temper_rule", [](C& c) -> auto& { return c.env.literal_temper_rule; }),
                int_field<int>("env.max_sessions", [](C& c) -> auto& { return c.env.max_sessions; }, 1),
                int_field<int>("env.max_return_day", [](C& c) -> auto& { return c.env.max_return_day; }, 1),
                real_field("env.reward_scale", [](C& c) -> auto& { return c.env.reward_scale; }, 0.0, kInf),

                choice_field("agent.name", {"random", "cf", "a2c", "ddpg", "td3", "cem"}, [](C& c) -> std::string& { return c.agent.name; }),
                int_field<long>("agent.updates", [](C& c) -> auto& { return c.agent.updates; }, 0),
                int_field<int>("agent.lanes", [](C& c) -> auto& { return c.agent.lanes; }, 1),
                real_field("agent.gamma", [](C& c) -> auto& { return c.agent.ac.gamma; }, 0.0, 0.999999),
                real_field("agent.tau", [](C& c) -> auto& { return c.agent.ac.tau; }, 0.0, 1.0, true),
                real_field("agent.actor_lr", [](C& c) -> auto& { return c.agent.ac.actor_lr; }, 0.0, 1.0, true),
                real_field("agent.critic_lr", [](C& c) -> auto& { return c.agent.ac.critic_lr; }, 0.0, 1.0, true),
                real_field("agent.l2", [](C& c) -> auto& { return c.agent.ac.l2; }, 0.0, 1.0),
                int_field<int>("agent.batch_size", [](C& c) -> auto& { return c.agent.ac.batch_size; }, 1),
                int_field<std::size_t>("agent.buffer_capacity", [](C& c) -> auto& { return c.agent.ac.buffer_capacity; }, 1),
                int_field<std::size_t>("agent.min_buffer", [](C& c) -> auto& { return c.agent.ac.min_buffer; }, 0),
                real_field("agent.exploration_std", [](C& c) -> auto& { return c.agent.ac.exploration_std; }, 0.0, kInf),
                real_field("agent.final_exploration_std", [](C& c) -> auto& { return c.agent.ac.final_exploration_std; }, 0.0, kInf),
                int_field<int>("agent.policy_delay", [](C& c) -> auto& { return c.agent.ac.policy_delay; }, 1),
                real_field("agent.target_noise", [](C& c) -> auto& { return c.agent.ac.target_noise; }, 0.0, kInf),
                real_field("agent.target_noise_clip", [](C& c) -> auto& { return c.agent.ac.target_noise_clip; }, 0.0, kInf),
                real_field("agent.entropy_coef", [](C& c) -> auto& { return c.agent.ac.entropy_coef; }, 0.0, kInf),
                real_field("agent.initial_policy_std", [](C& c) -> auto& { return c.agent.ac.initial_policy_std; }, 0.0, kInf, true),

                int_field<int>("cf.embedding_dim", [](C& c) -> auto& { return c.agent.cf.embedding_dim; }, 1),
                int_field<int>("cf.epochs", [](C& c) -> auto& { return c.agent.cf.epochs; }, 1),
                int_field<int>("cf.batch_size", [](C& c) -> auto& { return c.agent.cf.batch_size; }, 1),
                real_field("cf.learning_rate", [](C& c) -> auto& { return c.agent.cf.learning_rate; }, 0.0, 1.0, true),
                real_field("cf.l2", [](C& c) -> auto& { return c.agent.cf.l2; }, 0.0, 1.0),

                int_field<int>("cem.population", [](C& c) -> auto& { return c.agent.cem.population; }, 10),
                real_field("cem.elite_frac", [](C& c) -> auto& { return c.agent.cem.elite_frac; }, 0.0, 1.0, true),
                int_field<int>("cem.iterations", [](C& c) -> auto& { return c.agent.cem.iterations; }, 1),
                real_field("cem.initial_std", [](C& c) -> auto& { return c.agent.cem.initial_std; }, 0.0, kInf, true),
                int_field<int>("cem.episodes", [](C& c) -> auto& { return c.agent.cem_episodes; }, 1),

                int_field<int>("eval.episodes", [](C& c) -> auto& { return c.eval_episodes; }, 1),

                int_field<std::uint64_t>("run.seed", [](C& c) -> auto& { return c.seed; }, 0),
                int_field<int>("run.replicates", [](C& c) -> auto& { return c.replicates; }, 1),
                path_field("run.out", [](C& c) -> auto& { return c.out; }),
                bool_field("run.allow_off_grid", [](C& c) -> auto& { return c.allow_off_grid; }),
            };
            return table;
        }

        const Field& field(const std::string& key)
        {
            for (const auto& f : fields())
                if (f.key == key)
                    return f;
            throw ConfigError("unknown configuration key '" + key + "'");
        }

        bool on_grid(double v, std::initializer_list<double> grid)
        {
            for (double g : grid)
                if (std::abs(v - g) <= 1e-12 * std::abs(g))
                    return true;
            return false;
        }

        const std::initializer_list<double> kLearningRates = {5e-4, 1e-4, 5e-5, 1e-5};
        const std::initializer_list<double> kActorRates = {5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6};
        const std::initializer_list<double> kCriticRates = {1e-3, 1e-4, 1e-5};
        const std::initializer_list<double> kL2 = {1e-4, 5e-5, 1e-5, 5e-6};
        const std::initializer_list<double> kSteps = {5, 10, 15, 20, 25, 30};

    } // namespace

    ExperimentConfig::ExperimentConfig()
    {
        agent.ac.l2 = 1e-5;
        agent.ac.slate_size = env.slate_size;
    }

    bool ExperimentConfig::operator==(const ExperimentConfig& other) const { return serialize_config(*this) == serialize_config(other); }

    void set_value(ExperimentConfig& config, const std::string& key, const std::string& value)
    {
        field(key).set(config, trim(value));
        config.agent.ac.slate_size = config.env.slate_size;
        config.env.history_length = config.sim.model.history_length;
    }

    std::string get_value(const ExperimentConfig& config, const std::string& key) { return field(key).get(config); }

    std::vector<std::string> config_keys()
    {
        std::vector<std::string> out;
        for (const auto& f : fields())
            out.push_back(f.key);
        return out;
    }

    ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir)
    {
        ExperimentConfig config;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            if (const auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            line = trim(line);
            if (line.empty())
                continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("line " + std::to_string(number) + ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("line " + std::to_string(number) + ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            if (!section.empty())
                key = section + "." + key;
            try {
                set_value(config, key, line.substr(eq + 1));
            } catch (const ConfigError& e) {
                throw ConfigError("line " + std::to_string(number) + ": " + e.what());
            }
        }
        if (!base_dir.empty()) {
            for (auto* p : {&config.data.path, &config.sim.checkpoint})
                if (!p->empty() && p->is_relative())
                    *p = base_dir / *p;
        }
        return config;
    }

    ExperimentConfig load_config(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot read config file " + path.string());
        std::stringstream buf;
        buf << in.rdbuf();
        return parse_config(buf.str(), path.parent_path());
    }

    std::string serialize_config(const ExperimentConfig& config)
    {
        std::string out;
        for (const auto& f : fields())
            out += f.key + " = " + f.get(config) + "\n";
        return out;
    }

    void validate(const ExperimentConfig& c)
    {
        c.env.validate();
        if (c.data.source == DataSource::csv) {
            if (c.data.path.empty())
                throw ConfigError("data.source = csv needs data.path");
            if (!std::filesystem::exists(c.data.path))
                throw ConfigError("missing dataset " + c.data.path.string());
        }
        if (!c.sim.checkpoint.empty() && !std::filesystem::exists(c.sim.checkpoint))
            throw ConfigError("missing simulator checkpoint " + c.sim.checkpoint.string());
        if (c.sim.model.embedding_dim % c.sim.model.heads != 0)
            throw ConfigError("sim.embedding_dim must be divisible by sim.heads");
        if (c.env.slate_size > c.data.items && c.data.source == DataSource::synthetic)
            throw ConfigError("env.K exceeds the synthetic catalog size");
        c.agent.cem.validate();
        if (c.allow_off_grid)
            return;

        const auto require = [](bool ok, const std::string& key, double v) {
            if (!ok)
                throw ConfigError(key + " = " + fmt(v) + " is outside its search grid (set run.allow_off_grid = true to override)");
        };
        require(on_grid(c.env.slate_size, kSteps), "env.K", c.env.slate_size);
        require(on_grid(c.env.max_step, kSteps), "env.max_step", c.env.max_step);
        require(on_grid(c.sim.learning_rate, kLearningRates), "sim.learning_rate", c.sim.learning_rate);
        require(on_grid(c.agent.cf.learning_rate, kLearningRates), "cf.learning_rate", c.agent.cf.learning_rate);
        require(on_grid(c.agent.ac.actor_lr, kActorRates), "agent.actor_lr", c.agent.ac.actor_lr);
        require(on_grid(c.agent.ac.critic_lr, kCriticRates), "agent.critic_lr", c.agent.ac.critic_lr);
        require(on_grid(c.sim.l2, kL2), "sim.l2", c.sim.l2);
        require(on_grid(c.agent.ac.l2, kL2), "agent.l2", c.agent.ac.l2);
        require(on_grid(c.agent.cf.l2, kL2), "cf.l2", c.agent.cf.l2);
        require(c.sim.batch_size == 64, "sim.batch_size", c.sim.batch_size);
        require(c.agent.ac.batch_size == 64, "agent.batch_size", c.agent.ac.batch_size);
        require(c.agent.cf.batch_size == 64, "cf.batch_size", c.agent.cf.batch_size);
        require(c.sim.model.layers == 2, "sim.layers", c.sim.model.layers);
        require(c.sim.model.heads == 2, "sim.heads", c.sim.model.heads);
        require(on_grid(c.sim.model.dropout, {0.2}), "sim.dropout", c.sim.model.dropout);
        require(on_grid(c.sim.lambda1, {0.5}), "sim.lambda1", c.sim.lambda1);
        require(on_grid(c.sim.lambda2, {0.75}), "sim.lambda2", c.sim.lambda2);
        require(on_grid(c.env.temper_rate, {1.0}), "env.temper_rate", c.env.temper_rate);
        require(on_grid(c.env.leave_threshold, {1.0}), "env.leave_threshold", c.env.leave_threshold);
    }

    std::uint64_t replicate_seed(const ExperimentConfig& config, int replicate)
    {
        return derive_seed(config.seed, "replicate", static_cast<std::uint64_t>(replicate));
    }

} // namespace slatesim::harness
