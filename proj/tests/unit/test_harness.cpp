#include <doctest.h>

#include <slatesim/harness/experiment.hpp>

#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace slatesim;
using namespace slatesim::harness;
namespace fs = std::filesystem;

namespace {

    std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }

    fs::path scratch(const std::string& name)
    {
        const fs::path p = fs::temp_directory_path() / ("slatesim_harness_" + name);
        fs::remove_all(p);
        return p;
    }

    ExperimentConfig smoke(const std::string& agent, const fs::path& out)
    {
        const std::string text = R"(
# tiny pipeline
run.allow_off_grid = true
run.replicates = 1
[data]
users = 40
items = 30
days = 6
[sim]
embedding_dim = 8
history_length = 10
epochs = 2
retention_epochs = 2
[env]
K = 5
max_step = 5
max_sessions = 2
[agent]
updates = 20
lanes = 4
min_buffer = 64
[cem]
population = 10
iterations = 2
episodes = 2
[eval]
episodes = 8
)";
        ExperimentConfig c = parse_config(text);
        set_value(c, "agent.name", agent);
        c.out = out;
        return c;
    }

} // namespace

TEST_CASE("defaults match the standard settings")
{
    const ExperimentConfig c = parse_config("");
    CHECK(c.env.slate_size == 20);
    CHECK(c.env.max_step == 20);
    CHECK(c.sim.lambda1 == 0.5);
    CHECK(c.sim.lambda2 == 0.75);
    CHECK(c.sim.batch_size == 64);
    CHECK(c.agent.ac.batch_size == 64);
    CHECK(c.sim.model.embedding_dim == 32);
    CHECK(c.sim.model.dropout == 0.2);
    CHECK(c.replicates == 5);
    CHECK(c.data.source == DataSource::synthetic);
    CHECK_NOTHROW(validate(c));
}

TEST_CASE("config parsing errors")
{
    CHECK_THROWS_AS(parse_config("env.K = -1"), ConfigError);
    CHECK_THROWS_AS(parse_config("env.K = five"), ConfigError);
    CHECK_THROWS_AS(parse_config("env.colour = red"), ConfigError);
    CHECK_THROWS_AS(parse_config("env.K"), ConfigError);
    CHECK_THROWS_AS(parse_config("[env\nK = 5"), ConfigError);
    CHECK_THROWS_AS(parse_config("agent.name = hac"), ConfigError);
    CHECK_THROWS_AS(parse_config("env.mode = weekly"), ConfigError);
    CHECK_THROWS_AS(parse_config("sim.learning_rate = nan"), ConfigError);

    const auto off = parse_config("agent.actor_lr = 2e-4");
    CHECK_THROWS_AS(validate(off), ConfigError);
    CHECK_NOTHROW(validate(parse_config("agent.actor_lr = 2e-4\nrun.allow_off_grid = true")));
    CHECK_THROWS_AS(validate(parse_config("env.K = 7")), ConfigError);
    CHECK_NOTHROW(validate(parse_config("env.K = 5\nenv.max_step = 30")));

    const auto missing = parse_config("data.source = csv\ndata.path = /nonexistent/log.csv");
    CHECK_THROWS_AS(validate(missing), ConfigError);
}

TEST_CASE("sections, comments and round-trip")
{
    const auto c = parse_config("# header\n[env]\nmode = cross_session  # trailing\nK = 10\n\n[agent]\nname = cem\ntau = 0.01\n");
    CHECK(c.env.mode == env::TaskMode::cross_session);
    CHECK(c.env.slate_size == 10);
    CHECK(c.agent.ac.slate_size == 10);
    CHECK(c.agent.name == "cem");
    CHECK(c.agent.ac.tau == 0.01);

    const std::string text = serialize_config(c);
    const auto again = parse_config(text);
    CHECK(again == c);
    CHECK(serialize_config(again) == text);
    for (const auto& key : config_keys())
        CHECK(get_value(again, key) == get_value(c, key));

    const fs::path dir = scratch("roundtrip");
    fs::create_directories(dir);
    std::ofstream(dir / "exp.cfg") << "data.source = csv\ndata.path = log.csv\n";
    std::ofstream(dir / "log.csv") << "x\n";
    const auto loaded = load_config(dir / "exp.cfg");
    CHECK(loaded.data.path == dir / "log.csv");
    CHECK_NOTHROW(validate(loaded));
    fs::remove_all(dir);
}

TEST_CASE("replicate seeds")
{
    ExperimentConfig c;
    CHECK(replicate_seed(c, 0) != replicate_seed(c, 1));
    CHECK(replicate_seed(c, 2) == derive_seed(c.seed, "replicate", 2));
}

TEST_CASE("emit_metrics writes a stable report")
{
    metrics::MetricsReport report;
    for (int i = 0; i < 10; ++i)
        report.values["m" + std::to_string(i)] = {0.1 * i, 0.01 * i, 3};
    const fs::path dir = scratch("emit");
    emit_metrics(report, dir, {});
    const std::string csv = slurp(dir / files::table);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
    const std::string json = slurp(dir / files::report);
    emit_metrics(report, dir, {});
    CHECK(slurp(dir / files::table) == csv);
    CHECK(slurp(dir / files::report) == json);
    CHECK(metrics::report_from_json(json) == report);

    std::ofstream(dir / "plain") << "x";
    CHECK_THROWS_AS(emit_metrics(report, dir / "plain" / "sub", {}), StageError);
    fs::remove_all(dir);
}

TEST_CASE("smoke experiments for every agent")
{
    const std::vector<std::string> expected = {"avg_l_reward", "max_l_reward", "coverage", "ild", "depth", "avg_reward", "total_reward",
        "return_day", "user_retention", "simulator_click_auc"};
    for (const std::string agent : {"random", "cf", "a2c", "ddpg", "td3", "cem"}) {
        const fs::path out = scratch("smoke_" + agent);
        const auto result = run_experiment(smoke(agent, out));
        for (const auto& key : expected)
            CHECK_MESSAGE(result.report.values.count(key) == 1, agent << " " << key);
        const auto manifest = nlohmann::json::parse(slurp(out / files::manifest));
        for (const auto& p : manifest.at("artifacts"))
            CHECK_MESSAGE(fs::exists(out / p.get<std::string>()), p);
        CHECK(fs::exists(out / files::config));
        fs::remove_all(out);
    }
}

TEST_CASE("identical runs produce identical bytes")
{
    const fs::path a = scratch("det_a");
    const fs::path b = scratch("det_b");
    auto ca = smoke("td3", a);
    ca.replicates = 2;
    auto cb = ca;
    cb.out = b;
    run_experiment(ca);
    run_experiment(cb);
    for (const char* name : {files::report, files::table})
        CHECK(slurp(a / name) == slurp(b / name));
    CHECK(slurp(a / "seed_1" / files::trajectory) == slurp(b / "seed_1" / files::trajectory));
    CHECK(slurp(a / "seed_0" / files::train_log) == slurp(b / "seed_0" / files::train_log));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("stage failures are reported with the stage name")
{
    const fs::path out = scratch("fail");
    fs::create_directories(out);
    std::ofstream(out / "bad.csv") << "nothing,useful\n1,2\n";
    auto c = smoke("random", out / "run");
    set_value(c, "data.source", "csv");
    c.data.path = out / "bad.csv";
    try {
        run_experiment(c);
        FAIL("expected a stage failure");
    } catch (const StageError& e) {
        CHECK(e.stage() == "ingest");
    }
    const auto failure = nlohmann::json::parse(slurp(out / "run" / files::failure));
    CHECK(failure.at("stage") == "ingest");

    auto invalid = smoke("random", out / "invalid");
    invalid.env.slate_size = 0;
    try {
        run_experiment(invalid);
        FAIL("expected a config failure");
    } catch (const StageError& e) {
        CHECK(e.stage() == "config");
    }
    fs::remove_all(out);
}

TEST_CASE("sweep emits one report per value")
{
    const fs::path out = scratch("sweep");
    auto c = smoke("random", out);
    set_value(c, "env.mode", "cross_session");
    const auto results = sweep(c, "env.max_step", {"5", "10"});
    REQUIRE(results.size() == 2);
    CHECK(fs::exists(out / "env.max_step=5" / files::report));
    CHECK(fs::exists(out / "env.max_step=10" / files::report));
    const std::string table = slurp(out / "sweep.csv");
    CHECK(table.find("env.max_step,10,return_day") != std::string::npos);
    fs::remove_all(out);
}
