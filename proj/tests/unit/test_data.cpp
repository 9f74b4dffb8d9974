#include <doctest.h>

#include <slatesim/core/error.hpp>
#include <slatesim/core/geometric.hpp>
#include <slatesim/data/summary.hpp>
#include <slatesim/data/synthetic.hpp>

#include <map>
#include <set>

using namespace slatesim;
using namespace slatesim::data;

namespace {

    ColumnSpec small_columns()
    {
        ColumnSpec c;
        c.user = "user_id";
        c.item = "video_id";
        c.timestamp = "time_ms";
        c.date = "date";
        c.behaviors = {"is_like", "is_hate"};
        return c;
    }

    // Random log with distinct timestamps per user.
    LogDataset random_log(std::size_t records, int users, int items, std::uint64_t seed)
    {
        Rng rng(seed);
        std::string csv = "user_id,video_id,time_ms,date,is_like,is_hate\n";
        std::map<int, std::int64_t> clock;
        for (std::size_t r = 0; r < records; ++r) {
            const int u = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(users)));
            const int i = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(items)));
            clock[u] += 1 + static_cast<std::int64_t>(uniform_index(rng, 30'000'000));
            const std::int64_t ts = clock[u];
            csv += std::to_string(100 + u) + "," + std::to_string(5000 + i) + "," + std::to_string(ts) + ","
                + std::to_string(ts / 86'400'000) + "," + (uniform01(rng) < 0.4 ? "1" : "0") + ",0\n";
        }
        return parse_log_text(csv, small_columns(), BehaviorSchema::movielens()).dataset;
    }

} // namespace

TEST_CASE("parse_log maps rows and counts malformed ones")
{
    const std::string csv = "user_id,video_id,time_ms,date,is_like,is_hate\n"
                            "7,300,2000,20220408,1,0\n"
                            "7,301,1000,20220408,0,1\n"
                            "9,300,1500,20220409,1,0\n";
    auto result = parse_log_text(csv, small_columns(), BehaviorSchema::movielens());
    CHECK(result.skipped_rows == 0);
    const auto& data = result.dataset;
    REQUIRE(data.records.size() == 3);
    CHECK(data.users.size() == 2);
    CHECK(data.items.size == 2);
    CHECK(data.records[0].timestamp == 1000);
    CHECK(data.records[1].timestamp == 2000);
    CHECK(data.records[0].behaviors == 0b10);
    CHECK(data.user_original_ids == std::vector<std::int64_t>{7, 9});
    CHECK(data.records[2].date == data.records[0].date + 1);

    const std::string bad = "user_id,video_id,time_ms,date,is_like,is_hate\n"
                            "7,300,2000,20220408,1,0\n"
                            "7,301,abc,20220408,0,1\n"
                            "9,300,1500,20220409,1\n";
    CHECK(parse_log_text(bad, small_columns(), BehaviorSchema::movielens()).skipped_rows == 2);

    CHECK_THROWS_AS(parse_log_text("", small_columns(), BehaviorSchema::movielens()), DataError);
    CHECK_THROWS_AS(parse_log_text("user_id,time_ms,date,is_like,is_hate\n1,2,3,0,0\n", small_columns(), BehaviorSchema::movielens()),
        DataError);
}

TEST_CASE("date keys")
{
    CHECK(day_key_from_date(19700101) == 0);
    CHECK(day_key_from_date(20220409) - day_key_from_date(20220408) == 1);
    CHECK(day_key_from_date(20220501) - day_key_from_date(20220430) == 1);
    CHECK(day_key_from_date(42) == 42);
    CHECK(day_key_from_timestamp(86'400'000LL * 3 + 5) == 3);
}

TEST_CASE("kcore_filter threshold semantics")
{
    const auto data = random_log(300, 10, 40, 1);
    const auto same = kcore_filter(data, 1);
    CHECK(same.records == data.records);
    CHECK(same.items.size == data.items.size);

    // Item A twice, item B five times.
    std::string csv = "user_id,video_id,time_ms,date,is_like,is_hate\n";
    for (int i = 0; i < 2; ++i)
        csv += "1,10," + std::to_string(i) + ",0,0,0\n";
    for (int i = 0; i < 5; ++i)
        csv += "2,20," + std::to_string(i) + ",0,1,0\n";
    const auto ab = parse_log_text(csv, small_columns(), BehaviorSchema::movielens()).dataset;
    const auto filtered = kcore_filter(ab, 3);
    CHECK(filtered.records.size() == 5);
    CHECK(filtered.items.size == 1);
    CHECK(filtered.item_original_ids == std::vector<std::int64_t>{20});
    CHECK_THROWS_AS(kcore_filter(ab, 6), DataError);
    CHECK_THROWS_AS(kcore_filter(ab, 0), DataError);
}

TEST_CASE("kcore_filter matches a count-then-drop oracle")
{
    const auto data = random_log(1000, 30, 150, 2);
    const auto filtered = kcore_filter(data, 10);

    std::map<std::int64_t, int> counts;
    for (const auto& r : data.records)
        ++counts[data.item_original_ids[static_cast<std::size_t>(r.item)]];
    std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>> expected;
    for (const auto& r : data.records) {
        const auto orig = data.item_original_ids[static_cast<std::size_t>(r.item)];
        if (counts[orig] >= 10)
            expected.emplace_back(data.user_original_ids[static_cast<std::size_t>(r.user)], orig, r.timestamp);
    }
    std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>> actual;
    for (const auto& r : filtered.records)
        actual.emplace_back(filtered.user_original_ids[static_cast<std::size_t>(r.user)],
            filtered.item_original_ids[static_cast<std::size_t>(r.item)], r.timestamp);
    CHECK(actual == expected);

    std::map<ItemId, int> survivors;
    for (const auto& r : filtered.records)
        ++survivors[r.item];
    for (const auto& [item, n] : survivors)
        CHECK(n >= 10);
    CHECK(static_cast<int>(survivors.size()) == filtered.items.size);
}

TEST_CASE("kcore fixpoint mode reaches a bipartite core")
{
    const auto data = random_log(2000, 40, 80, 3);
    const auto core = kcore_filter(data, 8, true);
    std::map<ItemId, int> item_counts;
    std::map<UserId, int> user_counts;
    for (const auto& r : core.records) {
        ++item_counts[r.item];
        ++user_counts[r.user];
    }
    for (const auto& [i, n] : item_counts)
        CHECK(n >= 8);
    for (const auto& [u, n] : user_counts)
        CHECK(n >= 8);
}

TEST_CASE("segment_sessions groups by day")
{
    std::string csv = "user_id,video_id,time_ms,date,is_like,is_hate\n"
                      "1,10,1,0,0,0\n1,11,2,0,0,0\n1,12,3,1,0,0\n";
    for (int d = 0; d < 7; ++d)
        csv += "2,10," + std::to_string(100 + d) + "," + std::to_string(d) + ",0,0\n";
    auto data = segment_sessions(parse_log_text(csv, small_columns(), BehaviorSchema::movielens()).dataset);
    REQUIRE(data.sessions.size() == 2);
    REQUIRE(data.sessions[0].size() == 2);
    CHECK(data.sessions[0][0].size() == 2);
    CHECK(data.sessions[0][1].size() == 1);
    CHECK(data.sessions[1].size() == 7);
}

TEST_CASE("segment_sessions matches a group-by oracle and partitions records")
{
    const auto data = segment_sessions(random_log(5000, 25, 60, 4));
    std::map<std::int64_t, std::set<std::int32_t>> oracle;
    for (const auto& r : data.records)
        oracle[data.user_original_ids[static_cast<std::size_t>(r.user)]].insert(r.date);
    std::size_t covered = 0;
    for (std::size_t u = 0; u < data.sessions.size(); ++u) {
        CHECK(data.sessions[u].size() == oracle[data.user_original_ids[u]].size());
        for (std::size_t s = 0; s < data.sessions[u].size(); ++s) {
            const auto& session = data.sessions[u][s];
            if (s > 0)
                CHECK(data.sessions[u][s - 1].end == session.begin);
            for (std::size_t i = session.begin; i < session.end; ++i) {
                CHECK(data.records[i].date == session.date);
                CHECK(data.records[i].user == static_cast<UserId>(u));
            }
            covered += session.size();
        }
    }
    CHECK(covered == data.records.size());
}

TEST_CASE("split_train_test per-user chronological")
{
    std::string csv = "user_id,video_id,time_ms,date,is_like,is_hate\n";
    for (int i = 0; i < 10; ++i)
        csv += "1,10," + std::to_string(1000 + i) + ",0,0,0\n";
    csv += "2,10,5,0,1,0\n";
    const auto data = parse_log_text(csv, small_columns(), BehaviorSchema::movielens()).dataset;
    const auto split = split_train_test(data, 0.8);
    std::size_t train_u0 = 0, test_u0 = 0, train_u1 = 0, test_u1 = 0;
    for (const auto& r : split.train.records)
        (r.user == 0 ? train_u0 : train_u1)++;
    for (const auto& r : split.test.records)
        (r.user == 0 ? test_u0 : test_u1)++;
    CHECK(train_u0 == 8);
    CHECK(test_u0 == 2);
    CHECK(train_u1 == 1);
    CHECK(test_u1 == 0);
    CHECK_THROWS_AS(split_train_test(data, 1.0), DataError);
    CHECK_THROWS_AS(split_train_test(data, 0.0), DataError);
}

TEST_CASE("split_train_test fractions and leakage")
{
    const auto data = random_log(10000, 50, 100, 5);
    const auto split = split_train_test(data, 0.8);
    CHECK(split.train.records.size() + split.test.records.size() == data.records.size());
    const double frac = static_cast<double>(split.train.records.size()) / static_cast<double>(data.records.size());
    CHECK(std::abs(frac - 0.8) < 0.02);

    // Count oracle: ceil(0.8 n) per user.
    std::map<UserId, std::size_t> n;
    for (const auto& r : data.records)
        ++n[r.user];
    std::map<UserId, std::size_t> train_n;
    std::map<UserId, std::int64_t> max_train, min_test;
    for (const auto& r : split.train.records) {
        ++train_n[r.user];
        max_train[r.user] = std::max(max_train[r.user], r.timestamp);
    }
    for (const auto& r : split.test.records)
        min_test[r.user] = min_test.count(r.user) ? std::min(min_test[r.user], r.timestamp) : r.timestamp;
    for (const auto& [u, count] : n) {
        const std::size_t expected = count < 2 ? count : static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(count) - 1e-9));
        CHECK(train_n[u] == expected);
        if (min_test.count(u))
            CHECK(max_train[u] < min_test[u]);
    }
}

TEST_CASE("binary container and csv round trips")
{
    auto log = synth_generate({.users = 20, .items = 30, .days = 10, .seed = 3});
    const auto& data = log.dataset;
    CHECK(deserialize_dataset(serialize_dataset(data)) == data);

    const auto filtered = kcore_filter(data, 3);
    CHECK(deserialize_dataset(serialize_dataset(filtered)) == filtered);

    ColumnSpec columns;
    columns.behaviors = data.schema.names();
    const auto reparsed = parse_log_text(log_to_csv(data, columns), columns, data.schema).dataset;
    CHECK(reparsed.records.size() == data.records.size());
    CHECK(segment_sessions(reparsed).records == data.records);

    CHECK_THROWS_AS(deserialize_dataset("garbage"), DataError);
    auto bytes = serialize_dataset(data);
    bytes.pop_back();
    CHECK_THROWS_AS(deserialize_dataset(bytes), DataError);
}

TEST_CASE("synth_generate determinism and structure")
{
    SyntheticConfig config{.users = 30, .items = 40, .days = 15, .seed = 77};
    CHECK(serialize_dataset(synth_generate(config).dataset) == serialize_dataset(synth_generate(config).dataset));
    config.seed = 78;
    const auto other = synth_generate(config);
    CHECK(other.dataset.records.size() > 0);

    SyntheticConfig daily{.users = 5, .items = 20, .days = 12, .seed = 1, .p_ret_min = 1.0, .p_ret_max = 1.0};
    const auto log = synth_generate(daily);
    for (const auto& list : log.dataset.sessions) {
        REQUIRE(list.size() == 12);
        for (std::size_t s = 0; s < list.size(); ++s)
            CHECK(list[s].date == static_cast<std::int32_t>(s));
    }
    CHECK_THROWS_AS(synth_generate({.users = 0}), DataError);
}

TEST_CASE("synthetic behavior draws match the logistic ground truth")
{
    const auto log = synth_generate({.users = 10, .items = 10, .days = 2, .seed = 5});
    Rng rng(123);
    for (auto [u, i] : {std::pair{0, 0}, std::pair{3, 7}, std::pair{9, 2}}) {
        int clicks = 0;
        for (int n = 0; n < 10000; ++n)
            clicks += has_behavior(sample_behaviors(log.truth, u, i, rng), 0);
        CHECK(std::abs(clicks / 10000.0 - log.truth.behavior_probability(u, i, 0)) < 0.02);
    }
}

TEST_CASE("summarize_distributions")
{
    std::string csv = "user_id,video_id,time_ms,date,is_like,is_hate\n";
    for (int i = 0; i < 5; ++i)
        csv += "1,10," + std::to_string(i * 3'600'000) + ",0,1,0\n";
    const auto all_like = segment_sessions(parse_log_text(csv, small_columns(), BehaviorSchema::movielens()).dataset);
    const auto report = summarize_distributions(all_like);
    CHECK(report.behavior_rates[0] == 1.0);
    CHECK(report.behavior_rates[1] == 0.0);
    CHECK(report.same_day_gap_hours[1] == 4);

    const auto log = synth_generate({.users = 300, .items = 50, .days = 365, .seed = 9, .p_ret_min = 0.5, .p_ret_max = 0.5});
    const auto pmf = summarize_distributions(log.dataset).return_day_pmf();
    const auto expected = truncated_geometric_pmf(0.5, 10);
    double tv = 0.0;
    for (std::size_t d = 0; d < pmf.size(); ++d)
        tv += 0.5 * std::abs(pmf[d] - expected[d]);
    CHECK(tv < 0.02);

    auto unsegmented = all_like;
    unsegmented.sessions.clear();
    CHECK_THROWS_AS(summarize_distributions(unsegmented), DataError);
}
