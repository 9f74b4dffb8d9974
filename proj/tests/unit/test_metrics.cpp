#include <doctest.h>

#include <slatesim/core/error.hpp>
#include <slatesim/core/rng.hpp>
#include <slatesim/metrics/metrics.hpp>

#include <cmath>
#include <set>
#include <sstream>

using namespace slatesim;
using namespace slatesim::metrics;

namespace {

    double pairwise_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y)
    {
        double wins = 0.0;
        double pairs = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t j = 0; j < s.size(); ++j)
                if (y[i] && !y[j]) {
                    pairs += 1.0;
                    wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
                }
        return wins / pairs;
    }

    double naive_cos(const Eigen::MatrixXf& e, int a, int b)
    {
        double dot = 0, na = 0, nb = 0;
        for (Eigen::Index c = 0; c < e.cols(); ++c) {
            dot += double(e(a, c)) * e(b, c);
            na += double(e(a, c)) * e(a, c);
            nb += double(e(b, c)) * e(b, c);
        }
        if (na == 0 || nb == 0)
            return 0;
        return dot / (std::sqrt(na) * std::sqrt(nb));
    }

    BitMatrix random_bits(int rows, int cols, Rng& rng)
    {
        BitMatrix m(rows, cols);
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r)
                m(r, c) = uniform01(rng) < 0.4;
        return m;
    }

} // namespace

TEST_CASE("auc: perfect, chance, tie handling and pairwise oracle")
{
    std::vector<double> s{0.1, 0.2, 0.8, 0.9};
    std::vector<std::uint8_t> y{0, 0, 1, 1};
    CHECK(*auc(s, y) == 1.0);
    CHECK_FALSE(auc(s, std::vector<std::uint8_t>{1, 1, 1, 1}).has_value());

    // 20-point hand case with ties across classes.
    std::vector<double> hs{0.5, 0.1, 0.5, 0.9, 0.3, 0.3, 0.7, 0.2, 0.5, 0.8, 0.6, 0.3, 0.4, 0.9, 0.1, 0.7, 0.5, 0.2, 0.6, 0.4};
    std::vector<std::uint8_t> hy{1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0};
    CHECK(*auc(hs, hy) == pairwise_auc(hs, hy));

    Rng rng(4);
    std::vector<double> cs(200'000);
    std::vector<std::uint8_t> cy(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
        cs[i] = uniform01(rng);
        cy[i] = uniform01(rng) < 0.3;
    }
    CHECK(std::abs(*auc(cs, cy) - 0.5) < 0.02);
}

TEST_CASE("auc matches pairwise oracle on random small instances")
{
    Rng rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 30);
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(uniform_index(rng, 6)); // heavy ties
            y[i] = uniform01(rng) < 0.5;
        }
        const auto got = auc(s, y);
        const bool both = std::set<std::uint8_t>(y.begin(), y.end()).size() == 2;
        REQUIRE(got.has_value() == both);
        if (both)
            CHECK(std::abs(*got - pairwise_auc(s, y)) <= 1e-12);
    }
}

TEST_CASE("l_reward on the KuaiRand schema")
{
    const auto schema = BehaviorSchema::kuairand();
    std::vector<BitMatrix> zero{BitMatrix::Zero(7, 3), BitMatrix::Zero(7, 3)};
    auto r = l_reward(zero, schema);
    CHECK(r.avg == 0.0);
    CHECK(r.max == 0.0);

    BitMatrix all_positive = BitMatrix::Ones(7, 4);
    all_positive.row(6).setZero();
    std::vector<BitMatrix> one{all_positive};
    CHECK(l_reward(one, schema).max == 6.0);
    CHECK_THROWS_AS(l_reward(std::vector<BitMatrix>{}, schema), ShapeError);

    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<BitMatrix> batch;
        for (int i = 0; i < 8; ++i)
            batch.push_back(random_bits(7, 5, rng));
        double total = 0, best = -1e9;
        for (const auto& fb : batch) {
            double slate = 0;
            for (int k = 0; k < 5; ++k)
                for (int b = 0; b < 7; ++b)
                    slate += fb(b, k) * (b == 6 ? -1.0 : 1.0);
            slate /= 5;
            total += slate;
            best = std::max(best, slate);
        }
        const auto got = l_reward(batch, schema);
        CHECK(got.avg == doctest::Approx(total / 8).epsilon(1e-14));
        CHECK(got.max == best);
    }
}

TEST_CASE("coverage and ild")
{
    std::vector<SlateAction> slates{{{1, 2}}, {{2, 3}}};
    CHECK(coverage(slates) == 3);
    std::vector<SlateAction> same(5, SlateAction{{4, 7, 9}});
    CHECK(coverage(same) == 3);

    const Eigen::MatrixXf identity = Eigen::MatrixXf::Identity(4, 4);
    std::vector<SlateAction> orth{{{0, 1, 2, 3}}};
    CHECK(ild(orth, identity) == doctest::Approx(1.0));
    Eigen::MatrixXf dup(2, 3);
    dup << 1, 2, 3, 2, 4, 6;
    std::vector<SlateAction> parallel{{{0, 1}}};
    CHECK(ild(parallel, dup) == doctest::Approx(0.0).epsilon(1e-7));

    Rng rng(5);
    Eigen::MatrixXf emb(40, 6);
    for (Eigen::Index i = 0; i < emb.size(); ++i)
        emb(i) = static_cast<float>(standard_normal(rng));
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<SlateAction> batch;
        std::set<ItemId> all;
        double oracle = 0;
        for (int s = 0; s < 6; ++s) {
            SlateAction a;
            std::set<ItemId> in;
            while (in.size() < 4) {
                const auto id = static_cast<ItemId>(uniform_index(rng, 40));
                if (in.insert(id).second)
                    a.items.push_back(id);
            }
            all.insert(in.begin(), in.end());
            double pair_sum = 0;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    if (i != j)
                        pair_sum += 1 - naive_cos(emb, a.items[i], a.items[j]);
            oracle += pair_sum / 12;
            batch.push_back(a);
        }
        CHECK(coverage(batch) == static_cast<int>(all.size()));
        CHECK(std::abs(ild(batch, emb) - oracle / 6) < 1e-10);
    }
}

TEST_CASE("session and retention metrics")
{
    Trajectory t;
    for (int s = 1; s <= 3; ++s) {
        TrajectoryStep step;
        step.step = s;
        step.reward = 0.5;
        step.leave = s == 3;
        step.return_day = s == 3 ? 1 : 0;
        t.push_back(step);
    }
    const auto sm = session_metrics(t);
    CHECK(sm.depth == 3.0);
    CHECK(sm.total_reward == 1.5);
    CHECK(sm.avg_reward == 0.5);
    const auto rm = retention_metrics(t);
    CHECK(rm.return_day == 1.0);
    CHECK(rm.user_retention == 1.0);

    Trajectory two;
    for (int e = 0; e < 2; ++e) {
        TrajectoryStep step;
        step.episode = e;
        step.leave = true;
        step.return_day = e == 0 ? 1 : 3;
        two.push_back(step);
    }
    const auto r2 = retention_metrics(two);
    CHECK(r2.return_day == 2.0);
    CHECK(r2.user_retention == 0.5);
}

TEST_CASE("metrics recomputed from a serialized trajectory are bit-identical")
{
    Rng rng(17);
    Trajectory t;
    for (int e = 0; e < 20; ++e) {
        const int depth = 1 + static_cast<int>(uniform_index(rng, 6));
        for (int s = 1; s <= depth; ++s) {
            TrajectoryStep step;
            step.episode = e;
            step.step = s;
            step.user = e;
            step.slate = {static_cast<ItemId>(uniform_index(rng, 10)), static_cast<ItemId>(10 + uniform_index(rng, 10))};
            step.feedback = random_bits(7, 2, rng);
            step.raw_reward = uniform01(rng) * 3;
            step.reward = step.raw_reward / 6;
            step.temper = 10 - s * uniform01(rng);
            step.leave = s == depth;
            step.return_day = step.leave ? 1 + static_cast<int>(uniform_index(rng, 10)) : 0;
            t.push_back(step);
        }
    }
    std::stringstream io;
    write_trajectory_jsonl(io, t);
    const auto back = read_trajectory_jsonl(io);
    REQUIRE(back == t);

    Eigen::MatrixXf emb = Eigen::MatrixXf::Random(20, 4);
    const auto schema = BehaviorSchema::kuairand();
    CHECK(trajectory_metrics(t, schema, emb, 8) == trajectory_metrics(back, schema, emb, 8));
}

TEST_CASE("report aggregation and exports")
{
    std::vector<MetricSample> seeds{{{"depth", 2.0}, {"ild", 0.5}}, {{"depth", 4.0}, {"ild", 0.5}}};
    const auto report = aggregate(seeds);
    CHECK(report.values.at("depth").mean == 3.0);
    CHECK(report.values.at("depth").std == doctest::Approx(std::sqrt(2.0)));
    CHECK(report.values.at("ild").std == 0.0);
    CHECK(report_from_json(report_to_json(report)) == report);

    MetricSample ten;
    for (int i = 0; i < 10; ++i)
        ten["m" + std::to_string(i)] = i;
    const auto csv = report_to_csv(aggregate({ten}));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
    CHECK(report_to_csv(aggregate({ten})) == csv);
}
