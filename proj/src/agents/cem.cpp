#include <slatesim/agents/cem.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace slatesim::agents {

    int CemConfig::elite_count() const
    {
        return std::clamp(static_cast<int>(std::lround(elite_frac * population)), 1, population);
    }

    void CemConfig::validate() const
    {
        if (population < 10)
            throw ConfigError("cem: population must be at least 10");
        if (!(elite_frac > 0.0 && elite_frac <= 1.0))
            throw ConfigError("cem: elite_frac must lie in (0, 1]");
        if (iterations < 1)
            throw ConfigError("cem: iterations must be positive");
        if (!(initial_std > 0.0) || !(min_variance > 0.0))
            throw ConfigError("cem: initial_std and min_variance must be positive");
    }

    std::vector<double> CemResult::best_trace() const
    {
        std::vector<double> out;
        for (const auto& it : iterations)
            out.push_back(it.best_value);
        return out;
    }

    CemResult cem_optimize(const CemObjective& objective, const Eigen::VectorXd& initial_mean, const CemConfig& config)
    {
        config.validate();
        const Eigen::Index dim = initial_mean.size();
        Rng rng(derive_seed(config.seed, "cem.sample"));
        CemResult result;
        result.mean = initial_mean;
        result.std = Eigen::VectorXd::Constant(dim, config.initial_std);
        result.best_value = -std::numeric_limits<double>::infinity();
        const int elites = config.elite_count();

        for (int iter = 0; iter < config.iterations; ++iter) {
            std::vector<Eigen::VectorXd> pop(static_cast<std::size_t>(config.population), Eigen::VectorXd(dim));
            for (auto& c : pop)
                for (Eigen::Index j = 0; j < dim; ++j)
                    c[j] = result.mean[j] + result.std[j] * standard_normal(rng);
            const std::vector<double> values = objective(pop, iter);
            if (values.size() != pop.size())
                throw ShapeError("cem: objective returned the wrong number of values");
            for (double v : values)
                if (!std::isfinite(v))
                    throw Error("cem: objective returned a non-finite value");

            std::vector<std::size_t> order(pop.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

            CemIteration rec;
            rec.population_mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
            if (values[order.front()] > result.best_value) {
                result.best_value = values[order.front()];
                result.best_params = pop[order.front()];
            }
            rec.best_value = result.best_value;

            const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
            if (*lo == *hi) {
                rec.frozen = true;
                rec.elite_mean = *lo;
                result.warnings.push_back("cem iteration " + std::to_string(iter) + ": all objectives equal, distribution frozen");
                result.iterations.push_back(rec);
                continue;
            }

            Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
            double elite_sum = 0.0;
            for (int e = 0; e < elites; ++e) {
                mean += pop[order[static_cast<std::size_t>(e)]];
                elite_sum += values[order[static_cast<std::size_t>(e)]];
            }
            mean /= elites;
            Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
            for (int e = 0; e < elites; ++e)
                var += (pop[order[static_cast<std::size_t>(e)]] - mean).array().square().matrix();
            var /= elites;
            result.mean = mean;
            result.std = var.cwiseMax(config.min_variance).cwiseSqrt();
            rec.elite_mean = elite_sum / elites;
            result.iterations.push_back(rec);
        }
        return result;
    }

    LinearPolicyAgent::LinearPolicyAgent(StateFeaturizer featurizer, ItemCatalog catalog, int k, const Eigen::VectorXd& params)
        : _featurizer(std::move(featurizer)), _catalog(std::move(catalog)), _k(k)
    {
        const Eigen::Index s = _featurizer.dim();
        const Eigen::Index a = _catalog.embedding_dim();
        if (params.size() != param_count(s, a))
            throw ShapeError("linear policy: expected " + std::to_string(param_count(s, a)) + " parameters");
        if (k < 1 || k > _catalog.size)
            throw ConfigError("linear policy: slate size outside the catalog");
        const Eigen::VectorXf p = params.cast<float>();
        _w = _store.add("linear.weight", Eigen::Map<const Eigen::MatrixXf>(p.data(), a, s));
        _b = _store.add("linear.bias", p.tail(a));
    }

    Decision LinearPolicyAgent::decide(const Observation& obs, bool)
    {
        Decision d;
        d.state = _featurizer(obs);
        d.action = (_store.value(_w) * d.state + _store.value(_b).col(0)).array().tanh().matrix();
        d.slate = hyperaction_to_slate(d.action, _catalog, _k, 0.0, nullptr);
        return d;
    }

    std::vector<std::pair<std::string, nn::ParamStore<float>*>> LinearPolicyAgent::mutable_stores() { return {{"policy/", &_store}}; }

} // namespace slatesim::agents
