#include <slatesim/core/error.hpp>
#include <slatesim/data/summary.hpp>

#include <json.hpp>

#include <algorithm>

namespace slatesim::data {

    namespace {
        constexpr std::int64_t kHourMs = 3'600'000;
        constexpr std::size_t kSameDayBins = 24;
        constexpr std::size_t kCrossDayBins = 241;
    } // namespace

    std::vector<double> DistributionReport::return_day_pmf() const
    {
        std::size_t total = 0;
        for (auto c : return_day_counts)
            total += c;
        std::vector<double> pmf(return_day_counts.size(), 0.0);
        if (total == 0)
            return pmf;
        for (std::size_t i = 0; i < pmf.size(); ++i)
            pmf[i] = static_cast<double>(return_day_counts[i]) / static_cast<double>(total);
        return pmf;
    }

    double DistributionReport::mean_return_day() const
    {
        const auto pmf = return_day_pmf();
        double mean = 0.0;
        for (std::size_t i = 0; i < pmf.size(); ++i)
            mean += static_cast<double>(i + 1) * pmf[i];
        return mean;
    }

    DistributionReport summarize_distributions(const LogDataset& data, int max_return_day)
    {
        if (!data.segmented())
            throw DataError("summarize_distributions needs a segmented dataset");
        if (max_return_day < 1)
            throw DataError("max_return_day must be positive");

        DistributionReport report;
        report.max_return_day = max_return_day;
        report.behavior_names = data.schema.names();
        report.behavior_rates.assign(static_cast<std::size_t>(data.schema.size()), 0.0);
        report.same_day_gap_hours.assign(kSameDayBins, 0);
        report.cross_day_gap_hours.assign(kCrossDayBins, 0);
        report.return_day_counts.assign(static_cast<std::size_t>(max_return_day), 0);

        for (const auto& r : data.records)
            for (int b = 0; b < data.schema.size(); ++b)
                if (has_behavior(r.behaviors, b))
                    report.behavior_rates[static_cast<std::size_t>(b)] += 1.0;
        if (!data.records.empty())
            for (auto& rate : report.behavior_rates)
                rate /= static_cast<double>(data.records.size());

        for (const auto& list : data.sessions) {
            for (std::size_t s = 0; s < list.size(); ++s) {
                const auto& session = list[s];
                for (std::size_t i = session.begin + 1; i < session.end; ++i) {
                    const auto hours = static_cast<std::size_t>((data.records[i].timestamp - data.records[i - 1].timestamp) / kHourMs);
                    ++report.same_day_gap_hours[std::min(hours, kSameDayBins - 1)];
                }
                if (s + 1 < list.size()) {
                    const auto& next = list[s + 1];
                    const auto hours = static_cast<std::size_t>(
                        std::max<std::int64_t>(0, data.records[next.begin].timestamp - data.records[session.end - 1].timestamp) / kHourMs);
                    ++report.cross_day_gap_hours[std::min(hours, kCrossDayBins - 1)];
                    const int gap = std::clamp(next.date - session.date, 1, max_return_day);
                    ++report.return_day_counts[static_cast<std::size_t>(gap - 1)];
                }
            }
        }
        return report;
    }

    void write_report_jsonl(std::ostream& out, const DistributionReport& report)
    {
        using nlohmann::json;
        for (std::size_t b = 0; b < report.behavior_names.size(); ++b)
            out << json{{"section", "behavior_rate"}, {"behavior", report.behavior_names[b]}, {"rate", report.behavior_rates[b]}}.dump()
                << '\n';
        for (std::size_t h = 0; h < report.same_day_gap_hours.size(); ++h)
            out << json{{"section", "same_day_gap_hours"}, {"bin", h}, {"count", report.same_day_gap_hours[h]}}.dump() << '\n';
        for (std::size_t h = 0; h < report.cross_day_gap_hours.size(); ++h)
            out << json{{"section", "cross_day_gap_hours"}, {"bin", h}, {"count", report.cross_day_gap_hours[h]}}.dump() << '\n';
        const auto pmf = report.return_day_pmf();
        for (std::size_t d = 0; d < report.return_day_counts.size(); ++d) {
            const bool tail = d + 1 == report.return_day_counts.size();
            out << json{{"section", "return_day"}, {"day", tail ? std::to_string(d + 1) + "+" : std::to_string(d + 1)},
                            {"count", report.return_day_counts[d]}, {"fraction", pmf[d]}}
                       .dump()
                << '\n';
        }
    }

} // namespace slatesim::data
