#pragma once

#include <slatesim/data/dataset.hpp>

#include <ostream>
#include <vector>

namespace slatesim::data {

    struct DistributionReport {
        std::vector<std::string> behavior_names;
        std::vector<double> behavior_rates;
        /// Hours between consecutive requests on the same day; last bin collects >= 23 h.
        std::vector<std::size_t> same_day_gap_hours;
        /// Hours between the last request of a session and the first of the next, last bin >= 240 h.
        std::vector<std::size_t> cross_day_gap_hours;
        /// Index d-1 counts return gaps of d days for d < max_return_day; the last bin holds d >= max_return_day.
        std::vector<std::size_t> return_day_counts;
        int max_return_day = 10;

        std::vector<double> return_day_pmf() const;
        double mean_return_day() const;
    };

    /// Requires a segmented dataset (throws DataError otherwise).
    DistributionReport summarize_distributions(const LogDataset& data, int max_return_day = 10);

    /// One JSON object per line, `{"section": ..., ...}`.
    void write_report_jsonl(std::ostream& out, const DistributionReport& report);

} // namespace slatesim::data
