#pragma once

#include <slatesim/core/types.hpp>

#include <iosfwd>
#include <vector>

namespace slatesim {

    /// One environment step as recorded in the trajectory log.
    struct TrajectoryStep {
        std::int64_t episode = 0;
        int session_index = 0;
        int step = 0; // 1-based within the session
        UserId user = 0;
        std::vector<ItemId> slate;
        BitMatrix feedback; // b x K
        double raw_reward = 0.0;
        double reward = 0.0;
        double temper = 0.0;
        bool leave = false;
        int return_day = 0; // 0 unless leave

        bool operator==(const TrajectoryStep& other) const;
    };

    using Trajectory = std::vector<TrajectoryStep>;

    /// One JSON object per line. Feedback rows are bit strings, one per behavior.
    void write_trajectory_jsonl(std::ostream& out, const Trajectory& steps);
    Trajectory read_trajectory_jsonl(std::istream& in);

} // namespace slatesim
