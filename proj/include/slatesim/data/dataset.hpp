#pragma once

#include <slatesim/core/profile_encoding.hpp>
#include <slatesim/core/types.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace slatesim::data {

    struct Session {
        std::size_t begin = 0; // index into LogDataset::records
        std::size_t end = 0; // one past the last record
        std::int32_t date = 0;

        std::size_t size() const { return end - begin; }
        bool operator==(const Session&) const = default;
    };

    /// Canonical interaction log. Users and items are contiguous ids; the original ids are kept
    /// in the side maps. Records are sorted by (user, timestamp).
    struct LogDataset {
        BehaviorSchema schema;
        std::vector<UserProfile> users; // users[u].user_id == u
        ItemCatalog items;
        std::vector<std::int64_t> user_original_ids;
        std::vector<std::int64_t> item_original_ids;
        std::vector<InteractionRecord> records;
        std::vector<std::vector<Session>> sessions; // per user, empty until segmented

        std::size_t user_count() const { return users.size(); }
        std::size_t session_count() const;
        bool segmented() const { return !sessions.empty(); }

        /// [begin, end) record range of each user; users without records get an empty range.
        std::vector<std::pair<std::size_t, std::size_t>> user_ranges() const;

        bool operator==(const LogDataset&) const = default;
    };

    /// Column names of a delimiter-separated log. Defaults follow the KuaiRand naming.
    struct ColumnSpec {
        std::string user = "user_id";
        std::string item = "video_id";
        std::string timestamp = "time_ms";
        std::string date = "date"; // empty: derive from timestamp
        std::vector<std::string> behaviors = {"is_click", "long_view", "is_like", "is_comment", "is_follow", "is_forward", "is_hate"};
        char delimiter = ',';
    };

    struct ParseResult {
        LogDataset dataset;
        std::size_t skipped_rows = 0;
    };

    /// Day key for a date column value: YYYYMMDD values become days since 1970-01-01,
    /// anything else is taken as a day key already.
    std::int32_t day_key_from_date(std::int64_t value);
    std::int32_t day_key_from_timestamp(std::int64_t timestamp_ms);

    /// Parses a header + rows table. Throws DataError on an empty file or a missing mandatory column.
    ParseResult parse_log(const std::filesystem::path& path, const ColumnSpec& columns, const BehaviorSchema& schema);
    ParseResult parse_log_text(const std::string& text, const ColumnSpec& columns, const BehaviorSchema& schema);

    /// Writes `data` in the layout parse_log reads (original ids, one row per record).
    void write_log_csv(const std::filesystem::path& path, const LogDataset& data, const ColumnSpec& columns);
    std::string log_to_csv(const LogDataset& data, const ColumnSpec& columns);

    /// Encodes profiles from a user-feature table keyed by `user_column`. Users absent from the
    /// table get a zero vector.
    void attach_user_features(LogDataset& data, const std::filesystem::path& path, const std::string& user_column,
        const ProfileSchema& schema, char delimiter = ',');

    /// Removes items with fewer than k occurrences together with their records, then re-indexes
    /// the catalog. A single pass unless `iterate_to_fixpoint`. Re-segments when `data` was segmented.
    LogDataset kcore_filter(const LogDataset& data, int k, bool iterate_to_fixpoint = false);

    /// One session per (user, date), chronological per user.
    LogDataset segment_sessions(LogDataset data);

    struct TrainTestSplit {
        LogDataset train;
        LogDataset test;
    };

    /// Per-user chronological split: the earliest ceil(ratio * n_u) records go to train. Users
    /// with fewer than two records go entirely to train. Records sharing the boundary timestamp
    /// stay in train.
    TrainTestSplit split_train_test(const LogDataset& data, double ratio);

    /// Versioned little-endian binary container, including the re-index maps and sessions.
    void write_dataset(const std::filesystem::path& path, const LogDataset& data);
    LogDataset read_dataset(const std::filesystem::path& path);
    std::string serialize_dataset(const LogDataset& data);
    LogDataset deserialize_dataset(const std::string& bytes);

} // namespace slatesim::data
