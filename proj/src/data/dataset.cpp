#include <slatesim/core/error.hpp>
#include <slatesim/data/dataset.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <unordered_map>

namespace slatesim::data {

    namespace {

        std::vector<std::string_view> split_line(std::string_view line, char delimiter)
        {
            std::vector<std::string_view> fields;
            std::size_t start = 0;
            while (true) {
                const std::size_t pos = line.find(delimiter, start);
                if (pos == std::string_view::npos) {
                    fields.push_back(line.substr(start));
                    break;
                }
                fields.push_back(line.substr(start, pos - start));
                start = pos + 1;
            }
            for (auto& f : fields) {
                while (!f.empty() && (f.front() == ' ' || f.front() == '"'))
                    f.remove_prefix(1);
                while (!f.empty() && (f.back() == ' ' || f.back() == '"' || f.back() == '\r'))
                    f.remove_suffix(1);
            }
            return fields;
        }

        bool parse_int(std::string_view text, std::int64_t& out)
        {
            if (text.empty())
                return false;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
            if (ec == std::errc() && ptr == text.data() + text.size())
                return true;
            // Accept integral values written as floats, e.g. "1.0".
            double d = 0.0;
            auto [p2, e2] = std::from_chars(text.data(), text.data() + text.size(), d);
            if (e2 != std::errc() || p2 != text.data() + text.size() || !std::isfinite(d) || d != std::floor(d))
                return false;
            out = static_cast<std::int64_t>(d);
            return true;
        }

        bool parse_flag(std::string_view text, bool& out)
        {
            double d = 0.0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
            if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(d))
                return false;
            out = d != 0.0;
            return true;
        }

        std::string read_file(const std::filesystem::path& path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw DataError("cannot open " + path.string());
            return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        }

        void sort_records(std::vector<InteractionRecord>& records)
        {
            std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
                return std::tie(a.user, a.timestamp) < std::tie(b.user, b.timestamp);
            });
        }

        std::vector<std::vector<Session>> build_sessions(const LogDataset& data)
        {
            std::vector<std::vector<Session>> sessions(data.users.size());
            const auto& recs = data.records;
            std::size_t i = 0;
            while (i < recs.size()) {
                std::size_t j = i + 1;
                while (j < recs.size() && recs[j].user == recs[i].user && recs[j].date == recs[i].date)
                    ++j;
                sessions[static_cast<std::size_t>(recs[i].user)].push_back({i, j, recs[i].date});
                i = j;
            }
            return sessions;
        }

        // Keeps records whose item passes `keep_item` and whose user passes `keep_user`; re-indexes both id spaces.
        LogDataset restrict(const LogDataset& data, const std::vector<bool>& keep_user, const std::vector<bool>& keep_item)
        {
            LogDataset out;
            out.schema = data.schema;

            std::vector<ItemId> item_map(static_cast<std::size_t>(data.items.size), -1);
            std::vector<Eigen::Index> item_rows;
            for (std::size_t i = 0; i < item_map.size(); ++i)
                if (keep_item[i]) {
                    item_map[i] = static_cast<ItemId>(item_rows.size());
                    item_rows.push_back(static_cast<Eigen::Index>(i));
                    out.item_original_ids.push_back(data.item_original_ids[i]);
                }
            out.items.size = static_cast<std::int32_t>(item_rows.size());
            out.items.features.resize(static_cast<Eigen::Index>(item_rows.size()), data.items.features.cols());
            for (std::size_t r = 0; r < item_rows.size(); ++r)
                out.items.features.row(static_cast<Eigen::Index>(r)) = data.items.features.row(item_rows[r]);

            std::vector<UserId> user_map(data.users.size(), -1);
            for (std::size_t u = 0; u < data.users.size(); ++u)
                if (keep_user[u]) {
                    user_map[u] = static_cast<UserId>(out.users.size());
                    UserProfile p = data.users[u];
                    p.user_id = user_map[u];
                    out.users.push_back(std::move(p));
                    out.user_original_ids.push_back(data.user_original_ids[u]);
                }

            for (const auto& r : data.records) {
                const ItemId item = item_map[static_cast<std::size_t>(r.item)];
                const UserId user = user_map[static_cast<std::size_t>(r.user)];
                if (item < 0 || user < 0)
                    continue;
                InteractionRecord copy = r;
                copy.item = item;
                copy.user = user;
                out.records.push_back(copy);
            }
            if (data.segmented())
                out.sessions = build_sessions(out);
            return out;
        }

        template <typename T>
        void put(std::string& out, T value)
        {
            using U = std::make_unsigned_t<T>;
            const auto v = static_cast<std::uint64_t>(static_cast<U>(value));
            for (std::size_t i = 0; i < sizeof(T); ++i)
                out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }

        void put_f32(std::string& out, float v) { put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v)); }
        void put_f64(std::string& out, double v) { put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v)); }
        void put_str(std::string& out, const std::string& s)
        {
            put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
            out += s;
        }

        class ByteReader {
        public:
            explicit ByteReader(const std::string& bytes) : _bytes(bytes) {}

            template <typename T>
            T get()
            {
                using U = std::make_unsigned_t<T>;
                if (_pos + sizeof(T) > _bytes.size())
                    throw DataError("dataset container truncated");
                std::uint64_t v = 0;
                for (std::size_t i = 0; i < sizeof(T); ++i)
                    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(_bytes[_pos + i])) << (8 * i);
                _pos += sizeof(T);
                return static_cast<T>(static_cast<U>(v));
            }
            float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
            double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
            std::string str()
            {
                const auto n = get<std::uint32_t>();
                if (_pos + n > _bytes.size())
                    throw DataError("dataset container truncated");
                std::string s = _bytes.substr(_pos, n);
                _pos += n;
                return s;
            }
            bool done() const { return _pos == _bytes.size(); }

        private:
            const std::string& _bytes;
            std::size_t _pos = 0;
        };

        constexpr char kDataMagic[8] = {'S', 'L', 'S', 'M', 'D', 'A', 'T', 'A'};
        constexpr std::uint32_t kDataVersion = 1;

    } // namespace

    std::size_t LogDataset::session_count() const
    {
        std::size_t n = 0;
        for (const auto& s : sessions)
            n += s.size();
        return n;
    }

    std::vector<std::pair<std::size_t, std::size_t>> LogDataset::user_ranges() const
    {
        std::vector<std::pair<std::size_t, std::size_t>> ranges(users.size(), {0, 0});
        std::size_t i = 0;
        while (i < records.size()) {
            std::size_t j = i + 1;
            while (j < records.size() && records[j].user == records[i].user)
                ++j;
            ranges[static_cast<std::size_t>(records[i].user)] = {i, j};
            i = j;
        }
        return ranges;
    }

    std::int32_t day_key_from_date(std::int64_t value)
    {
        if (value >= 19000101 && value <= 99991231) {
            using namespace std::chrono;
            const year_month_day ymd{year{static_cast<int>(value / 10000)}, month{static_cast<unsigned>((value / 100) % 100)},
                day{static_cast<unsigned>(value % 100)}};
            if (ymd.ok())
                return static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count());
        }
        return static_cast<std::int32_t>(value);
    }

    std::int32_t day_key_from_timestamp(std::int64_t timestamp_ms)
    {
        constexpr std::int64_t day_ms = 86'400'000;
        std::int64_t q = timestamp_ms / day_ms;
        if (timestamp_ms % day_ms != 0 && timestamp_ms < 0)
            --q;
        return static_cast<std::int32_t>(q);
    }

    ParseResult parse_log_text(const std::string& text, const ColumnSpec& columns, const BehaviorSchema& schema)
    {
        if (columns.behaviors.size() != static_cast<std::size_t>(schema.size()))
            throw DataError("column spec names " + std::to_string(columns.behaviors.size()) + " behavior columns, schema has "
                + std::to_string(schema.size()));

        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line) || split_line(line, columns.delimiter).empty() || line.find_first_not_of(" \r\t") == std::string::npos)
            throw DataError("empty log file");

        const auto header = split_line(line, columns.delimiter);
        auto column_index = [&](const std::string& name, bool required) -> long {
            for (std::size_t i = 0; i < header.size(); ++i)
                if (header[i] == name)
                    return static_cast<long>(i);
            if (required)
                throw DataError("missing mandatory column '" + name + "'");
            return -1;
        };
        const long user_col = column_index(columns.user, true);
        const long item_col = column_index(columns.item, true);
        const long time_col = column_index(columns.timestamp, true);
        const long date_col = columns.date.empty() ? -1 : column_index(columns.date, true);
        std::vector<long> behavior_cols;
        for (const auto& name : columns.behaviors)
            behavior_cols.push_back(column_index(name, true));

        struct RawRow {
            std::int64_t user, item, timestamp;
            std::int32_t date;
            BehaviorBits bits;
        };
        std::vector<RawRow> rows;
        ParseResult result;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \r\t") == std::string::npos)
                continue;
            const auto fields = split_line(line, columns.delimiter);
            if (fields.size() != header.size()) {
                ++result.skipped_rows;
                continue;
            }
            RawRow row{};
            bool ok = parse_int(fields[static_cast<std::size_t>(user_col)], row.user)
                && parse_int(fields[static_cast<std::size_t>(item_col)], row.item)
                && parse_int(fields[static_cast<std::size_t>(time_col)], row.timestamp);
            if (ok && date_col >= 0) {
                std::int64_t d = 0;
                ok = parse_int(fields[static_cast<std::size_t>(date_col)], d);
                row.date = day_key_from_date(d);
            }
            else {
                row.date = day_key_from_timestamp(row.timestamp);
            }
            for (std::size_t b = 0; ok && b < behavior_cols.size(); ++b) {
                bool flag = false;
                ok = parse_flag(fields[static_cast<std::size_t>(behavior_cols[b])], flag);
                if (flag)
                    row.bits |= BehaviorBits{1} << b;
            }
            if (!ok) {
                ++result.skipped_rows;
                continue;
            }
            rows.push_back(row);
        }
        if (rows.empty())
            throw DataError("log contains no well-formed rows");

        std::map<std::int64_t, UserId> user_ids;
        std::map<std::int64_t, ItemId> item_ids;
        for (const auto& r : rows) {
            user_ids.emplace(r.user, 0);
            item_ids.emplace(r.item, 0);
        }
        LogDataset& data = result.dataset;
        data.schema = schema;
        for (auto& [orig, id] : user_ids) {
            id = static_cast<UserId>(data.users.size());
            data.users.push_back({id, Eigen::VectorXf::Ones(1)});
            data.user_original_ids.push_back(orig);
        }
        for (auto& [orig, id] : item_ids) {
            id = static_cast<ItemId>(data.item_original_ids.size());
            data.item_original_ids.push_back(orig);
        }
        data.items.size = static_cast<std::int32_t>(item_ids.size());
        data.items.features.resize(data.items.size, 0);

        data.records.reserve(rows.size());
        for (const auto& r : rows)
            data.records.push_back({user_ids[r.user], item_ids[r.item], r.timestamp, r.date, r.bits});
        sort_records(data.records);
        return result;
    }

    ParseResult parse_log(const std::filesystem::path& path, const ColumnSpec& columns, const BehaviorSchema& schema)
    {
        return parse_log_text(read_file(path), columns, schema);
    }

    std::string log_to_csv(const LogDataset& data, const ColumnSpec& columns)
    {
        const std::string d(1, columns.delimiter);
        std::string out = columns.user + d + columns.item + d + columns.timestamp;
        if (!columns.date.empty())
            out += d + columns.date;
        for (const auto& b : columns.behaviors)
            out += d + b;
        out += '\n';
        for (const auto& r : data.records) {
            out += std::to_string(data.user_original_ids[static_cast<std::size_t>(r.user)]) + d
                + std::to_string(data.item_original_ids[static_cast<std::size_t>(r.item)]) + d + std::to_string(r.timestamp);
            if (!columns.date.empty())
                out += d + std::to_string(r.date);
            for (int b = 0; b < data.schema.size(); ++b)
                out += d + (has_behavior(r.behaviors, b) ? "1" : "0");
            out += '\n';
        }
        return out;
    }

    void write_log_csv(const std::filesystem::path& path, const LogDataset& data, const ColumnSpec& columns)
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot write " + path.string());
        out << log_to_csv(data, columns);
    }

    void attach_user_features(LogDataset& data, const std::filesystem::path& path, const std::string& user_column,
        const ProfileSchema& schema, char delimiter)
    {
        std::istringstream in(read_file(path));
        std::string line;
        if (!std::getline(in, line))
            throw DataError("empty user feature file");
        const auto header = split_line(line, delimiter);
        long user_col = -1;
        std::vector<long> field_cols;
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == user_column)
                user_col = static_cast<long>(i);
        if (user_col < 0)
            throw DataError("missing mandatory column '" + user_column + "'");
        for (const auto& f : schema.fields) {
            auto it = std::find(header.begin(), header.end(), f.name);
            if (it == header.end())
                throw DataError("missing profile column '" + f.name + "'");
            field_cols.push_back(static_cast<long>(it - header.begin()));
        }

        std::unordered_map<std::int64_t, UserId> lookup;
        for (std::size_t u = 0; u < data.user_original_ids.size(); ++u)
            lookup[data.user_original_ids[u]] = static_cast<UserId>(u);
        for (auto& p : data.users)
            p.dense_features = Eigen::VectorXf::Zero(schema.encoded_dim());

        while (std::getline(in, line)) {
            const auto fields = split_line(line, delimiter);
            if (fields.size() != header.size())
                continue;
            std::int64_t orig = 0;
            if (!parse_int(fields[static_cast<std::size_t>(user_col)], orig))
                continue;
            auto it = lookup.find(orig);
            if (it == lookup.end())
                continue;
            std::vector<std::string> raw;
            for (long c : field_cols)
                raw.emplace_back(fields[static_cast<std::size_t>(c)]);
            data.users[static_cast<std::size_t>(it->second)].dense_features = encode_profile(raw, schema);
        }
    }

    LogDataset kcore_filter(const LogDataset& data, int k, bool iterate_to_fixpoint)
    {
        if (k < 1)
            throw DataError("k-core threshold must be at least 1");

        std::vector<bool> keep_user(data.users.size(), true);
        std::vector<bool> keep_item(static_cast<std::size_t>(data.items.size), true);
        while (true) {
            std::vector<std::size_t> item_count(keep_item.size(), 0);
            std::vector<std::size_t> user_count(keep_user.size(), 0);
            for (const auto& r : data.records)
                if (keep_user[static_cast<std::size_t>(r.user)] && keep_item[static_cast<std::size_t>(r.item)]) {
                    ++item_count[static_cast<std::size_t>(r.item)];
                    ++user_count[static_cast<std::size_t>(r.user)];
                }
            bool changed = false;
            for (std::size_t i = 0; i < keep_item.size(); ++i)
                if (keep_item[i] && item_count[i] < static_cast<std::size_t>(k)) {
                    keep_item[i] = false;
                    changed = true;
                }
            if (!iterate_to_fixpoint)
                break;
            // Fixpoint mode is the bipartite k-core: users below k are dropped as well.
            for (std::size_t u = 0; u < keep_user.size(); ++u)
                if (keep_user[u] && user_count[u] < static_cast<std::size_t>(k)) {
                    keep_user[u] = false;
                    changed = true;
                }
            if (!changed)
                break;
        }

        LogDataset out = restrict(data, keep_user, keep_item);
        if (out.records.empty())
            throw DataError("k-core filter with k=" + std::to_string(k) + " removes every record");
        return out;
    }

    LogDataset segment_sessions(LogDataset data)
    {
        std::stable_sort(data.records.begin(), data.records.end(), [](const auto& a, const auto& b) {
            return std::tie(a.user, a.date, a.timestamp) < std::tie(b.user, b.date, b.timestamp);
        });
        data.sessions = build_sessions(data);
        return data;
    }

    TrainTestSplit split_train_test(const LogDataset& data, double ratio)
    {
        if (!(ratio > 0.0 && ratio < 1.0))
            throw DataError("split ratio must lie in (0, 1)");

        TrainTestSplit split;
        for (LogDataset* part : {&split.train, &split.test}) {
            part->schema = data.schema;
            part->users = data.users;
            part->items = data.items;
            part->user_original_ids = data.user_original_ids;
            part->item_original_ids = data.item_original_ids;
        }
        for (const auto& [begin, end] : data.user_ranges()) {
            const std::size_t n = end - begin;
            std::size_t n_train = n;
            if (n >= 2) {
                n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
                while (n_train < n && data.records[begin + n_train].timestamp == data.records[begin + n_train - 1].timestamp)
                    ++n_train;
            }
            split.train.records.insert(split.train.records.end(), data.records.begin() + static_cast<long>(begin),
                data.records.begin() + static_cast<long>(begin + n_train));
            split.test.records.insert(split.test.records.end(), data.records.begin() + static_cast<long>(begin + n_train),
                data.records.begin() + static_cast<long>(end));
        }
        if (data.segmented()) {
            split.train.sessions = build_sessions(split.train);
            split.test.sessions = build_sessions(split.test);
        }
        return split;
    }

    std::string serialize_dataset(const LogDataset& data)
    {
        std::string out(kDataMagic, sizeof(kDataMagic));
        put<std::uint32_t>(out, kDataVersion);

        put<std::uint32_t>(out, static_cast<std::uint32_t>(data.schema.size()));
        for (int b = 0; b < data.schema.size(); ++b) {
            put_str(out, data.schema.names()[static_cast<std::size_t>(b)]);
            put_f64(out, data.schema.weight(b));
        }

        put<std::uint32_t>(out, static_cast<std::uint32_t>(data.users.size()));
        for (std::size_t u = 0; u < data.users.size(); ++u) {
            put<std::int64_t>(out, data.user_original_ids[u]);
            const auto& f = data.users[u].dense_features;
            put<std::uint32_t>(out, static_cast<std::uint32_t>(f.size()));
            for (Eigen::Index i = 0; i < f.size(); ++i)
                put_f32(out, f[i]);
        }

        put<std::int32_t>(out, data.items.size);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(data.items.features.cols()));
        for (Eigen::Index i = 0; i < data.items.size; ++i) {
            put<std::int64_t>(out, data.item_original_ids[static_cast<std::size_t>(i)]);
            for (Eigen::Index j = 0; j < data.items.features.cols(); ++j)
                put_f32(out, data.items.features(i, j));
        }

        put<std::uint64_t>(out, data.records.size());
        for (const auto& r : data.records) {
            put<std::int32_t>(out, r.user);
            put<std::int32_t>(out, r.item);
            put<std::int64_t>(out, r.timestamp);
            put<std::int32_t>(out, r.date);
            put<std::uint32_t>(out, r.behaviors);
        }

        put<std::uint32_t>(out, static_cast<std::uint32_t>(data.sessions.size()));
        for (const auto& list : data.sessions) {
            put<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
            for (const auto& s : list) {
                put<std::uint64_t>(out, s.begin);
                put<std::uint64_t>(out, s.end);
                put<std::int32_t>(out, s.date);
            }
        }
        return out;
    }

    LogDataset deserialize_dataset(const std::string& bytes)
    {
        if (bytes.size() < sizeof(kDataMagic) || bytes.compare(0, sizeof(kDataMagic), kDataMagic, sizeof(kDataMagic)) != 0)
            throw DataError("not a dataset container");
        ByteReader in(bytes);
        for (std::size_t i = 0; i < sizeof(kDataMagic); ++i)
            in.get<std::uint8_t>();
        if (in.get<std::uint32_t>() != kDataVersion)
            throw DataError("unsupported dataset container version");

        LogDataset data;
        std::vector<std::string> names;
        std::vector<double> weights;
        const auto b = in.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < b; ++i) {
            names.push_back(in.str());
            weights.push_back(in.f64());
        }
        data.schema = BehaviorSchema(std::move(names), std::move(weights));

        const auto users = in.get<std::uint32_t>();
        for (std::uint32_t u = 0; u < users; ++u) {
            data.user_original_ids.push_back(in.get<std::int64_t>());
            Eigen::VectorXf f(in.get<std::uint32_t>());
            for (Eigen::Index i = 0; i < f.size(); ++i)
                f[i] = in.f32();
            data.users.push_back({static_cast<UserId>(u), std::move(f)});
        }

        data.items.size = in.get<std::int32_t>();
        const auto dim = in.get<std::uint32_t>();
        data.items.features.resize(data.items.size, dim);
        for (Eigen::Index i = 0; i < data.items.size; ++i) {
            data.item_original_ids.push_back(in.get<std::int64_t>());
            for (Eigen::Index j = 0; j < dim; ++j)
                data.items.features(i, j) = in.f32();
        }

        const auto records = in.get<std::uint64_t>();
        data.records.resize(records);
        for (auto& r : data.records) {
            r.user = in.get<std::int32_t>();
            r.item = in.get<std::int32_t>();
            r.timestamp = in.get<std::int64_t>();
            r.date = in.get<std::int32_t>();
            r.behaviors = in.get<std::uint32_t>();
        }

        const auto lists = in.get<std::uint32_t>();
        data.sessions.resize(lists);
        for (auto& list : data.sessions) {
            list.resize(in.get<std::uint32_t>());
            for (auto& s : list) {
                s.begin = in.get<std::uint64_t>();
                s.end = in.get<std::uint64_t>();
                s.date = in.get<std::int32_t>();
            }
        }
        if (!in.done())
            throw DataError("trailing bytes in dataset container");
        return data;
    }

    void write_dataset(const std::filesystem::path& path, const LogDataset& data)
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot write " + path.string());
        const std::string bytes = serialize_dataset(data);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }

    LogDataset read_dataset(const std::filesystem::path& path)
    {
        return deserialize_dataset(read_file(path));
    }

} // namespace slatesim::data
