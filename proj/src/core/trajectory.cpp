#include <slatesim/core/error.hpp>
#include <slatesim/core/trajectory.hpp>

#include <json.hpp>

#include <istream>
#include <ostream>
#include <string>

namespace slatesim {

    bool TrajectoryStep::operator==(const TrajectoryStep& other) const
    {
        return episode == other.episode && session_index == other.session_index && step == other.step && user == other.user
            && slate == other.slate && feedback.rows() == other.feedback.rows() && feedback.cols() == other.feedback.cols()
            && feedback == other.feedback && raw_reward == other.raw_reward && reward == other.reward && temper == other.temper
            && leave == other.leave && return_day == other.return_day;
    }

    void write_trajectory_jsonl(std::ostream& out, const Trajectory& steps)
    {
        for (const auto& s : steps) {
            nlohmann::ordered_json row;
            row["episode"] = s.episode;
            row["session_index"] = s.session_index;
            row["step"] = s.step;
            row["user"] = s.user;
            row["slate"] = s.slate;
            std::vector<std::string> bits;
            for (Eigen::Index b = 0; b < s.feedback.rows(); ++b) {
                std::string line(static_cast<std::size_t>(s.feedback.cols()), '0');
                for (Eigen::Index k = 0; k < s.feedback.cols(); ++k)
                    if (s.feedback(b, k))
                        line[static_cast<std::size_t>(k)] = '1';
                bits.push_back(std::move(line));
            }
            row["feedback"] = bits;
            row["r_raw"] = s.raw_reward;
            row["r_t"] = s.reward;
            row["temper"] = s.temper;
            row["leave"] = s.leave;
            row["return_day"] = s.return_day;
            out << row.dump() << '\n';
        }
    }

    Trajectory read_trajectory_jsonl(std::istream& in)
    {
        Trajectory steps;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty())
                continue;
            try {
                const auto row = nlohmann::json::parse(line);
                TrajectoryStep s;
                s.episode = row.at("episode").get<std::int64_t>();
                s.session_index = row.at("session_index").get<int>();
                s.step = row.at("step").get<int>();
                s.user = row.at("user").get<UserId>();
                s.slate = row.at("slate").get<std::vector<ItemId>>();
                const auto bits = row.at("feedback").get<std::vector<std::string>>();
                const auto cols = bits.empty() ? Eigen::Index(0) : static_cast<Eigen::Index>(bits.front().size());
                s.feedback = BitMatrix::Zero(static_cast<Eigen::Index>(bits.size()), cols);
                for (std::size_t b = 0; b < bits.size(); ++b) {
                    if (static_cast<Eigen::Index>(bits[b].size()) != cols)
                        throw DataError("ragged feedback rows");
                    for (Eigen::Index k = 0; k < cols; ++k)
                        s.feedback(static_cast<Eigen::Index>(b), k) = bits[b][static_cast<std::size_t>(k)] == '1';
                }
                s.raw_reward = row.at("r_raw").get<double>();
                s.reward = row.at("r_t").get<double>();
                s.temper = row.at("temper").get<double>();
                s.leave = row.at("leave").get<bool>();
                s.return_day = row.at("return_day").get<int>();
                steps.push_back(std::move(s));
            } catch (const nlohmann::json::exception& e) {
                throw DataError("trajectory line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        return steps;
    }

} // namespace slatesim
