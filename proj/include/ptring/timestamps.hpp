#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ptring/errors.hpp"

namespace ptring {

// Detection-event record for one channel. Times are integer picoseconds
// (the declared 1 ps resolution), sorted ascending.
struct TimestampStream {
    std::string channel;
    std::vector<std::int64_t> times_ps;

    void validate() const {
        for (std::size_t i = 0; i < times_ps.size(); ++i) {
            require(times_ps[i] >= 0, "timestamp stream: negative time");
            if (i > 0)
                require(times_ps[i] >= times_ps[i - 1], "timestamp stream: not sorted");
        }
    }
};

inline void write_timestamps_csv(const TimestampStream& s, std::ostream& os) {
    os << "channel,time_ps\n";
    for (std::int64_t t : s.times_ps) os << s.channel << ',' << t << '\n';
}

// Reads one or more channels; streams are returned in first-appearance order.
inline std::vector<TimestampStream> read_timestamps_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw validation_error("timestamp csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "channel,time_ps")
        throw validation_error("timestamp csv: bad header '" + line + "'");
    std::vector<TimestampStream> streams;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos || comma == 0)
            throw validation_error("timestamp csv: bad row at line " + std::to_string(lineno));
        std::string chan = line.substr(0, comma);
        std::int64_t t = 0;
        try {
            std::size_t used = 0;
            t = std::stoll(line.substr(comma + 1), &used);
            if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw validation_error("timestamp csv: bad time at line " + std::to_string(lineno));
        }
        auto it = std::find_if(streams.begin(), streams.end(),
                               [&](const TimestampStream& s) { return s.channel == chan; });
        if (it == streams.end()) {
            streams.push_back(TimestampStream{chan, {}});
            it = streams.end() - 1;
        }
        it->times_ps.push_back(t);
    }
    for (const auto& s : streams) s.validate();
    return streams;
}

inline std::vector<TimestampStream> read_timestamps_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw validation_error("timestamp csv: cannot open " + path);
    return read_timestamps_csv(is);
}

}  // namespace ptring
