#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ptring/errors.hpp"

namespace ptring {

// Frequency grid with power transmission or intracavity DOS values.
// Frequencies are plain s^-1 (no 2*pi factors anywhere in this project).
struct Spectrum {
    enum class Kind { transmission, dos };

    std::vector<double> freqs;
    std::vector<double> values;
    Kind kind = Kind::transmission;

    void validate() const {
        require(freqs.size() == values.size(), "spectrum: freqs/values length mismatch");
        require(freqs.size() >= 2, "spectrum: need at least 2 points");
        for (std::size_t i = 1; i < freqs.size(); ++i)
            require(freqs[i] > freqs[i - 1], "spectrum: frequencies must be strictly increasing");
        for (double v : values) {
            require(v >= 0.0, "spectrum: values must be non-negative");
            if (kind == Kind::transmission)
                require(v <= 1.0 + 1e-6, "spectrum: transmission above unity");
        }
    }
};

inline const char* spectrum_value_column(Spectrum::Kind kind) {
    return kind == Spectrum::Kind::transmission ? "transmission" : "dos";
}

inline void write_spectrum_csv(const Spectrum& spec, std::ostream& os) {
    os << "freq_hz," << spectrum_value_column(spec.kind) << "\n";
    char buf[64];
    for (std::size_t i = 0; i < spec.freqs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.15g,%.15g\n", spec.freqs[i], spec.values[i]);
        os << buf;
    }
}

inline Spectrum read_spectrum_csv(std::istream& is) {
    Spectrum spec;
    std::string line;
    if (!std::getline(is, line)) throw validation_error("spectrum csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "freq_hz,transmission") {
        spec.kind = Spectrum::Kind::transmission;
    } else if (line == "freq_hz,dos") {
        spec.kind = Spectrum::Kind::dos;
    } else {
        throw validation_error("spectrum csv: bad header '" + line + "'");
    }
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double f = 0.0, v = 0.0;
        char extra = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf%c", &f, &v, &extra) < 2)
            throw validation_error("spectrum csv: bad row at line " + std::to_string(lineno));
        spec.freqs.push_back(f);
        spec.values.push_back(v);
    }
    spec.validate();
    return spec;
}

inline Spectrum read_spectrum_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw validation_error("spectrum csv: cannot open " + path);
    return read_spectrum_csv(is);
}

}  // namespace ptring
