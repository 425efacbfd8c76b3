#pragma once

#include <stdexcept>
#include <string>

namespace ptring {

// Invalid inputs: bad parameter ranges, malformed files, unsorted grids.
class validation_error : public std::invalid_argument {
public:
    explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failures: singular systems, iteration caps, undefined results.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

class singular_system_error : public numeric_error {
public:
    explicit singular_system_error(const std::string& what) : numeric_error(what) {}
};

class convergence_error : public numeric_error {
public:
    explicit convergence_error(const std::string& what) : numeric_error(what) {}
};

class no_peak_error : public numeric_error {
public:
    explicit no_peak_error(const std::string& what) : numeric_error(what) {}
};

class degenerate_fit_error : public numeric_error {
public:
    explicit degenerate_fit_error(const std::string& what) : numeric_error(what) {}
};

class insufficient_statistics_error : public numeric_error {
public:
    explicit insufficient_statistics_error(const std::string& what) : numeric_error(what) {}
};

// tau_1e^2 < j1^2 + j2^2: jitter-dominated, lifetime unresolvable.
class jitter_domain_error : public numeric_error {
public:
    explicit jitter_domain_error(const std::string& what) : numeric_error(what) {}
};

class infinite_lifetime_error : public numeric_error {
public:
    explicit infinite_lifetime_error(const std::string& what) : numeric_error(what) {}
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw validation_error(what);
}

}  // namespace ptring
