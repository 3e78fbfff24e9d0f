// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace evc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on a numeric argument was violated (negative power, bad range, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Internal state is inconsistent, e.g. an active SCHEDULED user without a profile.
class InvariantError : public Error {
public:
    using Error::Error;
};

/// Configuration or data rejected on load. Carries the offending location when known.
class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& what, std::string source = {}, long line = -1)
        : Error(format(what, source, line)), source_(std::move(source)), line_(line) {}

    const std::string& source() const noexcept { return source_; }
    long line() const noexcept { return line_; }

private:
    static std::string format(const std::string& what, const std::string& source, long line) {
        if (source.empty() && line < 0) return what;
        std::string out = source.empty() ? std::string("input") : source;
        if (line >= 0) out += ":" + std::to_string(line);
        return out + ": " + what;
    }

    std::string source_;
    long line_;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace evc
