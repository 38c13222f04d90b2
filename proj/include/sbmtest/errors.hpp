#pragma once

#include <stdexcept>
#include <string>

namespace sbmtest {

// Invalid argument values, violated preconditions, malformed configs.
class parameter_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A request that exceeds a configured size/budget limit. The message names
// the limit and the cheaper alternative when one exists.
class capacity_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Structurally invalid input data (self-loops, out-of-range node ids, ...).
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unparseable input text; carries the 1-based line number.
class parse_error : public data_error {
public:
    parse_error(const std::string& source, long line, const std::string& what)
        : data_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

} // namespace sbmtest
