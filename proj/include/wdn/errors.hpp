#ifndef WDN_ERRORS_HPP
#define WDN_ERRORS_HPP

#include <stdexcept>
#include <string>

/**
 * @file errors.hpp
 * @brief Exception types shared by all modules.
 *
 * The CLI maps each family onto an exit code: usage errors to 2,
 * data errors to 3 and numerical failures to 4.
 */

namespace wdn {

/// Malformed or inconsistent input data (files, tables, configs).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-convergence, non-finite values or singular systems.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid invocation of the command-line tool.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}

#endif
