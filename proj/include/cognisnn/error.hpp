#pragma once

#include <stdexcept>
#include <string>

namespace cognisnn {

// Error categories; values double as CLI exit codes where applicable
// (0 success, 2 config, 3 data, 4 numeric).
enum class ErrorKind {
    config = 2,
    data = 3,
    numeric = 4,
    invalid_argument = 5,
    dimension = 6,
    capacity = 7,
    internal = 8,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

    // exit code the CLI should report for this error class
    int exit_code() const {
        switch (kind_) {
        case ErrorKind::config:
        case ErrorKind::invalid_argument:
        case ErrorKind::capacity:
            return 2;
        case ErrorKind::data:
            return 3;
        default:
            return 4;
        }
    }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(std::string m) : Error(ErrorKind::config, std::move(m)) {}
};
struct DataError : Error {
    explicit DataError(std::string m) : Error(ErrorKind::data, std::move(m)) {}
};
struct NumericError : Error {
    explicit NumericError(std::string m) : Error(ErrorKind::numeric, std::move(m)) {}
};
struct InvalidArgument : Error {
    explicit InvalidArgument(std::string m) : Error(ErrorKind::invalid_argument, std::move(m)) {}
};
struct DimensionError : Error {
    explicit DimensionError(std::string m) : Error(ErrorKind::dimension, std::move(m)) {}
};
struct CapacityError : Error {
    explicit CapacityError(std::string m) : Error(ErrorKind::capacity, std::move(m)) {}
};
struct InternalError : Error {
    explicit InternalError(std::string m) : Error(ErrorKind::internal, std::move(m)) {}
};

}  // namespace cognisnn
