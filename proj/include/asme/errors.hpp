#pragma once

#include <stdexcept>
#include <string>

namespace asme {

/// Invalid configuration value; `field` names the offending entry.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Input data cannot support the requested computation (constant series,
/// zero variance, too few distinct observations).
class DegenerateInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Regression design matrix is rank deficient.
class SingularDesign : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Series too short for the requested embedding or window.
class SeriesTooShort : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// No neighbor satisfies the temporal-separation constraint.
class NoValidNeighbors : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A two-class operation received inputs with a single class.
class OneClassOnly : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Empty input where at least one element is required.
class EmptyInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A fit produced a non-finite quantity (e.g. diverging loss).
class NonFinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem read/write failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace asme
