// errors.hpp
//
// Exception hierarchy shared by every module. The category of an error maps
// onto the CLI exit code (usage = 1, data = 2, numerical = 3).

#ifndef VLCUAV_ERRORS_HPP
#define VLCUAV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace vlcuav {

enum class ErrorCategory { Usage, Data, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Argument outside the mathematical domain of a closed-form expression.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorCategory::Usage, what) {}
};

/// Configuration or parameter set that violates a documented invariant.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::Usage, what) {}
};

/// Tensor/matrix dimensions that do not line up.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

/// Bad input data: out-of-range coordinates, malformed files, missing files.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

/// A user outside every UAV's receiver field of view (zero LoS gain).
class InfeasibleGeometry : public Error {
public:
    explicit InfeasibleGeometry(const std::string& what) : Error(ErrorCategory::Numerical, what) {}
};

/// Non-finite iterate, diverging training loss, or an infeasible problem.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorCategory::Numerical, what) {}
};

/// Process exit code for an error category.
int exit_code(ErrorCategory category) noexcept;

} // namespace vlcuav

#endif // VLCUAV_ERRORS_HPP
