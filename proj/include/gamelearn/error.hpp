#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gamelearn {

/// Invalid argument to a library call (bad sizes, out-of-domain parameters).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Basis or player index outside its valid range.
class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Malformed input data. Carries a 1-based row/column location when known
/// (0 means "not applicable").
class DataError : public std::runtime_error {
public:
    DataError(const std::string& what, std::size_t row = 0, std::size_t col = 0)
        : std::runtime_error(format(what, row, col)), row_(row), col_(col) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }

private:
    static std::string format(const std::string& what, std::size_t row, std::size_t col) {
        if (row == 0 && col == 0) return what;
        std::string out = what + " (";
        if (row != 0) out += "row " + std::to_string(row);
        if (row != 0 && col != 0) out += ", ";
        if (col != 0) out += "column " + std::to_string(col);
        return out + ")";
    }

    std::size_t row_;
    std::size_t col_;
};

/// Solver failed to reach its KKT tolerance within the iteration cap.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual, std::size_t iterations)
        : std::runtime_error(what + " (kkt residual " + std::to_string(residual) + " after "
                             + std::to_string(iterations) + " sweeps)"),
          residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    double residual_;
    std::size_t iterations_;
};

/// A diagnostic quantity is undefined for the given inputs (empty support,
/// singular block, black-box data).
class NotApplicable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gamelearn
