#pragma once

#include <stdexcept>
#include <string>

namespace opl {

// Thrown when a fit requires observations for every arm and one has none.
class MissingArmError : public std::runtime_error {
public:
    MissingArmError(int arm, const std::string& where)
        : std::runtime_error("arm " + std::to_string(arm) + " has no observations in " + where),
          arm_(arm) {}
    int arm() const noexcept { return arm_; }

private:
    int arm_;
};

// Thrown when a cross-fitting training complement is missing an arm.
class FoldCoverageError : public std::runtime_error {
public:
    FoldCoverageError(int arm, int fold)
        : std::runtime_error("arm " + std::to_string(arm) + " absent from the training complement of fold " +
                             std::to_string(fold) + "; use a smaller number of folds"),
          arm_(arm), fold_(fold) {}
    int arm() const noexcept { return arm_; }
    int fold() const noexcept { return fold_; }

private:
    int arm_;
    int fold_;
};

// Thrown when an iterative fit hits its iteration cap before the gradient tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(double gradient_norm, long iterations)
        : std::runtime_error("fit did not converge after " + std::to_string(iterations) +
                             " iterations (gradient max-norm " + std::to_string(gradient_norm) + ")"),
          gradient_norm_(gradient_norm), iterations_(iterations) {}
    double gradient_norm() const noexcept { return gradient_norm_; }
    long iterations() const noexcept { return iterations_; }

private:
    double gradient_norm_;
    long iterations_;
};

// Thrown on malformed CSV input; carries the offending location.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, long row, std::string column)
        : std::runtime_error(std::move(message) + " (row " + std::to_string(row) + ", column " + column + ")"),
          row_(row), column_(std::move(column)) {}
    long row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    long row_;
    std::string column_;
};

}  // namespace opl
