#pragma once

// Bounded-variable primal simplex for small dense linear programs
//
//     min c'x   s.t.  A x = b,  lower <= x <= upper
//
// Bounds may be infinite on either side. Pivoting follows Bland's rule for both
// the entering and the leaving variable, so the path (and the returned vertex)
// is a pure function of the input.

#include <limits>
#include <string>
#include <vector>

namespace balmarket::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline constexpr double kFeasibilityTol = 1e-9;
inline constexpr double kOptimalityTol = 1e-9;

struct Term {
    int column = 0;
    double coefficient = 0.0;
};

struct EqualityRow {
    std::vector<Term> terms;
    double rhs = 0.0;
};

struct LinearProgram {
    std::vector<double> objective;
    std::vector<EqualityRow> rows;
    std::vector<double> lower;
    std::vector<double> upper;

    /// Appends a variable and returns its column index.
    int add_variable(double cost, double lo, double hi);
    /// Appends an equality row and returns its index.
    int add_row(std::vector<Term> terms, double rhs);

    [[nodiscard]] int num_variables() const { return static_cast<int>(objective.size()); }
    [[nodiscard]] int num_rows() const { return static_cast<int>(rows.size()); }
};

enum class Status { Optimal, Infeasible, Unbounded };

std::string to_string(Status status);

struct LpSolution {
    Status status = Status::Infeasible;
    std::vector<double> values;
    double objective_value = 0.0;
    /// Sensitivity of the optimal objective to each row's right-hand side.
    std::vector<double> duals;
    int iterations = 0;
};

/// Throws std::invalid_argument for malformed programs (dimension mismatch,
/// lower > upper, column index out of range, non-finite coefficients).
LpSolution solve(const LinearProgram& program);

/// Largest |A x - b| over the rows.
double max_row_residual(const LinearProgram& program, const std::vector<double>& x);

/// Lagrangian dual value b'y + sum_j min_{l_j <= x_j <= u_j} (c - A'y)_j x_j.
/// A lower bound on the primal optimum for any y; -inf when the inner minimum
/// is unbounded for some column.
double lagrangian_dual_value(const LinearProgram& program, const std::vector<double>& y);

}  // namespace balmarket::lp
