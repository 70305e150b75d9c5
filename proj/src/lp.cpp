#include "balmarket/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace balmarket::lp {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr int kMaxIterations = 100000;

void check_well_formed(const LinearProgram& p) {
    const auto n = p.objective.size();
    if (p.lower.size() != n || p.upper.size() != n)
        throw std::invalid_argument("linear program: bound vectors do not match the objective length");
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(p.objective[j]))
            throw std::invalid_argument("linear program: non-finite cost in column " + std::to_string(j));
        if (std::isnan(p.lower[j]) || std::isnan(p.upper[j]) || p.lower[j] > p.upper[j] ||
            p.lower[j] == kInfinity || p.upper[j] == -kInfinity)
            throw std::invalid_argument("linear program: invalid bounds on column " + std::to_string(j));
    }
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        if (!std::isfinite(p.rows[i].rhs))
            throw std::invalid_argument("linear program: non-finite rhs in row " + std::to_string(i));
        for (const auto& t : p.rows[i].terms) {
            if (t.column < 0 || static_cast<std::size_t>(t.column) >= n)
                throw std::invalid_argument("linear program: row " + std::to_string(i) + " references column " +
                                            std::to_string(t.column));
            if (!std::isfinite(t.coefficient))
                throw std::invalid_argument("linear program: non-finite coefficient in row " + std::to_string(i));
        }
    }
}

// Dense tableau B^{-1}[A | S] where S holds the signed artificial columns.
class Simplex {
public:
    explicit Simplex(const LinearProgram& p)
        : m_(p.num_rows()), n_(p.num_variables()), cols_(n_ + m_), program_(p) {
        dense_.assign(static_cast<std::size_t>(m_) * n_, 0.0);
        for (int i = 0; i < m_; ++i)
            for (const auto& t : p.rows[i].terms) dense_[idx(i, t.column, n_)] += t.coefficient;

        lower_ = p.lower;
        upper_ = p.upper;
        x_.assign(cols_, 0.0);
        for (int j = 0; j < n_; ++j) x_[j] = start_value(j);

        sign_.assign(m_, 1.0);
        basis_.resize(m_);
        tableau_.assign(static_cast<std::size_t>(m_) * cols_, 0.0);
        for (int i = 0; i < m_; ++i) {
            double r = p.rows[i].rhs;
            for (int j = 0; j < n_; ++j) r -= dense_[idx(i, j, n_)] * x_[j];
            sign_[i] = r >= 0.0 ? 1.0 : -1.0;
            for (int j = 0; j < n_; ++j) tableau_[idx(i, j, cols_)] = sign_[i] * dense_[idx(i, j, n_)];
            tableau_[idx(i, n_ + i, cols_)] = 1.0;
            basis_[i] = n_ + i;
            x_[n_ + i] = std::abs(r);
            lower_.push_back(0.0);
            upper_.push_back(kInfinity);
        }
        is_basic_.assign(cols_, false);
        for (int b : basis_) is_basic_[b] = true;
    }

    LpSolution run() {
        LpSolution out;

        std::vector<double> phase1(cols_, 0.0);
        for (int i = 0; i < m_; ++i) phase1[n_ + i] = 1.0;
        if (iterate(phase1) != Status::Optimal) throw std::logic_error("simplex: phase 1 cannot be unbounded");

        double infeasibility = 0.0;
        double scale = 1.0;
        for (int i = 0; i < m_; ++i) {
            infeasibility += x_[n_ + i];
            scale = std::max(scale, std::abs(program_.rows[i].rhs));
        }
        out.iterations = iterations_;
        if (infeasibility > kFeasibilityTol * scale) {
            out.status = Status::Infeasible;
            return out;
        }

        drive_out_artificials();
        for (int i = 0; i < m_; ++i) {
            lower_[n_ + i] = 0.0;
            upper_[n_ + i] = 0.0;
            if (!is_basic_[n_ + i]) x_[n_ + i] = 0.0;
        }

        std::vector<double> phase2(cols_, 0.0);
        std::copy(program_.objective.begin(), program_.objective.end(), phase2.begin());
        const Status status = iterate(phase2);
        out.iterations = iterations_;
        if (status == Status::Unbounded) {
            out.status = Status::Unbounded;
            return out;
        }

        refactor(phase2, out);
        out.status = Status::Optimal;
        return out;
    }

private:
    static std::size_t idx(int row, int col, int width) {
        return static_cast<std::size_t>(row) * width + col;
    }

    [[nodiscard]] double start_value(int j) const {
        if (std::isfinite(lower_[j])) return lower_[j];
        if (std::isfinite(upper_[j])) return upper_[j];
        return 0.0;
    }

    double& at(int row, int col) { return tableau_[idx(row, col, cols_)]; }

    Status iterate(const std::vector<double>& cost) {
        while (true) {
            if (++iterations_ > kMaxIterations) throw std::runtime_error("simplex: iteration limit exceeded");

            // Bland: lowest-index improving column
            int entering = -1;
            double direction = 0.0;
            for (int j = 0; j < cols_ && entering < 0; ++j) {
                if (is_basic_[j] || lower_[j] == upper_[j]) continue;
                double d = cost[j];
                for (int i = 0; i < m_; ++i) d -= cost[basis_[i]] * at(i, j);
                if (d < -kOptimalityTol && x_[j] < upper_[j]) {
                    entering = j;
                    direction = 1.0;
                } else if (d > kOptimalityTol && x_[j] > lower_[j]) {
                    entering = j;
                    direction = -1.0;
                }
            }
            if (entering < 0) return Status::Optimal;

            double step = upper_[entering] - lower_[entering];  // bound flip distance
            int leaving_row = -1;
            for (int i = 0; i < m_; ++i) {
                const double rate = -at(i, entering) * direction;
                if (std::abs(rate) <= kPivotTol) continue;
                const int b = basis_[i];
                double limit;
                if (rate < 0.0) {
                    if (!std::isfinite(lower_[b])) continue;
                    limit = std::max(0.0, (x_[b] - lower_[b]) / -rate);
                } else {
                    if (!std::isfinite(upper_[b])) continue;
                    limit = std::max(0.0, (upper_[b] - x_[b]) / rate);
                }
                if (limit < step || (limit == step && leaving_row >= 0 && b < basis_[leaving_row])) {
                    step = limit;
                    leaving_row = i;
                }
            }
            if (!std::isfinite(step)) return Status::Unbounded;

            x_[entering] += direction * step;
            for (int i = 0; i < m_; ++i) x_[basis_[i]] -= at(i, entering) * direction * step;

            if (leaving_row < 0) {
                x_[entering] = direction > 0.0 ? upper_[entering] : lower_[entering];
                continue;
            }
            const int leaving = basis_[leaving_row];
            const double rate = -at(leaving_row, entering) * direction;
            x_[leaving] = rate < 0.0 ? lower_[leaving] : upper_[leaving];
            pivot(leaving_row, entering);
        }
    }

    void pivot(int row, int col) {
        const double p = at(row, col);
        for (int j = 0; j < cols_; ++j) at(row, j) /= p;
        for (int i = 0; i < m_; ++i) {
            if (i == row) continue;
            const double f = at(i, col);
            if (f == 0.0) continue;
            for (int j = 0; j < cols_; ++j) at(i, j) -= f * at(row, j);
        }
        is_basic_[basis_[row]] = false;
        basis_[row] = col;
        is_basic_[col] = true;
    }

    // Artificials still basic at zero after phase 1 are swapped for structural
    // columns; a row with no usable column is redundant and keeps its artificial
    // fixed at zero.
    void drive_out_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < n_) continue;
            for (int j = 0; j < n_; ++j) {
                if (!is_basic_[j] && std::abs(at(i, j)) > 1e-9) {
                    pivot(i, j);
                    break;
                }
            }
        }
    }

    // Recomputes basic values and duals from a fresh factorization of the final
    // basis so that accumulated tableau round-off does not reach the caller.
    void refactor(const std::vector<double>& cost, LpSolution& out) {
        Eigen::VectorXd rhs(m_);
        Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(m_, m_);
        for (int i = 0; i < m_; ++i) {
            double r = program_.rows[i].rhs;
            for (int j = 0; j < cols_; ++j) {
                if (is_basic_[j]) continue;
                r -= column_entry(i, j) * x_[j];
            }
            rhs(i) = r;
            for (int k = 0; k < m_; ++k) basis_matrix(i, k) = column_entry(i, basis_[k]);
        }

        if (m_ > 0) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);
            if (lu.isInvertible()) {
                const Eigen::VectorXd xb = lu.solve(rhs);
                for (int k = 0; k < m_; ++k) {
                    const int b = basis_[k];
                    double v = xb(k);
                    if (v < lower_[b] && v > lower_[b] - kFeasibilityTol) v = lower_[b];
                    if (v > upper_[b] && v < upper_[b] + kFeasibilityTol) v = upper_[b];
                    x_[b] = v;
                }
                Eigen::VectorXd cb(m_);
                for (int k = 0; k < m_; ++k) cb(k) = cost[basis_[k]];
                const Eigen::VectorXd y = lu.transpose().solve(cb);
                out.duals.assign(y.data(), y.data() + m_);
            } else {
                out.duals = tableau_duals(cost);
            }
        }

        out.values.assign(x_.begin(), x_.begin() + n_);
        out.objective_value = 0.0;
        for (int j = 0; j < n_; ++j) out.objective_value += program_.objective[j] * out.values[j];
    }

    [[nodiscard]] double column_entry(int row, int col) const {
        if (col < n_) return dense_[idx(row, col, n_)];
        return col - n_ == row ? sign_[row] : 0.0;
    }

    // y = c_B' B^{-1}; the artificial block of the tableau holds B^{-1} S.
    std::vector<double> tableau_duals(const std::vector<double>& cost) const {
        std::vector<double> y(m_, 0.0);
        for (int r = 0; r < m_; ++r) {
            double v = 0.0;
            for (int i = 0; i < m_; ++i) v += cost[basis_[i]] * tableau_[idx(i, n_ + r, cols_)];
            y[r] = v * sign_[r];
        }
        return y;
    }

    int m_;
    int n_;
    int cols_;
    const LinearProgram& program_;
    std::vector<double> dense_;
    std::vector<double> tableau_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<double> x_;
    std::vector<double> sign_;
    std::vector<int> basis_;
    std::vector<bool> is_basic_;
    int iterations_ = 0;
};

}  // namespace

int LinearProgram::add_variable(double cost, double lo, double hi) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    return num_variables() - 1;
}

int LinearProgram::add_row(std::vector<Term> terms, double rhs) {
    rows.push_back(EqualityRow{std::move(terms), rhs});
    return num_rows() - 1;
}

std::string to_string(Status status) {
    switch (status) {
        case Status::Optimal: return "optimal";
        case Status::Infeasible: return "infeasible";
        case Status::Unbounded: return "unbounded";
    }
    return "unknown";
}

LpSolution solve(const LinearProgram& program) {
    check_well_formed(program);
    return Simplex(program).run();
}

double max_row_residual(const LinearProgram& program, const std::vector<double>& x) {
    double worst = 0.0;
    for (const auto& row : program.rows) {
        double r = -row.rhs;
        for (const auto& t : row.terms) r += t.coefficient * x.at(t.column);
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

double lagrangian_dual_value(const LinearProgram& program, const std::vector<double>& y) {
    std::vector<double> reduced = program.objective;
    double value = 0.0;
    for (int i = 0; i < program.num_rows(); ++i) {
        value += program.rows[i].rhs * y.at(i);
        for (const auto& t : program.rows[i].terms) reduced[t.column] -= t.coefficient * y[i];
    }
    for (int j = 0; j < program.num_variables(); ++j) {
        const double d = reduced[j];
        if (std::abs(d) <= kOptimalityTol) continue;
        const double bound = d > 0.0 ? program.lower[j] : program.upper[j];
        if (!std::isfinite(bound)) return -kInfinity;
        value += d * bound;
    }
    return value;
}

}  // namespace balmarket::lp
