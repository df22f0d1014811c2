#include "corestable/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace corestable::lp {

namespace {

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * (cols + 1), 0.0) {}

    double& at(std::size_t r, std::size_t c) { return a_[r * (cols_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return a_[r * (cols_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, cols_); }
    double rhs(std::size_t r) const { return at(r, cols_); }

    void pivot(std::size_t pr, std::size_t pc, std::vector<double>& reduced, double& objective) {
        const double inv = 1.0 / at(pr, pc);
        double* prow = &a_[pr * (cols_ + 1)];
        for (std::size_t c = 0; c <= cols_; ++c) prow[c] *= inv;
        prow[pc] = 1.0;
        for (std::size_t r = 0; r < rows_; ++r) {
            if (r == pr) continue;
            double* row = &a_[r * (cols_ + 1)];
            const double f = row[pc];
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= cols_; ++c) row[c] -= f * prow[c];
            row[pc] = 0.0;
        }
        const double f = reduced[pc];
        if (f != 0.0) {
            for (std::size_t c = 0; c < cols_; ++c) reduced[c] -= f * prow[c];
            objective -= f * prow[cols_];
            reduced[pc] = 0.0;
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> a_;
};

// Runs simplex iterations minimizing the objective encoded by `reduced`
// (reduced costs) and `objective` (negated current value). Columns with
// allowed[c] == false never enter.
Status iterate(Tableau& t, std::vector<std::size_t>& basis, std::vector<double>& reduced,
               double& objective, const std::vector<char>& allowed, double eps,
               std::size_t max_pivots, std::size_t& pivots) {
    std::size_t degenerate_run = 0;
    for (;;) {
        if (pivots >= max_pivots) return Status::iteration_limit;
        const bool bland = degenerate_run > 50;
        std::size_t enter = t.cols();
        double best = -eps;
        for (std::size_t c = 0; c < t.cols(); ++c) {
            if (!allowed[c] || reduced[c] >= -eps) continue;
            if (bland) {
                enter = c;
                break;
            }
            if (reduced[c] < best) {
                best = reduced[c];
                enter = c;
            }
        }
        if (enter == t.cols()) return Status::optimal;
        std::size_t leave = t.rows();
        double ratio = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const double a = t.at(r, enter);
            if (a <= eps) continue;
            const double q = t.rhs(r) / a;
            if (q < ratio - 1e-12 || (q <= ratio + 1e-12 && leave < t.rows() && basis[r] < basis[leave])) {
                ratio = q;
                leave = r;
            }
        }
        if (leave == t.rows()) return Status::unbounded;
        degenerate_run = ratio <= eps ? degenerate_run + 1 : 0;
        t.pivot(leave, enter, reduced, objective);
        basis[leave] = enter;
        ++pivots;
    }
}

}  // namespace

Solution solve(const Problem& problem, double eps, std::size_t max_pivots) {
    const std::size_t m = problem.rows.size();
    const std::size_t n = problem.num_vars;
    // Columns: structural, one slack/surplus per inequality, one artificial per row.
    std::vector<std::size_t> slack_col(m, std::numeric_limits<std::size_t>::max());
    std::size_t cols = n;
    for (std::size_t r = 0; r < m; ++r) {
        if (problem.rows[r].sense != Sense::equal) slack_col[r] = cols++;
    }
    const std::size_t art0 = cols;
    cols += m;

    Tableau t(m, cols);
    std::vector<double> sign(m, 1.0);
    for (std::size_t r = 0; r < m; ++r) {
        const auto& row = problem.rows[r];
        sign[r] = row.rhs < 0.0 ? -1.0 : 1.0;
        for (const auto& [c, v] : row.terms) t.at(r, c) += sign[r] * v;
        if (row.sense == Sense::less_equal) t.at(r, slack_col[r]) = sign[r];
        if (row.sense == Sense::greater_equal) t.at(r, slack_col[r]) = -sign[r];
        t.at(r, art0 + r) = 1.0;
        t.rhs(r) = sign[r] * row.rhs;
    }
    std::vector<std::size_t> basis(m);
    for (std::size_t r = 0; r < m; ++r) basis[r] = art0 + r;

    Solution sol;
    // Phase one: minimize the sum of artificials.
    std::vector<double> reduced(cols, 0.0);
    double objective = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < art0; ++c) reduced[c] -= t.at(r, c);
        objective -= t.rhs(r);
    }
    std::vector<char> allowed(cols, 1);
    for (std::size_t c = art0; c < cols; ++c) allowed[c] = 0;
    auto status = iterate(t, basis, reduced, objective, allowed, eps, max_pivots, sol.pivots);
    sol.infeasibility = -objective;
    if (status == Status::iteration_limit) {
        sol.status = status;
        return sol;
    }
    if (sol.infeasibility > 1e-9 * std::max<double>(1.0, static_cast<double>(m))) {
        sol.status = Status::infeasible;
        // Phase-one multipliers serve as the certificate.
        sol.duals.resize(m);
        for (std::size_t r = 0; r < m; ++r) sol.duals[r] = sign[r] * (1.0 - reduced[art0 + r]);
        return sol;
    }
    // Drive remaining artificials out of the basis where possible.
    for (std::size_t r = 0; r < m; ++r) {
        if (basis[r] < art0) continue;
        for (std::size_t c = 0; c < art0; ++c) {
            if (std::abs(t.at(r, c)) > 1e-9) {
                double dummy = 0.0;
                std::vector<double> none(cols, 0.0);
                t.pivot(r, c, none, dummy);
                basis[r] = c;
                break;
            }
        }
    }
    // Phase two.
    std::fill(reduced.begin(), reduced.end(), 0.0);
    objective = 0.0;
    for (std::size_t c = 0; c < n; ++c) reduced[c] = problem.cost[c];
    for (std::size_t r = 0; r < m; ++r) {
        const auto b = basis[r];
        const double cb = b < n ? problem.cost[b] : 0.0;
        if (cb == 0.0) continue;
        for (std::size_t c = 0; c < cols; ++c) reduced[c] -= cb * t.at(r, c);
        objective -= cb * t.rhs(r);
    }
    status = iterate(t, basis, reduced, objective, allowed, eps, max_pivots, sol.pivots);
    sol.status = status;
    if (status != Status::optimal) return sol;
    sol.values.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        if (basis[r] < n) sol.values[basis[r]] = std::max(0.0, t.rhs(r));
    }
    sol.objective = 0.0;
    for (std::size_t c = 0; c < n; ++c) sol.objective += problem.cost[c] * sol.values[c];
    sol.duals.resize(m);
    for (std::size_t r = 0; r < m; ++r) sol.duals[r] = -sign[r] * reduced[art0 + r];
    return sol;
}

}  // namespace corestable::lp
