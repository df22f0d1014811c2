#pragma once

#include <cstddef>
#include <vector>

namespace corestable::lp {

enum class Sense { less_equal, equal, greater_equal };

struct Row {
    std::vector<std::pair<std::size_t, double>> terms;
    Sense sense = Sense::equal;
    double rhs = 0.0;
};

/// min c·y subject to rows, y ≥ 0.
struct Problem {
    std::size_t num_vars = 0;
    std::vector<double> cost;
    std::vector<Row> rows;

    std::size_t add_var(double c = 0.0) {
        cost.push_back(c);
        return num_vars++;
    }
    void add_row(Row r) { rows.push_back(std::move(r)); }
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Solution {
    Status status = Status::iteration_limit;
    double objective = 0.0;
    std::vector<double> values;
    /// Row multipliers y with c − yᵀA ≥ 0 on every column at optimality.
    std::vector<double> duals;
    /// Phase-one optimum (total artificial mass); positive means infeasible.
    double infeasibility = 0.0;
    std::size_t pivots = 0;
};

/// Dense two-phase primal simplex (Dantzig pricing, Bland's rule after a run of
/// degenerate pivots). Meant for the few-hundred-variable systems used here.
Solution solve(const Problem& problem, double eps = 1e-10, std::size_t max_pivots = 200000);

}  // namespace corestable::lp
