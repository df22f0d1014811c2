#include "corestable/report.hpp"

#include <ctime>

namespace corestable::report {

json to_json(const eq::Check& c) {
    return {{"name", c.name}, {"worst", c.worst}, {"pass", c.pass}, {"residuals", c.residuals}};
}

json to_json(const eq::EquilibriumReport& r) {
    json checks = json::array();
    for (const auto* c : {&r.nonnegativity, &r.budget, &r.price_sum, &r.voter_optimality,
                          &r.producer_optimality, &r.allocation})
        checks.push_back(to_json(*c));
    return {{"tol", r.tol}, {"pass", r.pass}, {"checks", checks}};
}

json to_json(const eq::InfeasibilityCertificate& c) {
    json rows = json::array();
    for (std::size_t i = 0; i < c.rows.size(); ++i)
        rows.push_back({{"row", c.rows[i]}, {"multiplier", c.multipliers.at(i)}});
    return {{"min_violation", c.min_violation}, {"rows", rows}};
}

json to_json(const eq::Equilibrium& e) {
    return {{"k", e.x.k},
            {"x", e.x.x},
            {"budget", e.prices.budget},
            {"prices", e.prices.p},
            {"thresholds", e.prices.thresholds},
            {"report", to_json(e.report)},
            {"rounds", e.rounds},
            {"prices_from_lp", e.prices_from_lp}};
}

std::vector<std::string> candidate_names(const Instance& inst, std::span<const CandidateIndex> s) {
    std::vector<std::string> out;
    for (auto c : s) out.push_back(inst.candidates().at(c));
    return out;
}

json to_json(const audit::AuditResult& a, const Instance& inst) {
    return {{"ratio", a.ratio},
            {"worst_t", candidate_names(inst, a.worst_t)},
            {"worst_t_indices", a.worst_t},
            {"coverage", a.coverage},
            {"mode", a.mode == audit::Mode::exact ? "exact" : "heuristic"},
            {"examined", a.examined}};
}

json to_json(const sel::ParameterReport& r, const sel::ParamSet& p) {
    json checks = json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name}, {"value", c.value}, {"target", c.target},
                          {"tolerance", c.tolerance}, {"margin", c.value - c.target}, {"ok", c.ok}});
    return {{"params",
             {{"alpha", p.alpha}, {"eta", p.eta}, {"epsilon", p.epsilon}, {"rho", p.rho},
              {"gamma", p.gamma}, {"lambda_inner", p.lambda_inner}, {"lambda_final", p.lambda_final},
              {"base_threshold", p.base_threshold}, {"max_resamples", p.max_resamples}}},
            {"t0", r.t0},
            {"beta0", p.beta(0.0)},
            {"lambda1", {{"at_0", r.lambda1_at_0}, {"at_t0", r.lambda1_at_t0}}},
            {"lambda2", {{"at_0", r.lambda2_at_0}, {"at_t0", r.lambda2_at_t0}}},
            {"balanced_gamma", p.balanced_gamma()},
            {"certified_bound", p.certified_bound()},
            {"checks", checks},
            {"ok", r.ok}};
}

json to_json(const sel::LevelRecord& l) {
    json j = {{"depth", l.depth},
              {"voters", l.num_voters},
              {"candidates", l.num_candidates},
              {"target", l.target},
              {"case", sel::to_string(l.outcome)}};
    if (l.outcome == sel::LevelCase::base) {
        j["chosen"] = l.chosen;
        j["verified"] = l.verified;
        return j;
    }
    j["k"] = l.k;
    j["kappa"] = l.kappa;
    j["alpha"] = l.alpha;
    j["gamma_cap"] = l.gamma_cap;
    j["candidate_indices"] = l.candidates;
    j["x"] = l.x;
    j["resamples"] = l.resamples;
    j["r"] = l.r;
    j["delta1"] = l.delta1;
    j["delta2"] = l.delta2;
    j["t"] = l.t;
    j["beta"] = l.beta;
    j["r_prime"] = l.r_prime;
    j["removed"] = l.removed;
    j["next_target"] = l.next_target;
    return j;
}

json to_json(const sel::SelectionResult& r, const Instance& inst) {
    json levels = json::array();
    for (const auto& l : r.levels) levels.push_back(to_json(l));
    return {{"committee", candidate_names(inst, r.committee.members)},
            {"committee_indices", r.committee.members},
            {"K", r.committee.target_size},
            {"reduced_target", r.reduced_target},
            {"padding", r.padding},
            {"seed", r.seed},
            {"certified_bound", r.certified_bound},
            {"stated_bound", r.stated_bound},
            {"levels", levels}};
}

json to_json(const tail::PoissonClaimReport& r) {
    return {{"alpha", r.alpha},
            {"mu_max", r.mu_max},
            {"ok", r.ok},
            {"argmax", {r.argmax[0], r.argmax[1]}},
            {"min_margin", {r.min_margin[0], r.min_margin[1]}}};
}

void stamp(json& j) {
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    j["timestamp"] = buf;
}

}  // namespace corestable::report
