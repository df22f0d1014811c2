#pragma once

#include <json.hpp>

#include "corestable/audit.hpp"
#include "corestable/equilibrium.hpp"
#include "corestable/selection.hpp"
#include "corestable/tailbounds.hpp"

namespace corestable::report {

using nlohmann::json;

json to_json(const eq::Check& c);
json to_json(const eq::EquilibriumReport& r);
json to_json(const eq::InfeasibilityCertificate& c);
/// {x, prices, report, rounds, prices_from_lp}
json to_json(const eq::Equilibrium& e);

json to_json(const audit::AuditResult& a, const Instance& inst);

json to_json(const sel::ParameterReport& r, const sel::ParamSet& p);
json to_json(const sel::LevelRecord& level);
/// Full audit trail; no timestamp (see stamp()).
json to_json(const sel::SelectionResult& r, const Instance& inst);

json to_json(const tail::PoissonClaimReport& r);

/// Adds a "timestamp" member (UTC, ISO 8601). Determinism checks drop it.
void stamp(json& j);

std::vector<std::string> candidate_names(const Instance& inst, std::span<const CandidateIndex> s);

}  // namespace corestable::report
