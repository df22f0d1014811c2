#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace corestable {

using CandidateIndex = std::uint32_t;
using VoterIndex = std::uint32_t;

/// Sorted, duplicate-free list of candidate indices.
using CandidateSet = std::vector<CandidateIndex>;

struct Voter {
    std::string id;
    CandidateSet approvals;

    bool operator==(const Voter&) const = default;
};

/// An approval-based committee election. Candidate and voter order is
/// significant: every tie-break in the library resolves to the lowest index.
class Instance {
public:
    Instance() = default;

    /// Validates ids and approval indices; approval lists are sorted and must
    /// not contain duplicates.
    Instance(std::vector<std::string> candidates, std::vector<Voter> voters);

    /// Instance with default names "c0".. and "v0"..
    static Instance from_approvals(std::size_t num_candidates,
                                   std::vector<CandidateSet> approvals);

    std::size_t num_candidates() const noexcept { return candidates_.size(); }
    std::size_t num_voters() const noexcept { return voters_.size(); }

    const std::vector<std::string>& candidates() const noexcept { return candidates_; }
    const std::vector<Voter>& voters() const noexcept { return voters_; }
    const CandidateSet& approvals(VoterIndex v) const { return voters_.at(v).approvals; }

    /// Index of the candidate with the given id; throws InvalidArgument if unknown.
    CandidateIndex candidate_index(std::string_view id) const;

    /// Restriction to the given voters (in the given order) and candidates
    /// (in the given order); approvals are intersected and re-indexed.
    Instance restrict(std::span<const VoterIndex> voters,
                      std::span<const CandidateIndex> candidates) const;

    bool operator==(const Instance&) const = default;

private:
    std::vector<std::string> candidates_;
    std::vector<Voter> voters_;
};

/// A committee together with the target size K used in stability thresholds.
struct Committee {
    CandidateSet members;
    std::size_t target_size = 0;

    bool operator==(const Committee&) const = default;
};

enum class InstanceFormat { json, lines };

Instance parse_instance(std::string_view text, InstanceFormat format);
std::string serialize_instance(const Instance& inst, InstanceFormat format);

/// Guesses the format from the first non-space character ('{' means JSON).
InstanceFormat detect_format(std::string_view text);

/// Sorts and removes duplicates.
CandidateSet normalize_set(CandidateSet s);

/// |A_v ∩ S|. `committee` must be sorted.
std::size_t utility(const Instance& inst, VoterIndex v, std::span<const CandidateIndex> committee);

/// True iff voter v strictly prefers T to S.
bool prefers(const Instance& inst, VoterIndex v, std::span<const CandidateIndex> t,
             std::span<const CandidateIndex> s);

/// Σ_{i ∈ A_v} x_i. Throws InvalidArgument on dimension mismatch.
double fractional_utility(const Instance& inst, VoterIndex v, std::span<const double> x);

}  // namespace corestable
