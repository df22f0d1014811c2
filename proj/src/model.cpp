#include "corestable/model.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "corestable/error.hpp"

namespace corestable {

namespace {

struct TextPosition {
    std::size_t line = 1;
    std::size_t column = 1;
};

TextPosition position_of(std::string_view text, std::size_t offset) {
    TextPosition pos;
    offset = std::min(offset, text.size());
    for (std::size_t i = 0; i < offset; ++i) {
        if (text[i] == '\n') {
            ++pos.line;
            pos.column = 1;
        } else {
            ++pos.column;
        }
    }
    return pos;
}

// Best-effort location of a quoted token, searched from `from`.
TextPosition locate_token(std::string_view text, const std::string& token, std::size_t from = 0) {
    const std::string quoted = "\"" + token + "\"";
    const auto at = text.find(quoted, from);
    return position_of(text, at == std::string_view::npos ? 0 : at);
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

// Parses whitespace-separated unsigned integers; `line_no` is for diagnostics.
std::vector<std::uint64_t> parse_uints(std::string_view line, std::size_t line_no) {
    std::vector<std::uint64_t> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
            ++i;
            continue;
        }
        std::uint64_t value = 0;
        const auto* first = line.data() + i;
        const auto* last = line.data() + line.size();
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} ||
            (ptr != last && *ptr != ' ' && *ptr != '\t' && *ptr != '\r')) {
            throw ParseError("expected a non-negative integer", line_no, i + 1);
        }
        out.push_back(value);
        i = static_cast<std::size_t>(ptr - line.data());
    }
    return out;
}

Instance parse_lines(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw ParseError("empty input", 1, 1);
    const auto header = parse_uints(lines[0], 1);
    if (header.size() != 2) throw ParseError("header must be 'm n'", 1, 1);
    const auto m = static_cast<std::size_t>(header[0]);
    const auto n = static_cast<std::size_t>(header[1]);
    if (lines.size() != n + 1) {
        throw ParseError("expected " + std::to_string(n) + " voter lines, found " +
                             std::to_string(lines.size() - 1),
                         lines.size() + 1, 1);
    }
    std::vector<CandidateSet> approvals(n);
    for (std::size_t v = 0; v < n; ++v) {
        const std::size_t line_no = v + 2;
        const auto raw = parse_uints(lines[v + 1], line_no);
        CandidateSet set;
        for (const auto c : raw) {
            if (c >= m) {
                throw ParseError("candidate index " + std::to_string(c) + " out of range [0, " +
                                     std::to_string(m) + ")",
                                 line_no, 1);
            }
            set.push_back(static_cast<CandidateIndex>(c));
        }
        const auto before = set.size();
        set = normalize_set(std::move(set));
        if (set.size() != before) throw ParseError("duplicate candidate index", line_no, 1);
        approvals[v] = std::move(set);
    }
    return Instance::from_approvals(m, std::move(approvals));
}

Instance parse_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto pos = position_of(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ParseError(std::string("malformed JSON: ") + e.what(), pos.line, pos.column);
    }
    if (!doc.is_object() || !doc.contains("candidates") || !doc.contains("voters") ||
        !doc["candidates"].is_array() || !doc["voters"].is_array()) {
        throw ParseError("expected an object with 'candidates' and 'voters' arrays", 1, 1);
    }
    std::vector<std::string> candidates;
    std::unordered_map<std::string, CandidateIndex> index;
    for (const auto& c : doc["candidates"]) {
        if (!c.is_string()) throw ParseError("candidate ids must be strings", 1, 1);
        auto name = c.get<std::string>();
        if (!index.emplace(name, static_cast<CandidateIndex>(candidates.size())).second) {
            const auto pos = locate_token(text, name, text.find(name) + name.size());
            throw ParseError("duplicate candidate id '" + name + "'", pos.line, pos.column);
        }
        candidates.push_back(std::move(name));
    }
    std::vector<Voter> voters;
    std::unordered_set<std::string> voter_ids;
    for (const auto& rec : doc["voters"]) {
        if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string() ||
            !rec.contains("approves") || !rec["approves"].is_array()) {
            throw ParseError("voter " + std::to_string(voters.size()) +
                                 " must have string 'id' and array 'approves'",
                             1, 1);
        }
        Voter voter;
        voter.id = rec["id"].get<std::string>();
        const auto id_at = text.find("\"" + voter.id + "\"");
        if (!voter_ids.insert(voter.id).second) {
            const auto pos = locate_token(text, voter.id, id_at + 1);
            throw ParseError("duplicate voter id '" + voter.id + "'", pos.line, pos.column);
        }
        for (const auto& a : rec["approves"]) {
            if (!a.is_string()) throw ParseError("approvals must be candidate ids", 1, 1);
            const auto name = a.get<std::string>();
            const auto it = index.find(name);
            if (it == index.end()) {
                const auto pos = locate_token(text, name, id_at == std::string_view::npos ? 0 : id_at);
                throw ParseError("unknown candidate '" + name + "' approved by voter '" +
                                     voter.id + "'",
                                 pos.line, pos.column);
            }
            voter.approvals.push_back(it->second);
        }
        const auto before = voter.approvals.size();
        voter.approvals = normalize_set(std::move(voter.approvals));
        if (voter.approvals.size() != before) {
            const auto pos = position_of(text, id_at);
            throw ParseError("voter '" + voter.id + "' approves a candidate twice", pos.line,
                             pos.column);
        }
        voters.push_back(std::move(voter));
    }
    return Instance(std::move(candidates), std::move(voters));
}

}  // namespace

Instance::Instance(std::vector<std::string> candidates, std::vector<Voter> voters)
    : candidates_(std::move(candidates)), voters_(std::move(voters)) {
    std::unordered_set<std::string_view> seen;
    for (const auto& c : candidates_) {
        if (!seen.insert(c).second) throw InvalidArgument("duplicate candidate id '" + c + "'");
    }
    seen.clear();
    for (const auto& v : voters_) {
        if (!seen.insert(v.id).second) throw InvalidArgument("duplicate voter id '" + v.id + "'");
        for (std::size_t j = 0; j < v.approvals.size(); ++j) {
            if (v.approvals[j] >= candidates_.size()) {
                throw InvalidArgument("voter '" + v.id + "' approves out-of-range candidate " +
                                      std::to_string(v.approvals[j]));
            }
            if (j > 0 && v.approvals[j] <= v.approvals[j - 1]) {
                throw InvalidArgument("approvals of voter '" + v.id +
                                      "' must be strictly increasing");
            }
        }
    }
}

Instance Instance::from_approvals(std::size_t num_candidates,
                                  std::vector<CandidateSet> approvals) {
    std::vector<std::string> candidates(num_candidates);
    for (std::size_t i = 0; i < num_candidates; ++i) candidates[i] = "c" + std::to_string(i);
    std::vector<Voter> voters(approvals.size());
    for (std::size_t v = 0; v < approvals.size(); ++v) {
        voters[v].id = "v" + std::to_string(v);
        voters[v].approvals = std::move(approvals[v]);
    }
    return Instance(std::move(candidates), std::move(voters));
}

CandidateIndex Instance::candidate_index(std::string_view id) const {
    const auto it = std::find(candidates_.begin(), candidates_.end(), id);
    if (it == candidates_.end()) {
        throw InvalidArgument("unknown candidate '" + std::string(id) + "'");
    }
    return static_cast<CandidateIndex>(it - candidates_.begin());
}

Instance Instance::restrict(std::span<const VoterIndex> voters,
                            std::span<const CandidateIndex> candidates) const {
    std::vector<std::int64_t> remap(candidates_.size(), -1);
    std::vector<std::string> names;
    names.reserve(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        remap.at(candidates[j]) = static_cast<std::int64_t>(j);
        names.push_back(candidates_[candidates[j]]);
    }
    std::vector<Voter> kept;
    kept.reserve(voters.size());
    for (const auto v : voters) {
        Voter copy;
        copy.id = voters_.at(v).id;
        for (const auto c : voters_[v].approvals) {
            if (remap[c] >= 0) copy.approvals.push_back(static_cast<CandidateIndex>(remap[c]));
        }
        copy.approvals = normalize_set(std::move(copy.approvals));
        kept.push_back(std::move(copy));
    }
    return Instance(std::move(names), std::move(kept));
}

CandidateSet normalize_set(CandidateSet s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

InstanceFormat detect_format(std::string_view text) {
    for (const char c : text) {
        if (c == ' ' || c == '\n' || c == '\t' || c == '\r') continue;
        return c == '{' ? InstanceFormat::json : InstanceFormat::lines;
    }
    return InstanceFormat::lines;
}

Instance parse_instance(std::string_view text, InstanceFormat format) {
    return format == InstanceFormat::json ? parse_json(text) : parse_lines(text);
}

std::string serialize_instance(const Instance& inst, InstanceFormat format) {
    if (format == InstanceFormat::lines) {
        std::ostringstream out;
        out << inst.num_candidates() << ' ' << inst.num_voters() << '\n';
        for (const auto& v : inst.voters()) {
            for (std::size_t j = 0; j < v.approvals.size(); ++j) {
                if (j > 0) out << ' ';
                out << v.approvals[j];
            }
            out << '\n';
        }
        return out.str();
    }
    nlohmann::ordered_json doc;
    doc["candidates"] = inst.candidates();
    auto voters = nlohmann::ordered_json::array();
    for (const auto& v : inst.voters()) {
        nlohmann::ordered_json rec;
        rec["id"] = v.id;
        auto approves = nlohmann::ordered_json::array();
        for (const auto c : v.approvals) approves.push_back(inst.candidates()[c]);
        rec["approves"] = std::move(approves);
        voters.push_back(std::move(rec));
    }
    doc["voters"] = std::move(voters);
    return doc.dump(2) + "\n";
}

std::size_t utility(const Instance& inst, VoterIndex v, std::span<const CandidateIndex> committee) {
    const auto& a = inst.approvals(v);
    std::size_t count = 0;
    auto it = a.begin();
    for (const auto c : committee) {
        it = std::lower_bound(it, a.end(), c);
        if (it == a.end()) break;
        if (*it == c) ++count;
    }
    return count;
}

bool prefers(const Instance& inst, VoterIndex v, std::span<const CandidateIndex> t,
             std::span<const CandidateIndex> s) {
    return utility(inst, v, t) > utility(inst, v, s);
}

double fractional_utility(const Instance& inst, VoterIndex v, std::span<const double> x) {
    if (x.size() != inst.num_candidates()) {
        throw InvalidArgument("allocation has dimension " + std::to_string(x.size()) +
                              ", expected " + std::to_string(inst.num_candidates()));
    }
    double sum = 0.0;
    for (const auto c : inst.approvals(v)) sum += x[c];
    return sum;
}

}  // namespace corestable
