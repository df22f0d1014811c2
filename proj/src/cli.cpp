#include "corestable/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "corestable/audit.hpp"
#include "corestable/equilibrium.hpp"
#include "corestable/gen.hpp"
#include "corestable/report.hpp"
#include "corestable/sampler.hpp"
#include "corestable/selection.hpp"
#include "corestable/tailbounds.hpp"

namespace corestable::cli {

namespace {

namespace fs = std::filesystem;
using report::json;

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct Common {
    std::string input;
    std::string output;
    std::uint64_t seed = 42;
    double tol = 1e-6;
    bool json_out = false;
};

std::string read_text(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Instance load_instance(const std::string& path) {
    if (path.empty()) throw InvalidArgument("an input instance is required (-i)");
    const auto text = read_text(path);
    return parse_instance(text, detect_format(text));
}

void emit(const Common& c, const std::string& text, std::ostream& out) {
    if (c.output.empty()) {
        out << text;
        return;
    }
    std::ofstream f(c.output, std::ios::binary);
    if (!f) throw InvalidArgument("cannot write " + c.output);
    f << text;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t\n"));
        item.erase(item.find_last_not_of(" \t\n") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Names first; a token that is not a name but an in-range integer is an index.
CandidateSet resolve_committee(const Instance& inst, const std::vector<std::string>& tokens) {
    CandidateSet s;
    for (const auto& t : tokens) {
        const auto& names = inst.candidates();
        const auto it = std::find(names.begin(), names.end(), t);
        if (it != names.end()) {
            s.push_back(static_cast<CandidateIndex>(it - names.begin()));
            continue;
        }
        std::size_t pos = 0;
        unsigned long idx = 0;
        try {
            idx = std::stoul(t, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != t.size() || idx >= inst.num_candidates())
            throw InvalidArgument("unknown candidate '" + t + "'");
        s.push_back(static_cast<CandidateIndex>(idx));
    }
    return normalize_set(std::move(s));
}

// A committee argument is a comma list or a file holding one: a solve result,
// a JSON array, or a comma list.
CandidateSet committee_arg(const Instance& inst, const std::string& arg) {
    if (!fs::is_regular_file(arg)) return resolve_committee(inst, split_list(arg));
    const auto text = read_text(arg);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(e.what(), 0, e.byte);
        }
        const json& list = j.is_object() ? j.at("committee") : j;
        std::vector<std::string> tokens;
        for (const auto& e : list) tokens.push_back(e.is_string() ? e.get<std::string>() : std::to_string(e.get<long>()));
        return resolve_committee(inst, tokens);
    }
    return resolve_committee(inst, split_list(text));
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& t : split_list(s)) {
        std::size_t pos = 0;
        const auto v = std::stoul(t, &pos);
        if (pos != t.size()) throw InvalidArgument("not a list of integers: " + s);
        out.push_back(v);
    }
    return out;
}

bool exact_feasible(const Instance& inst, std::size_t cap) {
    return inst.num_candidates() <= 24 || cap <= 6;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- commands --------------------------------------------------------------

struct GenArgs {
    std::string model = "impartial";
    std::size_t n = 0, m = 0;
    double q = 0.3, radius = 0.2;
    std::string voter_parties, candidate_parties;
    std::string format = "json";
};

int cmd_gen(const Common& c, const GenArgs& a, std::ostream& out) {
    GenSpec spec;
    if (a.model == "impartial") spec.model = GenModel::impartial;
    else if (a.model == "party_list") spec.model = GenModel::party_list;
    else if (a.model == "euclidean1d") spec.model = GenModel::euclidean1d;
    else throw InvalidArgument("unknown model " + a.model);
    spec.voter_parties = parse_sizes(a.voter_parties);
    spec.candidate_parties = parse_sizes(a.candidate_parties);
    spec.num_voters = a.n;
    spec.num_candidates = a.m;
    if (spec.model == GenModel::party_list) {
        if (!a.n) spec.num_voters = std::accumulate(spec.voter_parties.begin(), spec.voter_parties.end(), std::size_t{0});
        if (!a.m) spec.num_candidates = std::accumulate(spec.candidate_parties.begin(), spec.candidate_parties.end(), std::size_t{0});
    }
    spec.approval_probability = a.q;
    spec.radius = a.radius;
    spec.seed = c.seed;
    const auto fmt = a.format == "lines" ? InstanceFormat::lines : InstanceFormat::json;
    if (a.format != "lines" && a.format != "json") throw InvalidArgument("format must be json or lines");
    emit(c, serialize_instance(generate(spec), fmt), out);
    return kOk;
}

int cmd_equilibrium(const Common& c, long k, bool raw, std::ostream& out, std::ostream& err) {
    const auto inst = load_instance(c.input);
    try {
        if (raw) {
            const auto x = eq::solve_capped_mnw(inst, k);
            const auto fit = eq::fit_prices(inst, x, c.tol);
            json j = {{"k", k}, {"x", x.x}, {"feasible", fit.feasible}};
            if (fit.feasible) {
                const auto rep = eq::validate_lindahl(inst, x, fit.prices, c.tol);
                j["prices"] = fit.prices.p;
                j["report"] = report::to_json(rep);
                emit(c, dump(j), out);
                return rep.pass ? kOk : kFail;
            }
            j["certificate"] = report::to_json(fit.certificate);
            emit(c, dump(j), out);
            return kFail;
        }
        eq::LindahlOptions opts;
        opts.certify_tol = c.tol;
        const auto e = eq::compute_lindahl(inst, k, opts);
        emit(c, dump(report::to_json(e)), out);
        return e.report.pass ? kOk : kFail;
    } catch (const eq::EquilibriumFailure& f) {
        json j = {{"k", k}, {"x", f.allocation().x}, {"error", f.what()},
                  {"certificate", report::to_json(f.certificate())}};
        emit(c, dump(j), out);
        err << "error: " << f.what() << "\n";
        return kFail;
    }
}

struct SolveArgs {
    std::size_t K = 0;
    sel::ParamSet params;
    bool audit = false;
};

int cmd_solve(const Common& c, const SolveArgs& a, std::ostream& out) {
    const auto inst = load_instance(c.input);
    const auto res = sel::select_committee(inst, a.K, a.params, c.seed);
    json j = report::to_json(res, inst);
    if (a.audit) {
        const auto cap = audit::default_size_cap(inst, a.K);
        if (exact_feasible(inst, cap)) {
            j["audit"] = report::to_json(audit::stability_ratio_exact(inst, res.committee.members, a.K, cap), inst);
        } else {
            CounterRng rng(c.seed, 1);
            j["audit"] = report::to_json(audit::stability_ratio_heuristic(inst, res.committee.members, a.K, 8, rng), inst);
        }
    }
    report::stamp(j);
    emit(c, dump(j), out);
    return kOk;
}

struct VerifyArgs {
    std::string committee;
    std::size_t K = 0;
    bool exact = false, heuristic = false;
    std::size_t size_cap = 0;
    std::size_t budget = 8;
    double assert_lambda = 0.0;
};

int cmd_verify(const Common& c, const VerifyArgs& a, std::ostream& out, std::ostream& err) {
    const auto inst = load_instance(c.input);
    if (a.committee.empty()) throw InvalidArgument("--committee is required");
    const auto s = committee_arg(inst, a.committee);
    const std::size_t K = a.K ? a.K : s.size();
    if (K == 0) throw InvalidArgument("K must be positive");
    const std::size_t cap = a.size_cap ? a.size_cap : audit::default_size_cap(inst, K);
    const bool heuristic = a.heuristic || (!a.exact && !exact_feasible(inst, cap));
    audit::AuditResult res;
    if (heuristic) {
        CounterRng rng(c.seed);
        res = audit::stability_ratio_heuristic(inst, s, K, a.budget, rng);
    } else {
        res = audit::stability_ratio_exact(inst, s, K, cap);
    }
    json j = report::to_json(res, inst);
    j["committee"] = report::candidate_names(inst, s);
    j["K"] = K;
    int code = kOk;
    if (a.assert_lambda > 0.0) {
        // Stable at λ iff every coverage stays strictly below λ|T|n/K, i.e. ratio < λ.
        const bool ok = res.ratio < a.assert_lambda;
        j["asserted_lambda"] = a.assert_lambda;
        j["stable"] = ok;
        if (!ok) {
            err << "not " << a.assert_lambda << "-stable: ratio " << res.ratio << "\n";
            code = kFail;
        }
    }
    emit(c, dump(j), out);
    return code;
}

int cmd_pav(const Common& c, std::size_t s, std::ostream& out) {
    const auto inst = load_instance(c.input);
    const auto com = sel::pav_exact(inst, s);
    double score = 0.0;
    for (VoterIndex v = 0; v < inst.num_voters(); ++v)
        for (std::size_t j = 1; j <= utility(inst, v, com); ++j) score += 1.0 / static_cast<double>(j);
    json j = {{"committee", report::candidate_names(inst, com)}, {"committee_indices", com},
              {"score", score}, {"score_scaled", sel::pav_score_scaled(inst, com, s)}};
    emit(c, dump(j), out);
    return kOk;
}

int cmd_sample(const Common& c, const std::string& marginals, long kappa, std::size_t count,
               std::ostream& out) {
    if (marginals.empty()) throw InvalidArgument("--marginals is required");
    json j;
    try {
        if (fs::is_regular_file(marginals)) j = json::parse(read_text(marginals));
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), 0, e.byte);
    }
    sr::MarginalVector xp;
    if (j.is_null()) {
        for (const auto& t : split_list(marginals)) {
            try {
                xp.values.push_back(std::stod(t));
            } catch (const std::exception&) {
                throw InvalidArgument("bad marginal '" + t + "'");
            }
        }
    } else {
        xp.values = j.get<std::vector<double>>();
    }
    const double mass = std::accumulate(xp.values.begin(), xp.values.end(), 0.0);
    xp.kappa = kappa > 0 ? kappa : std::lround(mass);
    if (std::abs(mass - static_cast<double>(xp.kappa)) > 1e-6)
        throw InvalidArgument("marginals sum to " + std::to_string(mass) + ", not kappa");
    sr::FitReport fit;
    const sr::FixedSizeSampler sampler(sr::fit_max_entropy(xp, 1e-9, 100000, &fit), xp.kappa);
    CounterRng rng(c.seed);
    std::ostringstream ss;
    for (std::size_t i = 0; i < count; ++i) ss << json(sampler.sample(rng)).dump() << "\n";
    emit(c, ss.str(), out);
    return kOk;
}

int cmd_tailcheck(const Common& c, double alpha, long mu_max, std::size_t trials, std::ostream& out) {
    const auto claim = tail::check_claim_pois(alpha, mu_max);
    CounterRng rng(c.seed);
    std::size_t failed = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto n = 1 + rng.below(25);
        std::vector<double> p(n);
        for (auto& v : p) v = rng.uniform();
        const double a = 2.0 + 2.0 * rng.uniform();
        const double mu = std::floor(std::accumulate(p.begin(), p.end(), 0.0) / a);
        if (!tail::verify_main_tail(p, mu, a).ok) ++failed;
    }
    const bool ok = claim.ok && failed == 0;
    if (c.json_out) {
        json j = {{"poisson_claim", report::to_json(claim)}, {"random_trials", trials},
                  {"random_failures", failed}, {"seed", c.seed}, {"ok", ok}};
        emit(c, dump(j), out);
    } else {
        std::ostringstream ss;
        ss << std::setprecision(6);
        ss << "poisson claim  alpha=" << alpha << " mu_max=" << mu_max << "  "
           << (claim.ok ? "pass" : "FAIL") << "  argmax=(" << claim.argmax[0] << "," << claim.argmax[1]
           << ")  min margin=(" << claim.min_margin[0] << "," << claim.min_margin[1] << ")\n";
        ss << "main tail      " << trials << " random queries, " << failed << " failures\n";
        ss << (ok ? "pass" : "FAIL") << "\n";
        emit(c, ss.str(), out);
    }
    return ok ? kOk : kFail;
}

int cmd_params(const Common& c, const sel::ParamSet& p, std::ostream& out) {
    const auto rep = sel::verify_parameters(p);
    if (c.json_out) {
        emit(c, dump(report::to_json(rep, p)), out);
    } else {
        std::ostringstream ss;
        ss << std::setprecision(10);
        ss << "t0 = " << rep.t0 << "   beta(0) = " << p.beta(0.0) << "\n";
        for (const auto& ch : rep.checks)
            ss << std::left << std::setw(12) << ch.name << " = " << ch.value << "   target " << ch.target
               << " +- " << ch.tolerance << "   " << (ch.ok ? "ok" : "FAIL") << "\n";
        ss << "balanced gamma " << p.balanced_gamma() << "   certified bound " << p.certified_bound() << "\n";
        emit(c, ss.str(), out);
    }
    return rep.ok ? kOk : kFail;
}

struct BenchArgs {
    std::string dir;
    std::string sizes = "3";
    std::string seeds = "42";
    sel::ParamSet params;
};

std::string csv_quote(std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

int cmd_bench(const Common& c, const BenchArgs& a, std::ostream& out) {
    if (a.dir.empty()) throw InvalidArgument("--dir is required");
    if (!fs::is_directory(a.dir)) throw InvalidArgument(a.dir + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    const auto sizes = parse_sizes(a.sizes);
    std::vector<std::uint64_t> seeds;
    for (auto s : parse_sizes(a.seeds)) seeds.push_back(s);

    std::ostringstream ss;
    ss << "instance,K,seed,status,runtime_s,committee,ratio,audit_mode,resamples,depth,error\n";
    ss << std::setprecision(10);
    for (const auto& f : files) {
        std::optional<Instance> inst;
        std::string load_error;
        try {
            inst = load_instance(f.string());
        } catch (const std::exception& e) {
            load_error = e.what();
        }
        for (auto K : sizes) {
            for (auto seed : seeds) {
                ss << csv_quote(f.filename().string()) << "," << K << "," << seed << ",";
                if (!inst) {
                    ss << "error,,,,,,," << csv_quote(load_error) << "\n";
                    continue;
                }
                try {
                    const auto t0 = std::chrono::steady_clock::now();
                    const auto res = sel::select_committee(*inst, K, a.params, seed);
                    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    const auto cap = audit::default_size_cap(*inst, K);
                    audit::AuditResult ar;
                    if (exact_feasible(*inst, cap)) {
                        ar = audit::stability_ratio_exact(*inst, res.committee.members, K, cap);
                    } else {
                        CounterRng rng(seed, 1);
                        ar = audit::stability_ratio_heuristic(*inst, res.committee.members, K, 8, rng);
                    }
                    std::size_t resamples = 0, depth = 0;
                    for (const auto& l : res.levels) {
                        resamples += l.resamples;
                        depth = std::max(depth, l.depth + 1);
                    }
                    std::string com;
                    for (auto m : res.committee.members) com += (com.empty() ? "" : " ") + inst->candidates()[m];
                    ss << "ok," << dt << "," << csv_quote(com) << "," << ar.ratio << ","
                       << (ar.mode == audit::Mode::exact ? "exact" : "heuristic") << "," << resamples << ","
                       << depth << ",\n";
                } catch (const std::exception& e) {
                    ss << "error,,,,,,," << csv_quote(e.what()) << "\n";
                }
            }
        }
    }
    emit(c, ss.str(), out);
    return kOk;
}

void add_common(CLI::App* app, Common& c, bool input = true) {
    if (input) app->add_option("-i,--input", c.input, "instance file (json or lines; - for stdin)");
    app->add_option("-o,--output", c.output, "output file (default stdout)");
    app->add_option("--seed", c.seed, "random seed")->capture_default_str();
    app->add_option("--tol", c.tol, "tolerance")->capture_default_str();
    app->add_flag("--json", c.json_out, "JSON output where text is the default");
}

void add_param_overrides(CLI::App* app, sel::ParamSet& p) {
    app->add_option("--epsilon", p.epsilon, "acceptance slack")->capture_default_str();
    app->add_option("--base-threshold", p.base_threshold, "largest target solved by the base case")->capture_default_str();
    app->add_option("--max-resamples", p.max_resamples, "sampling budget per level")->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Approximately core-stable committees for approval elections"};
    app.require_subcommand(1);
    Common c;

    auto* gen = app.add_subcommand("gen", "generate a random instance");
    GenArgs ga;
    add_common(gen, c, false);
    gen->add_option("--model", ga.model, "impartial | party_list | euclidean1d")->capture_default_str();
    gen->add_option("-n,--voters", ga.n, "number of voters");
    gen->add_option("-m,--candidates", ga.m, "number of candidates");
    gen->add_option("-q,--probability", ga.q, "impartial approval probability")->capture_default_str();
    gen->add_option("--radius", ga.radius, "euclidean1d approval radius")->capture_default_str();
    gen->add_option("--voter-parties", ga.voter_parties, "party_list voter party sizes, comma separated");
    gen->add_option("--candidate-parties", ga.candidate_parties, "party_list candidate party sizes");
    gen->add_option("--format", ga.format, "json | lines")->capture_default_str();

    auto* equi = app.add_subcommand("equilibrium", "compute and certify a Lindahl equilibrium");
    long k = 0;
    bool raw = false;
    add_common(equi, c);
    equi->add_option("-k", k, "committee mass")->required();
    equi->add_flag("--raw", raw, "unweighted capped Nash welfare optimum plus fitted prices");

    auto* solve = app.add_subcommand("solve", "select a committee");
    SolveArgs sa;
    add_common(solve, c);
    solve->add_option("-K", sa.K, "committee size")->required();
    add_param_overrides(solve, sa.params);
    solve->add_flag("--audit", sa.audit, "attach a stability audit of the result");

    auto* verify = app.add_subcommand("verify", "audit a committee's stability ratio");
    VerifyArgs va;
    add_common(verify, c);
    verify->add_option("--committee", va.committee, "comma list of names or indices, or a file");
    verify->add_option("-K", va.K, "target size (default: committee size)");
    auto* ex = verify->add_flag("--exact", va.exact, "exhaustive audit");
    verify->add_flag("--heuristic", va.heuristic, "greedy/local-search adversary")->excludes(ex);
    verify->add_option("--size-cap", va.size_cap, "largest deviation size (default min(m, K))");
    verify->add_option("--budget", va.budget, "heuristic restarts")->capture_default_str();
    verify->add_option("--assert-lambda", va.assert_lambda, "exit 1 unless lambda-stable");

    auto* pav = app.add_subcommand("pav", "exact PAV committee");
    std::size_t pav_s = 0;
    add_common(pav, c);
    pav->add_option("-s,-K", pav_s, "committee size")->required();

    auto* samp = app.add_subcommand("sample-sr", "fixed-size maximum-entropy samples");
    std::string marginals;
    long kappa = 0;
    std::size_t count = 10;
    add_common(samp, c, false);
    samp->add_option("--marginals", marginals, "inclusion probabilities: comma list or JSON file")->required();
    samp->add_option("--kappa", kappa, "sample size (default: marginal mass)");
    samp->add_option("--count", count, "number of samples")->capture_default_str();

    auto* tailc = app.add_subcommand("tailcheck", "check the lower-tail bounds");
    double alpha = 2.154564;
    long mu_max = 100;
    std::size_t trials = 0;
    add_common(tailc, c, false);
    tailc->add_option("--alpha", alpha)->capture_default_str();
    tailc->add_option("--mu-max", mu_max)->capture_default_str();
    tailc->add_option("--trials", trials, "random main-bound queries")->capture_default_str();

    auto* params = app.add_subcommand("params", "verify the parameter constraints");
    sel::ParamSet pp;
    add_common(params, c, false);
    params->add_option("--alpha", pp.alpha)->capture_default_str();
    params->add_option("--eta", pp.eta)->capture_default_str();
    params->add_option("--gamma", pp.gamma)->capture_default_str();
    params->add_option("--rho", pp.rho)->capture_default_str();
    params->add_option("--lambda", pp.lambda_inner)->capture_default_str();

    auto* bench = app.add_subcommand("bench", "solve and audit every instance in a directory");
    BenchArgs ba;
    add_common(bench, c, false);
    bench->add_option("--dir", ba.dir, "instance directory")->required();
    bench->add_option("-K", ba.sizes, "committee sizes, comma separated")->capture_default_str();
    bench->add_option("--seeds", ba.seeds, "seeds, comma separated")->capture_default_str();
    add_param_overrides(bench, ba.params);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(c, ga, out);
        if (equi->parsed()) return cmd_equilibrium(c, k, raw, out, err);
        if (solve->parsed()) return cmd_solve(c, sa, out);
        if (verify->parsed()) return cmd_verify(c, va, out, err);
        if (pav->parsed()) return cmd_pav(c, pav_s, out);
        if (samp->parsed()) return cmd_sample(c, marginals, kappa, count, out);
        if (tailc->parsed()) return cmd_tailcheck(c, alpha, mu_max, trials, out);
        if (params->parsed()) return cmd_params(c, pp, out);
        if (bench->parsed()) return cmd_bench(c, ba, out);
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << "\n";
        return kUsage;
    } catch (const InvalidArgument& e) {
        err << "invalid argument: " << e.what() << "\n";
        return kUsage;
    } catch (const GuardExceeded& e) {
        err << "too large: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFail;
    }
    return kUsage;
}

}  // namespace corestable::cli
