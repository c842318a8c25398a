// igs: command-line front end.
//
//   igs analyze --builtin sierpinski-carpet --levels 4
//   igs dim     --builtin interval --param 3 --tol 0.01
//   igs export  --builtin menger-sponge --level 2 --format dot
//
// Every run writes summary.json into the output directory, also on failure.
// Exit codes: 0 ok, 2 IO, 3 validation, 4 solver, 5 budget.

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "igs/core.hpp"
#include "igs/dimension.hpp"
#include "igs/flow.hpp"
#include "igs/geometry.hpp"
#include "igs/graph.hpp"
#include "igs/modulus.hpp"
#include "igs/report.hpp"
#include "json.hpp"

using json = nlohmann::ordered_json;

namespace {

constexpr int kOk = 0, kIo = 2, kValidation = 3, kSolver = 4, kBudget = 5;
// The bounded-geometry probe needs three equal path lengths in a row.
constexpr int kProbeLevels = 5;

struct RunConfig {
    std::string command;
    std::string builtin;
    std::string spec_path;
    std::vector<int> params;
    int levels = 0;
    std::vector<double> p;
    double tol = 0.01;
    std::string out = "igs_out";
    std::string format = "csv";
    bool flows = false;
    bool force = false;
    int threads = 0;

    // Threads and the output directory do not change results and stay out of the hash.
    std::string canonical() const {
        std::ostringstream s;
        s << "command=" << command << ";builtin=" << builtin << ";spec=" << spec_path << ";params=";
        for (int x : params) s << x << ',';
        s << ";levels=" << levels << ";p=";
        for (double x : p) s << igs::format_double(x) << ',';
        s << ";tol=" << igs::format_double(tol) << ";format=" << format << ";flows=" << flows
          << ";force=" << force;
        return s.str();
    }
};

int exit_code_for(igs::ErrorCode c) {
    using igs::ErrorCode;
    switch (c) {
        case ErrorCode::Io: return kIo;
        case ErrorCode::NoConvergence:
        case ErrorCode::Infeasible:
        case ErrorCode::VerificationFailure:
        case ErrorCode::ExponentMismatch:
        case ErrorCode::NotFound: return kSolver;
        case ErrorCode::BudgetExceeded:
        case ErrorCode::SearchBudgetExceeded:
        case ErrorCode::TooLarge: return kBudget;
        default: return kValidation;
    }
}

class Run {
public:
    explicit Run(RunConfig c) : cfg_(std::move(c)), hash_(igs::config_hash(cfg_.canonical())) {
        if (const char* env = std::getenv("IGS_OUT_DIR"); env && *env) cfg_.out = env;
    }

    const RunConfig& cfg() const { return cfg_; }
    const std::string& hash() const { return hash_; }

    json header() const {
        json h;
        h["config_hash"] = hash_;
        h["tolerances"] = tolerances();
        return h;
    }

    json tolerances() const {
        const igs::ModulusOptions mo;
        return {{"tol", cfg_.tol}, {"eps_kkt", mo.eps_kkt}, {"eps_adm", mo.eps_adm}};
    }

    // Comment line for text formats.
    std::string stamp(const char* lead) const {
        const igs::ModulusOptions mo;
        return std::string(lead) + " config_hash=" + hash_ + " tol=" + igs::format_double(cfg_.tol) +
               " eps_kkt=" + igs::format_double(mo.eps_kkt) + "\n";
    }

    void write(const std::string& name, const std::string& content) {
        igs::write_text(cfg_.out + "/" + name, content);
        outputs_.push_back(name);
    }

    void note(const std::string& key, json value) { extra_[key] = std::move(value); }

    int finish(int code, const std::string& message) {
        json s;
        s["command"] = cfg_.command;
        s["system"] = cfg_.builtin.empty() ? cfg_.spec_path : cfg_.builtin;
        s["config_hash"] = hash_;
        s["tolerances"] = tolerances();
        s["exit_code"] = code;
        s["status"] = code == kOk ? "ok" : "error";
        s["message"] = message;
        s["outputs"] = outputs_;
        for (auto& [k, v] : extra_.items()) s[k] = v;
        try {
            igs::write_text(cfg_.out + "/summary.json", s.dump(2) + "\n");
        } catch (const igs::Error& e) {
            std::cerr << e.what() << "\n";
            return kIo;
        }
        std::cout << (code == kOk ? "ok" : "FAILED") << " [" << code << "] " << message << "\n";
        return code;
    }

private:
    RunConfig cfg_;
    std::string hash_;
    std::vector<std::string> outputs_;
    json extra_ = json::object();
};

igs::IgsSpec load_spec(const RunConfig& c) {
    if (!c.builtin.empty() && !c.spec_path.empty())
        throw igs::Error(igs::ErrorCode::SemanticViolation, "give --builtin or --spec, not both");
    if (!c.builtin.empty()) return igs::builtin_system(c.builtin, c.params);
    if (!c.spec_path.empty()) return igs::load_igs_file(c.spec_path);
    throw igs::Error(igs::ErrorCode::SemanticViolation, "missing --builtin or --spec");
}

igs::Exec exec_for(const RunConfig& c) {
    if (c.threads > 0) omp_set_num_threads(c.threads);
    return igs::Exec{c.threads != 1};
}

json witnesses_json(const igs::IgsSpec& spec, const std::vector<igs::GrWitness>& ws) {
    json a = json::array();
    for (const auto& w : ws)
        a.push_back({{"type", spec.types[w.type]}, {"side", w.star > 0 ? "+" : "-"}, {"symbol", spec.symbols[w.symbol]}});
    return a;
}

// Validation report; returns false (after printing witnesses) when a check fails.
bool validate(Run& run, const igs::IgsSpec& spec) {
    const igs::ValidationReport v = igs::validate_structure(spec);
    json j = run.header();
    j["system"] = spec.name;
    j["ok"] = v.ok();
    j["gr1"] = v.gr1_ok;
    j["gr2"] = v.gr2_ok;
    j["gr3"] = v.gr3_ok;
    j["corners"] = v.corner_ok;
    j["connected"] = v.connectivity_ok;
    j["c_deg"] = v.c_deg;
    j["gr1_witnesses"] = witnesses_json(spec, v.gr1_witnesses);
    j["gr2_witnesses"] = witnesses_json(spec, v.gr2_witnesses);
    j["gr3_witnesses"] = witnesses_json(spec, v.gr3_witnesses);
    j["corner_witnesses"] = v.corner_witnesses;
    run.write("validation.json", j.dump(2) + "\n");
    if (v.ok()) return true;
    auto show = [&](const char* name, bool ok, const std::vector<igs::GrWitness>& ws) {
        if (ok) return;
        std::cout << name << " fails";
        for (const auto& w : ws)
            std::cout << " (type " << spec.types[w.type] << (w.star > 0 ? "+" : "-") << ", symbol "
                      << spec.symbols[w.symbol] << ")";
        std::cout << "\n";
    };
    show("GR1", v.gr1_ok, v.gr1_witnesses);
    show("GR2", v.gr2_ok, v.gr2_witnesses);
    show("GR3", v.gr3_ok, v.gr3_witnesses);
    if (!v.corner_ok) std::cout << "corner condition fails\n";
    if (!v.connectivity_ok) std::cout << "base graph is disconnected\n";
    return false;
}

json geometry_json(const Run& run, const igs::IgsSpec& spec, const igs::GeometryReport& g) {
    json j = run.header();
    j["system"] = spec.name;
    j["l_star"] = g.l_star;
    j["l_star_declared"] = g.diam.l_star_declared;
    j["l_star_fitted"] = g.diam.fitted_l_star;
    j["d_f"] = g.d_f;
    j["c_diam"] = g.diam.c_diam;
    json d = json::array();
    for (size_t i = 0; i < g.diam.levels.size(); ++i)
        d.push_back({{"m", g.diam.levels[i]}, {"diameter", g.diam.diam[i]}, {"exact", bool(g.diam.exact[i])}});
    j["diameters"] = d;
    j["bounded_geometry"] = {{"max_nc_vertices", g.probe.max_nc_vertices},
                             {"m_star", g.probe.m_star_estimate},
                             {"stabilized", g.probe.stabilized},
                             {"stabilization_level", g.probe.stabilization_level},
                             {"level_reached", g.probe.level_reached}};
    j["face_separation"] = {{"min_distance", g.faces.min_distance}, {"c1", g.faces.c1}};
    if (g.central_found)
        j["central_word"] = {{"word", spec.word_label(g.central.word)},
                             {"level", g.central.level},
                             {"boundary_distance", g.central.boundary_distance}};
    else
        j["central_word"] = nullptr;
    return j;
}

int cmd_analyze(Run& run) {
    const auto& c = run.cfg();
    const igs::IgsSpec spec = load_spec(c);
    if (!validate(run, spec)) return run.finish(kValidation, "structural validation failed");
    const int levels = c.levels > 0 ? c.levels : 4;
    const igs::GeometryReport g = igs::geometry_report(spec, std::max(levels, kProbeLevels), exec_for(c));
    run.write("geometry.json", geometry_json(run, spec, g).dump(2) + "\n");
    std::printf("%-22s %s\n", "system", spec.name.c_str());
    std::printf("%-22s %.6f%s\n", "L*", g.l_star, g.diam.l_star_declared ? " (declared)" : " (fitted)");
    std::printf("%-22s %.6f\n", "d_f", g.d_f);
    std::printf("%-22s", "diameters");
    for (int d : g.diam.diam) std::printf(" %d", d);
    std::printf("\n%-22s", "non-collapsing paths");
    for (int v : g.probe.max_nc_vertices) std::printf(" %d", v);
    std::printf("\n%-22s %s (m* = %d)\n", "bounded geometry", g.probe.stabilized ? "stabilized" : "not stabilized",
                g.probe.m_star_estimate);
    run.note("d_f", g.d_f);
    run.note("l_star", g.l_star);
    run.note("m_star", g.probe.m_star_estimate);
    if (!g.probe.stabilized) return run.finish(kValidation, "bounded-geometry probe did not stabilize");
    return run.finish(kOk, "geometry checks passed");
}

int cmd_dim(Run& run) {
    const auto& c = run.cfg();
    const igs::IgsSpec spec = load_spec(c);
    if (!validate(run, spec) && !c.force) return run.finish(kValidation, "structural validation failed");
    const int levels = c.levels > 0 ? c.levels : 4;
    const igs::Exec exec = exec_for(c);
    if (!c.force) {
        const auto probe = igs::bounded_geometry_probe(spec, std::max(levels, kProbeLevels));
        if (!probe.stabilized)
            return run.finish(kValidation, "bounded-geometry probe did not stabilize (use --force)");
    }
    const igs::ModulusOptions mo;
    std::vector<int> lv;
    for (int m = 1; m <= levels; ++m) lv.push_back(m);
    std::vector<std::pair<int, int>> pairs;
    for (int a = 1; a < levels; ++a)
        for (int b = 1; a + b <= levels; ++b) pairs.push_back({a, b});

    bool converged = true;
    std::string seq_csv = run.stamp("#") + "p,m,M_p_m,rate,kkt_residual,converged\n";
    std::string cert_csv = run.stamp("#") +
                           "p,n,m,ratio,face_ratio,face_modulus,flow_lower_bound,flow_consistent,realized_c\n";
    json grid = json::array();
    for (double p : c.p) {
        const auto seq = igs::modulus_sequence(spec, p, lv, mo, exec);
        std::printf("p = %s\n  %-4s %-14s %-10s\n", igs::format_double(p).c_str(), "m", "M_p^(m)", "ratio");
        json row;
        row["p"] = p;
        row["levels"] = seq.levels;
        row["M"] = seq.values;
        for (size_t i = 0; i < seq.levels.size(); ++i) {
            const double rate = i ? seq.values[i] / seq.values[i - 1] : NAN;
            converged = converged && seq.diagnostics[i].converged;
            seq_csv += igs::format_double(p) + "," + std::to_string(seq.levels[i]) + "," +
                       igs::format_double(seq.values[i]) + "," + (i ? igs::format_double(rate) : "") + "," +
                       igs::format_double(seq.diagnostics[i].kkt_residual) + "," +
                       (seq.diagnostics[i].converged ? "1" : "0") + "\n";
            std::printf("  %-4d %-14.8g %s\n", seq.levels[i], seq.values[i],
                        i ? igs::format_double(rate).c_str() : "-");
        }
        if (seq.levels.size() >= 3) {
            const auto rate = igs::growth_rate(seq);
            const auto w = igs::walk_dimension(spec, rate, p);
            row["growth_rate"] = rate.estimate;
            row["walk_dimension"] = {{"d_w", w.d_w}, {"width", w.width}, {"d_f_minus_d_w_below_1", w.sobolev_condition}};
            std::printf("  growth rate %.6g, d_w = %.6g (+/- %.3g)\n", rate.estimate, w.d_w, w.width);
        }
        if (!pairs.empty()) {
            const auto mr = igs::multiplicativity_report(spec, p, pairs, mo, exec);
            std::printf("  %-8s %-10s %-10s %-12s\n", "(n,m)", "ratio", "face", "flow bound");
            for (const auto& r : mr.pairs) {
                cert_csv += igs::format_double(p) + "," + std::to_string(r.n) + "," + std::to_string(r.m) + "," +
                            igs::format_double(r.ratio) + "," + igs::format_double(r.face_ratio) + "," +
                            igs::format_double(r.face_modulus) + "," + igs::format_double(r.flow_lower_bound) + "," +
                            (r.flow_consistent ? "1" : "0") + "," + igs::format_double(r.realized_c) + "\n";
                std::printf("  (%d,%d)    %-10.6f %-10.6f %-12.4g\n", r.n, r.m, r.ratio, r.face_ratio,
                            r.flow_lower_bound);
            }
            row["c_super"] = mr.c_super;
            row["c_sub"] = mr.c_sub;
            std::printf("  c_super = %.6f, C_sub = %.6f (measured, conditional)\n", mr.c_super, mr.c_sub);
        }
        grid.push_back(row);
    }

    json report = run.header();
    if (levels >= 3) {
        igs::DimensionOptions o;
        o.tol = c.tol;
        o.m_cap = levels;
        o.probe_levels = levels;
        const auto d = igs::conformal_dimension(spec, o, exec);
        for (const auto& e : d.evaluations)
            for (const auto& dg : e.seq.diagnostics) converged = converged && dg.converged;
        json dj = json::parse(igs::dimension_to_json(spec, d));
        for (auto& [k, v] : dj.items()) report[k] = v;
        std::printf("Q* in [%.6f, %.6f], estimate %.6f (d_f = %.6f, m_cap = %d)\n", d.p_lo, d.p_hi, d.q_star,
                    d.d_f, d.m_cap);
        std::printf("disjoint face paths:");
        for (int k : d.disjoint_paths) std::printf(" %d", k);
        std::printf("%s\n", d.local_cut_points ? "  (local cut points)" : "");
        run.note("q_star", d.q_star);
        run.note("bracket", {d.p_lo, d.p_hi});
        run.note("local_cut_points", d.local_cut_points);
        if (d.budget_exceeded) run.note("budget_exceeded", true);
    } else {
        report["system"] = spec.name;
        report["bisection"] = "skipped: needs at least 3 levels";
    }
    report["p_grid"] = grid;
    run.write("dimension.json", report.dump(2) + "\n");
    run.write("sequences.csv", seq_csv);
    run.write("certificates.csv", cert_csv);
    if (!converged) return run.finish(kSolver, "a modulus solve did not reach the KKT tolerance");
    return run.finish(kOk, "dimension estimate written");
}

int cmd_export(Run& run) {
    const auto& c = run.cfg();
    const igs::IgsSpec spec = load_spec(c);
    const int level = c.levels > 0 ? c.levels : 1;
    const igs::Exec exec = exec_for(c);
    const igs::ReplacementGraph g = igs::build_graph(spec, level);
    if (c.format == "dot") {
        run.write("graph.dot", run.stamp("//") + igs::export_dot(spec, g));
    } else if (c.format == "csv") {
        run.write("edges.csv", run.stamp("#") + igs::export_edge_csv(spec, g));
    } else {
        json j = run.header();
        j["graph"] = json::parse(igs::export_json_adjacency(spec, g));
        run.write("graph.json", j.dump(2) + "\n");
    }
    if (spec.cubical) run.write("coordinates.csv", run.stamp("#") + igs::export_cubical_csv(spec, g));
    run.note("vertices", g.n);
    run.note("edges", g.num_edges());
    std::printf("level %d: %d vertices, %d edges\n", level, g.n, g.num_edges());
    if (c.flows) {
        const double p = c.p.empty() ? 2.0 : c.p.front();
        if (!(p > 1)) throw igs::Error(igs::ErrorCode::InvalidExponent, "flow export needs p > 1");
        const igs::TildeGraph tg = igs::build_tilde_graph(spec, g);
        const igs::FlowBasis basis = igs::build_flow_basis(spec, tg, igs::conjugate_exponent(p), exec);
        const igs::BasisVerification v = igs::verify_flow_basis(spec, tg, basis);
        run.write("flow_basis.csv", run.stamp("#") + igs::basis_to_csv(spec, tg, basis));
        run.note("flows", static_cast<int>(basis.flows.size()));
        run.note("basis_residuals", {{"fb1", v.fb1}, {"fb2", v.fb2}, {"fb3", v.fb3}, {"fb4", v.fb4}});
        std::printf("flow basis: %zu flows, max energy %.6g, FB residuals %.2g %.2g %.2g %.2g\n",
                    basis.flows.size(), basis.energy, v.fb1, v.fb2, v.fb3, v.fb4);
        if (!v.ok()) return run.finish(kSolver, "flow-basis verification failed: " + v.worst);
    }
    return run.finish(kOk, "export written");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iterated graph systems: replacement graphs, p-modulus and conformal dimension"};
    app.require_subcommand(1);
    RunConfig cfg;
    auto add_common = [&](CLI::App* sc) {
        auto* b = sc->add_option("--builtin", cfg.builtin, "built-in system name");
        auto* s = sc->add_option("--spec", cfg.spec_path, "IGS spec file");
        b->excludes(s);
        sc->add_option("--param", cfg.params, "parameters of the built-in system")->delimiter(',');
        sc->add_option("--levels,--level", cfg.levels, "level count (or export level)")->check(CLI::PositiveNumber);
        sc->add_option("--p", cfg.p, "exponent list, comma separated")->delimiter(',');
        sc->add_option("--tol", cfg.tol, "bisection width")->check(CLI::PositiveNumber);
        sc->add_option("--out", cfg.out, "output directory (IGS_OUT_DIR overrides)");
        sc->add_option("--format", cfg.format, "export format")->check(CLI::IsMember({"dot", "csv", "json"}));
        sc->add_flag("--flows", cfg.flows, "also export the flow basis");
        sc->add_flag("--force", cfg.force, "run even when the geometry probes fail");
        sc->add_option("--threads", cfg.threads, "OpenMP threads (1 = serial kernels)")->check(CLI::NonNegativeNumber);
    };
    auto* analyze = app.add_subcommand("analyze", "validate the system and probe its geometry");
    auto* dim = app.add_subcommand("dim", "modulus sequences, multiplicativity and conformal dimension");
    auto* exp = app.add_subcommand("export", "graph and flow-basis exports");
    for (auto* sc : {analyze, dim, exp}) add_common(sc);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kValidation;
    }
    if (dim->parsed() && cfg.p.empty()) cfg.p = {2.0};
    cfg.command = analyze->parsed() ? "analyze" : dim->parsed() ? "dim" : "export";
    Run run(cfg);
    try {
        for (double p : cfg.p)
            if (!(p >= 1.0)) throw igs::Error(igs::ErrorCode::InvalidExponent, "exponents must be at least 1");
        if (analyze->parsed()) return cmd_analyze(run);
        if (dim->parsed()) return cmd_dim(run);
        return cmd_export(run);
    } catch (const igs::Error& e) {
        std::cerr << e.what() << "\n";
        return run.finish(exit_code_for(e.code()), e.what());
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return run.finish(kSolver, e.what());
    }
}
