#include "igs/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "igs/flow.hpp"
#include "igs/geometry.hpp"
#include "igs/graph.hpp"
#include "json.hpp"

namespace igs {

namespace {

std::pair<std::vector<int>, std::vector<int>> first_face_pair(const IgsSpec& spec, int level, int* ka = nullptr,
                                                              int* kb = nullptr) {
    const auto pairs = antipodal_face_pairs(spec);
    if (pairs.empty()) throw Error(ErrorCode::Infeasible, "no antipodal face pair");
    const FaceTable ft = face_table(spec);
    const int a = ft.key_of[pairs[0].first], b = ft.key_of[pairs[0].second];
    if (ka) *ka = a;
    if (kb) *kb = b;
    return {boundary_set(spec, level, face_key_type(a), face_key_star(a)),
            boundary_set(spec, level, face_key_type(b), face_key_star(b))};
}

// Subgraph induced on a sorted vertex list; ids are positions in the list.
Graph induced(const Graph& g, const std::vector<int>& keep) {
    std::vector<int> pos(g.n, -1);
    for (size_t i = 0; i < keep.size(); ++i) pos[keep[i]] = static_cast<int>(i);
    Graph h;
    h.n = static_cast<int>(keep.size());
    for (const auto& e : g.edges)
        if (pos[e[0]] >= 0 && pos[e[1]] >= 0) h.edges.push_back({pos[e[0]], pos[e[1]]});
    h.finalize();
    return h;
}

std::vector<int> cells(const std::vector<int>& words, int Wm) {
    std::vector<int> out;
    for (int u : words)
        for (int v = 0; v < Wm; ++v) out.push_back(u * Wm + v);
    return out;
}

constexpr double kFlat = 1e-7;

}  // namespace

double ModulusSequence::at(int m) const {
    for (size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == m) return values[i];
    throw Error(ErrorCode::InsufficientLevels, "level " + std::to_string(m) + " not in the sequence");
}

ModulusSequence modulus_sequence(const IgsSpec& spec, double p, const std::vector<int>& levels,
                                 const ModulusOptions& opts, Exec exec) {
    ModulusSequence s;
    s.p = p;
    s.levels = levels;
    std::sort(s.levels.begin(), s.levels.end());
    s.levels.erase(std::unique(s.levels.begin(), s.levels.end()), s.levels.end());
    const Symmetries sym = find_symmetries(spec);
    for (int m : s.levels) {
        if (m < 1) throw Error(ErrorCode::InsufficientLevels, "levels start at 1");
        const ReplacementGraph g = build_graph(spec, m);
        const UniversalDensity u = universal_density(spec, g, sym, p, opts, exec);
        LevelDiagnostics d;
        d.level = m;
        for (const auto& r : u.pair_results) {
            d.kkt_residual = std::max(d.kkt_residual, r.kkt_residual);
            d.iterations += r.iterations;
            d.converged = d.converged && r.converged;
        }
        d.max_pair_modulus = u.max_pair_modulus;
        d.invariance_defect = u.invariance_defect;
        s.values.push_back(u.mass);
        s.diagnostics.push_back(d);
    }
    return s;
}

GrowthRate growth_rate(const ModulusSequence& seq) {
    if (seq.values.size() < 3) throw Error(ErrorCode::InsufficientLevels, "growth rate needs at least 3 levels");
    GrowthRate g;
    double logsum = 0;
    for (size_t i = 1; i < seq.values.size(); ++i) {
        const int gap = seq.levels[i] - seq.levels[i - 1];
        const double r = std::pow(seq.values[i] / seq.values[i - 1], 1.0 / gap);
        g.ratios.push_back(r);
        logsum += std::log(r);
    }
    g.estimate = std::exp(logsum / static_cast<double>(g.ratios.size()));
    g.last_ratio = g.ratios.back();
    const auto [lo, hi] = std::minmax_element(g.ratios.begin(), g.ratios.end());
    g.width = *hi - *lo;
    return g;
}

MultiplicativityReport multiplicativity_report(const IgsSpec& spec, double p,
                                               const std::vector<std::pair<int, int>>& pairs,
                                               const ModulusOptions& opts, Exec exec, bool with_flows) {
    MultiplicativityReport rep;
    rep.p = p;
    std::set<int> need;
    for (auto [n, m] : pairs) {
        if (n < 1 || m < 1) throw Error(ErrorCode::InsufficientLevels, "pair levels start at 1");
        need.insert(n);
        need.insert(m);
        need.insert(n + m);
    }
    const ModulusSequence seq = modulus_sequence(spec, p, {need.begin(), need.end()}, opts, exec);
    int ka = 0, kb = 0;
    std::map<int, double> face_mod;
    std::map<int, ReplacementGraph> graphs;
    for (int k : need) {
        graphs.emplace(k, build_graph(spec, k));
        const auto [A, B] = first_face_pair(spec, k, &ka, &kb);
        face_mod[k] = solve_modulus(graphs.at(k), A, B, p, opts).value;
    }
    rep.c_sub = 0;
    rep.c_super = HUGE_VAL;
    for (auto [n, m] : pairs) {
        PairRatio pr;
        pr.n = n;
        pr.m = m;
        pr.ratio = seq.at(n + m) / (seq.at(n) * seq.at(m));
        pr.face_ratio = face_mod[n + m] / (face_mod[n] * face_mod[m]);
        pr.face_modulus = face_mod[n + m];
        if (with_flows && p > 1.0) {
            try {
                const double q = conjugate_exponent(p);
                const auto& gn = graphs.at(n);
                const auto [A, B] = first_face_pair(spec, n);
                const Flow fn = solve_flow(gn, A, B, q).flow;
                const TildeGraph tm = build_tilde_graph(spec, m);
                const FlowBasis basis = build_flow_basis(spec, tm, q, exec);
                const ReplacementFlow rf = replacement_flow(spec, gn, fn, basis, tm, face_typing(spec, n, ka, kb),
                                                            graphs.at(n + m), exec);
                pr.realized_c = rf.realized_c;
                pr.flow_lower_bound =
                    std::pow(rf.energy, -p / q) / (std::pow(2.0, p) * graphs.at(n + m).max_degree());
                pr.flow_consistent = pr.flow_lower_bound <= pr.face_modulus * (1 + 1e-9);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::UnsupportedClass) throw;
            }
        }
        rep.c_sub = std::max(rep.c_sub, pr.ratio);
        rep.c_super = std::min(rep.c_super, pr.ratio);
        rep.pairs.push_back(pr);
    }
    if (pairs.empty()) rep.c_super = 0;
    return rep;
}

double scaling_factor(const IgsSpec& spec, int levels) {
    if (spec.scale > 0) return spec.scale;
    const DiameterGrowth dg = diameter_growth(spec, levels);
    return dg.l_star;
}

WalkDimension walk_dimension(const IgsSpec& spec, const GrowthRate& rate, double p, double l_star) {
    WalkDimension w;
    w.p = p;
    const double L = l_star > 0 ? l_star : scaling_factor(spec);
    const double S = spec.num_symbols();
    w.d_w = std::log(S / rate.estimate) / std::log(L);
    if (!rate.ratios.empty()) {
        const auto [lo, hi] = std::minmax_element(rate.ratios.begin(), rate.ratios.end());
        w.width = (std::log(*hi) - std::log(*lo)) / std::log(L);
    }
    const double d_f = std::log(S) / std::log(L);
    w.sobolev_condition = d_f - w.d_w < 1.0;
    return w;
}

DimensionReport conformal_dimension(const IgsSpec& spec, const DimensionOptions& o, Exec exec) {
    if (o.m_cap < 3) throw Error(ErrorCode::InsufficientLevels, "bisection needs at least 3 levels");
    if (!(o.tol > 0)) throw Error(ErrorCode::SemanticViolation, "tolerance must be positive");
    DimensionReport rep;
    rep.m_cap = o.m_cap;
    rep.l_star = scaling_factor(spec);
    rep.d_f = std::log(static_cast<double>(spec.num_symbols())) / std::log(rep.l_star);
    std::vector<int> levels;
    for (int m = 1; m <= o.m_cap; ++m) levels.push_back(m);
    auto eval = [&](double p) {
        PEvaluation e;
        e.p = p;
        e.seq = modulus_sequence(spec, p, levels, o.modulus, exec);
        e.rate = growth_rate(e.seq);
        e.c_super = HUGE_VAL;
        e.c_sub = 0;
        for (int a = 1; a < o.m_cap; ++a)
            for (int b = 1; a + b <= o.m_cap; ++b) {
                const double r = e.seq.at(a + b) / (e.seq.at(a) * e.seq.at(b));
                e.c_super = std::min(e.c_super, r);
                e.c_sub = std::max(e.c_sub, r);
            }
        const double M = e.seq.at(o.m_cap);
        e.super_certificate = M * e.c_super >= 1.0;
        e.sub_certificate = e.c_sub * M < 1.0;
        rep.evaluations.push_back(e);
        // Growth beyond the solver noise floor means the dimension exceeds p; a
        // flat sequence sits at the crossing and counts as not growing.
        return e.rate.last_ratio - 1.0 - kFlat;
    };
    double lo = 1.0, hi = rep.d_f + 1.0;
    const double f_lo = eval(lo);
    const double f_hi = eval(hi);
    if (f_lo <= 0) {
        hi = lo;
    } else if (f_hi >= 0) {
        lo = hi;
        rep.budget_exceeded = true;
    } else {
        int steps = 0;
        while (hi - lo > o.tol) {
            if (++steps > o.max_bisections) {
                rep.budget_exceeded = true;
                break;
            }
            const double mid = 0.5 * (lo + hi);
            (eval(mid) > 0 ? lo : hi) = mid;
        }
    }
    rep.p_lo = lo;
    rep.p_hi = hi;
    rep.q_star = 0.5 * (lo + hi);
    // Disjoint face-to-face paths; a single path means local cut points.
    for (int m = 1; m <= o.probe_levels; ++m) {
        const ReplacementGraph g = build_graph(spec, m);
        const auto [A, B] = first_face_pair(spec, m);
        rep.disjoint_paths.push_back(max_vertex_disjoint_paths(g, A, B));
    }
    rep.local_cut_points = !rep.disjoint_paths.empty() && rep.disjoint_paths.back() < 2;
    std::vector<const PEvaluation*> sorted;
    for (const auto& e : rep.evaluations) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->p < b->p; });
    for (const auto* e : sorted) rep.walk.push_back(walk_dimension(spec, e->rate, e->p, rep.l_star));
    return rep;
}

ClpProbe clp_probe(const IgsSpec& spec, double p, int n, int m, int r, int samples, const ModulusOptions& opts) {
    ClpProbe c;
    c.n = n;
    c.m = m;
    c.p = p;
    const ReplacementGraph gn = build_graph(spec, n);
    const DiameterResult dr = graph_diameter(gn);
    if (r > dr.diameter) {
        c.skipped = true;
        return c;
    }
    const ReplacementGraph gnm = build_graph(spec, n + m);
    c.reference = modulus_sequence(spec, p, {m}, opts).values[0];
    const int Wm = static_cast<int>(ipow(spec.num_symbols(), m));
    samples = std::max(1, std::min(samples, gn.n));
    for (int i = 0; i < samples; ++i) {
        const int w = static_cast<int>(static_cast<long long>(i) * gn.n / samples);
        const auto dist = bfs_distances(gn, {w});
        std::vector<int> inner, outer;
        for (int v = 0; v < gn.n; ++v) {
            if (dist[v] >= 0 && dist[v] <= r) inner.push_back(v);
            if (dist[v] > 2 * r) outer.push_back(v);
        }
        AnnulusSample a;
        a.w = w;
        a.r = r;
        if (outer.empty()) {
            a.skipped = true;
        } else {
            a.modulus = solve_modulus(gnm, cells(inner, Wm), cells(outer, Wm), p, opts).value;
            a.ratio = a.modulus / c.reference;
        }
        c.annulus.push_back(a);
        // Tube along a shortest path to the first word at distance min(2, ecc).
        const int ecc = *std::max_element(dist.begin(), dist.end());
        const int target = std::min(2, ecc);
        if (target < 1) continue;
        int w2 = -1;
        for (int v = 0; v < gn.n && w2 < 0; ++v)
            if (dist[v] == target) w2 = v;
        const auto path = graph_distance(gn, {w}, {w2}).path;
        std::vector<int> tube_words(path.begin(), path.end());
        std::sort(tube_words.begin(), tube_words.end());
        const auto tube = cells(tube_words, Wm);
        const Graph h = induced(gnm, tube);
        std::vector<int> A, B;
        for (size_t j = 0; j < tube.size(); ++j) {
            if (tube[j] / Wm == w) A.push_back(static_cast<int>(j));
            if (tube[j] / Wm == w2) B.push_back(static_cast<int>(j));
        }
        TubeSample t;
        t.w = w;
        t.w2 = w2;
        t.distance = target;
        t.modulus = solve_modulus(h, A, B, p, opts).value;
        t.lower_bound = std::pow(static_cast<double>(target), 1.0 - p) * c.reference;
        t.ratio = t.modulus / t.lower_bound;
        c.tubes.push_back(t);
    }
    return c;
}

std::string dimension_to_json(const IgsSpec& spec, const DimensionReport& d) {
    using json = nlohmann::ordered_json;
    json j;
    j["system"] = spec.name;
    j["d_f"] = d.d_f;
    j["l_star"] = d.l_star;
    j["m_cap"] = d.m_cap;
    j["q_star"] = d.q_star;
    j["bracket"] = {d.p_lo, d.p_hi};
    j["budget_exceeded"] = d.budget_exceeded;
    j["disjoint_paths"] = d.disjoint_paths;
    j["local_cut_points"] = d.local_cut_points;
    json ev = json::array();
    for (const auto& e : d.evaluations) {
        json x;
        x["p"] = e.p;
        x["levels"] = e.seq.levels;
        x["values"] = e.seq.values;
        x["rate_last_ratio"] = e.rate.last_ratio;
        x["rate_geometric_mean"] = e.rate.estimate;
        x["rate_width"] = e.rate.width;
        x["c_super"] = e.c_super;
        x["c_sub"] = e.c_sub;
        x["lower_certificate_conditional"] = e.super_certificate;
        x["upper_certificate_conditional"] = e.sub_certificate;
        ev.push_back(x);
    }
    j["evaluations"] = ev;
    json wd = json::array();
    for (const auto& w : d.walk)
        wd.push_back({{"p", w.p}, {"d_w", w.d_w}, {"width", w.width}, {"d_f_minus_d_w_below_1", w.sobolev_condition}});
    j["walk_dimension"] = wd;
    return j.dump(2);
}

}  // namespace igs
