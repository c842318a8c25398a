#include "igs/flow.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>

namespace igs {

namespace {

template <class Body>
void for_each_index(int n, Exec exec, Body&& body) {
    std::vector<std::exception_ptr> err(n);
#pragma omp parallel for schedule(dynamic) if (exec.parallel)
    for (int i = 0; i < n; ++i) {
        try {
            body(i);
        } catch (...) {
            err[i] = std::current_exception();
        }
    }
    for (auto& e : err)
        if (e) std::rethrow_exception(e);
}

int face_of(const FaceTable& ft, int t, Star star) { return ft.of_key[face_key(t, star)]; }

std::string face_label(const IgsSpec& spec, const FaceTable& ft, int f) {
    const int k = ft.key_of[f];
    return spec.types[face_key_type(k)] + (face_key_star(k) > 0 ? "+" : "-");
}

bool sets_overlap(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> c;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(c));
    return !c.empty();
}

Flow negated(const Flow& f) {
    Flow r;
    r.values = f.values;
    for (double& v : r.values) v = -v;
    r.A = f.B;
    r.B = f.A;
    return r;
}

// Flip eta_t per type, as a permutation of the symbols.
std::vector<std::vector<int>> flip_perms(const IgsSpec& spec) {
    std::vector<std::vector<int>> out(spec.num_types());
    if (spec.family == Family::Cubical && spec.cubical) {
        for (int t = 0; t < spec.num_types(); ++t) out[t] = cubical_map(spec, 'e', t).perm;
        return out;
    }
    const Symmetries sym = find_symmetries(spec);
    for (int t = 0; t < spec.num_types(); ++t) {
        if (sym.flipping.empty() || sym.flipping[t] < 0)
            throw Error(ErrorCode::MissingFlippingSymmetry, "no flipping symmetry for type " + spec.types[t]);
        out[t] = sym.flip(t).perm;
    }
    return out;
}

std::vector<Side> classify_all(const TildeGraph& tg, const SymbolMap& alpha) {
    const LiftedMap lm = lift_map(alpha, tg.S, tg.level);
    std::vector<Side> cls(tg.base_n);
    for (int v = 0; v < tg.base_n; ++v) cls[v] = lm.classify(v);
    return cls;
}

// Keeps F on edges touching the kept side or the attachments of keep_face,
// and uses -alpha(F) elsewhere.
Flow splice(const TildeGraph& tg, const Flow& f, const SymbolMap& alpha, Side keep, int keep_face) {
    const auto cls = classify_all(tg, alpha);
    const Flow af = map_flow(tg, f, alpha.perm);
    const Graph& g = tg.graph;
    Flow r;
    r.values.assign(g.num_edges(), 0.0);
    auto touches = [&](int x) {
        if (x < tg.base_n) return cls[x] == keep;
        return tg.att_face[x - tg.base_n] == keep_face;
    };
    for (int k = 0; k < g.num_edges(); ++k) {
        const int x = g.edges[k][0], y = g.edges[k][1];
        r.values[k] = (touches(x) || touches(y)) ? f.values[k] : -af.values[k];
    }
    return r;
}

double resistance(const TildeGraph& tg, int fa, int fb, double q) {
    const auto& A = tg.face_words[fa];
    const auto& B = tg.face_words[fb];
    if (sets_overlap(A, B)) return 0.0;
    return solve_flow(tg.base, A, B, q).energy;
}

void finish_basis(const TildeGraph& tg, FlowBasis& b, Exec exec) {
    b.energy = 0;
    for (const auto& [key, f] : b.flows) {
        const double e = flow_energy(f, b.q);
        b.energies[key] = e;
        b.energy = std::max(b.energy, e);
    }
    std::vector<std::pair<int, int>> pairs;
    for (int t = 0; t < static_cast<int>(tg.faces.of_key.size()) / 2; ++t) {
        const int fa = face_of(tg.faces, t, -1), fb = face_of(tg.faces, t, +1);
        if (fa == fb) continue;
        const auto p = std::make_pair(std::min(fa, fb), std::max(fa, fb));
        if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(p);
    }
    std::vector<double> r(pairs.size(), 0.0);
    for_each_index(static_cast<int>(pairs.size()), exec,
                   [&](int i) { r[i] = resistance(tg, pairs[i].first, pairs[i].second, b.q); });
    b.min_face_resistance = r.empty() ? 0.0 : *std::min_element(r.begin(), r.end());
    b.energy_ratio = b.min_face_resistance > 0 ? b.energy / b.min_face_resistance : 0.0;
}

}  // namespace

// ---------------------------------------------------------------- tilde graph

int TildeGraph::attachment(int face, int word) const {
    const auto& w = face_words[face];
    auto it = std::lower_bound(w.begin(), w.end(), word);
    if (it == w.end() || *it != word) return -1;
    return attach[face][it - w.begin()];
}

int TildeGraph::attachment_edge(int face, int word) const {
    const int a = attachment(face, word);
    return a < 0 ? -1 : base_edges + (a - base_n);
}

TildeGraph build_tilde_graph(const IgsSpec& spec, const ReplacementGraph& g) {
    TildeGraph tg;
    tg.level = g.level;
    tg.S = g.S;
    tg.base_n = g.n;
    tg.base_edges = g.num_edges();
    tg.faces = face_table(spec);
    tg.base.n = g.n;
    tg.base.edges = g.edges;
    tg.base.finalize();
    Graph& G = tg.graph;
    G.n = g.n;
    G.edges = g.edges;
    const int nf = static_cast<int>(tg.faces.sets.size());
    tg.face_words.resize(nf);
    tg.attach.resize(nf);
    for (int f = 0; f < nf; ++f) {
        const int k = tg.faces.key_of[f];
        tg.face_words[f] = boundary_set(spec, g.level, face_key_type(k), face_key_star(k));
        for (int w : tg.face_words[f]) {
            const int id = G.n++;
            tg.attach[f].push_back(id);
            tg.att_face.push_back(f);
            tg.att_word.push_back(w);
            G.edges.push_back({id, w});
        }
    }
    G.finalize();
    return tg;
}

TildeGraph build_tilde_graph(const IgsSpec& spec, int m) { return build_tilde_graph(spec, build_graph(spec, m)); }

FlowExtension extend_flow(const Graph& g, const Flow& f, double q) {
    if (!(q > 1.0) || std::isinf(q)) throw Error(ErrorCode::InvalidExponent, "dual exponent must be in (1, inf)");
    FlowExtension ex;
    ex.graph.n = g.n;
    ex.graph.edges = g.edges;
    ex.flow.values = f.values;
    const auto d = divergence(g, f);
    std::vector<int> ends = f.A;
    ends.insert(ends.end(), f.B.begin(), f.B.end());
    std::sort(ends.begin(), ends.end());
    ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
    std::vector<char> inA(g.n, 0);
    for (int a : f.A) inA[a] = 1;
    for (int x : ends) {
        const int id = ex.graph.n++;
        ex.graph.edges.push_back({id, x});
        ex.flow.values.push_back(d[x]);  // F(v_x, x) = div F(x)
        (inA[x] ? ex.flow.A : ex.flow.B).push_back(id);
    }
    ex.graph.finalize();
    const double p = q / (q - 1.0);
    ex.energy_before = flow_energy(f, q);
    ex.energy_after = flow_energy(ex.flow, q);
    ex.bound = 3.0 * std::pow(static_cast<double>(g.max_degree()), 1.0 / (p - 1.0)) * ex.energy_before;
    ex.within_bound = ex.energy_after <= ex.bound * (1 + 1e-12);
    return ex;
}

// ---------------------------------------------------------------- optimal flows

FlowResult optimal_boundary_flow(const TildeGraph& tg, int face_from, int face_to, double q) {
    if (face_from == face_to) throw Error(ErrorCode::Infeasible, "source and target faces coincide");
    std::vector<char> zero(tg.graph.num_edges(), 0);
    for (int i = 0; i < static_cast<int>(tg.att_face.size()); ++i)
        if (tg.att_face[i] != face_from && tg.att_face[i] != face_to) zero[tg.base_edges + i] = 1;
    return solve_flow(tg.graph, tg.attach[face_from], tg.attach[face_to], q, &zero);
}

FlowResult optimal_type_flow(const TildeGraph& tg, int t, Star star, double q) {
    return optimal_boundary_flow(tg, face_of(tg.faces, t, star), face_of(tg.faces, t, -star), q);
}

// ---------------------------------------------------------------- symmetries

std::vector<int> tilde_vertex_map(const TildeGraph& tg, const std::vector<int>& perm) {
    const auto lift = lift_perm(perm, tg.S, tg.level).table;
    std::vector<int> out(tg.graph.n);
    for (int v = 0; v < tg.base_n; ++v) out[v] = lift[v];
    for (int i = 0; i < static_cast<int>(tg.att_face.size()); ++i) {
        const int f2 = map_face(tg.faces, perm, tg.att_face[i]);
        if (f2 < 0) throw Error(ErrorCode::SemanticViolation, "permutation does not map faces to faces");
        const int a = tg.attachment(f2, lift[tg.att_word[i]]);
        if (a < 0) throw Error(ErrorCode::SemanticViolation, "permutation does not preserve face membership");
        out[tg.base_n + i] = a;
    }
    return out;
}

Flow map_flow(const TildeGraph& tg, const Flow& f, const std::vector<int>& perm) {
    const auto T = tilde_vertex_map(tg, perm);
    const Graph& g = tg.graph;
    Flow r;
    r.values.assign(g.num_edges(), 0.0);
    for (int k = 0; k < g.num_edges(); ++k) {
        const int a = T[g.edges[k][0]], b = T[g.edges[k][1]];
        const int k2 = g.find_edge(a, b);
        if (k2 < 0) throw Error(ErrorCode::SemanticViolation, "permutation is not a graph automorphism");
        r.values[k2] = g.edges[k2][0] == a ? f.values[k] : -f.values[k];
    }
    for (int a : f.A) r.A.push_back(T[a]);
    for (int b : f.B) r.B.push_back(T[b]);
    std::sort(r.A.begin(), r.A.end());
    std::sort(r.B.begin(), r.B.end());
    return r;
}

double flow_value(const Graph& g, const Flow& f, int x, int y) { return f.at(g, x, y); }

// ---------------------------------------------------------------- twist

TwistResult twist_flow(const TildeGraph& tg, const Flow& f, int face_from, int face_to, const SymbolMap& alpha,
                       double q) {
    if (!alpha.reflection || alpha.side.empty())
        throw Error(ErrorCode::HypothesisViolation, "map is not a reflection symmetry");
    if (!alpha.separative) throw Error(ErrorCode::HypothesisViolation, "reflection is not separative");
    const int a1 = map_face(tg.faces, alpha.perm, face_from), a2 = map_face(tg.faces, alpha.perm, face_to);
    if (a1 < 0 || a2 < 0) throw Error(ErrorCode::SemanticViolation, "reflection does not map faces to faces");
    if (a1 == face_from || a1 == face_to || a2 == face_from || a2 == face_to)
        throw Error(ErrorCode::HypothesisViolation, "hypothesis (1): {L1,L2} meets {a(L1),a(L2)}");
    auto cls = classify_all(tg, alpha);
    auto avoids = [&](int face, Side bad) {
        for (int w : tg.face_words[face])
            if (cls[w] == bad) return false;
        return true;
    };
    auto fits = [&](Side c, Side d) {
        return avoids(face_from, d) && avoids(a2, d) && avoids(face_to, c) && avoids(a1, c);
    };
    TwistResult tr;
    if (!fits(Side::C, Side::D)) {
        if (!fits(Side::D, Side::C))
            throw Error(ErrorCode::HypothesisViolation, "hypothesis (2): faces not contained in the partition sides");
        tr.swapped_partition = true;
        for (auto& s : cls)
            if (s != Side::Delta) s = s == Side::C ? Side::D : Side::C;
    }
    const Flow af = map_flow(tg, f, alpha.perm);
    const Graph& g = tg.graph;
    auto in_c = [&](int x) {
        if (x < tg.base_n) return cls[x] == Side::C;
        const int fc = tg.att_face[x - tg.base_n];
        return fc == face_from || fc == a2;
    };
    auto in_delta = [&](int x) { return x < tg.base_n && cls[x] == Side::Delta; };
    tr.flow.values.assign(g.num_edges(), 0.0);
    for (int k = 0; k < g.num_edges(); ++k) {
        const int x = g.edges[k][0], y = g.edges[k][1];
        if (in_delta(x) && in_delta(y))
            tr.flow.values[k] = f.values[k];
        else if (in_c(x) || in_c(y))
            tr.flow.values[k] = f.values[k] + af.values[k];
    }
    tr.flow.A = tg.attach[face_from];
    tr.flow.B = tg.attach[a2];
    tr.from_face = face_from;
    tr.to_face = a2;
    const double e = flow_energy(f, q);
    tr.energy_ratio = e > 0 ? flow_energy(tr.flow, q) / e : 0.0;
    return tr;
}

// ---------------------------------------------------------------- bases

FlowBasis build_flow_basis(const IgsSpec& spec, const TildeGraph& tg, double q, Exec exec) {
    if (!(q > 1.0) || std::isinf(q)) throw Error(ErrorCode::InvalidExponent, "dual exponent must be in (1, inf)");
    FlowBasis b;
    b.level = tg.level;
    b.q = q;
    const FaceTable& ft = tg.faces;
    const int T = spec.num_types();
    if (spec.family == Family::Cubical || spec.family == Family::Gasket) {
        b.family = spec.family == Family::Cubical ? "cubical" : "gasket";
        std::vector<Flow> opt(T);
        for_each_index(T, exec, [&](int t) { opt[t] = optimal_type_flow(tg, t, -1, q).flow; });
        for (int t = 0; t < T; ++t) {
            const int fm = face_of(ft, t, -1), fp = face_of(ft, t, +1);
            b.flows.emplace(std::make_pair(fm, fp), opt[t]);
            b.flows.emplace(std::make_pair(fp, fm), negated(opt[t]));
        }
        if (spec.family == Family::Cubical) {
            struct Job {
                int i, j;
                Star star;
                char kind;
            };
            std::vector<Job> jobs;
            for (int i = 0; i < T; ++i)
                for (Star star : {-1, +1})
                    for (int j = 0; j < T; ++j)
                        if (j != i)
                            for (char kind : {'+', '-'}) jobs.push_back({i, j, star, kind});
            std::vector<TwistResult> out(jobs.size());
            for_each_index(static_cast<int>(jobs.size()), exec, [&](int n) {
                const Job& jb = jobs[n];
                const int fa = face_of(ft, jb.i, jb.star), fb = face_of(ft, jb.i, -jb.star);
                out[n] = twist_flow(tg, b.flows.at({fa, fb}), fa, fb, cubical_map(spec, jb.kind, jb.i, jb.j), q);
            });
            for (auto& tr : out) b.flows.emplace(std::make_pair(tr.from_face, tr.to_face), std::move(tr.flow));
        }
    } else if (spec.family == Family::Pentagon) {
        b.family = "pentagon";
        std::vector<int> L(5);
        for (int i = 0; i < 5; ++i) {
            std::vector<int> s = {(i + 2) % 5, (i + 3) % 5};
            std::sort(s.begin(), s.end());
            auto it = std::find(ft.sets.begin(), ft.sets.end(), s);
            if (it == ft.sets.end()) throw Error(ErrorCode::UnsupportedClass, "pentagon faces not found");
            L[i] = static_cast<int>(it - ft.sets.begin());
        }
        auto md = [](int i) { return ((i % 5) + 5) % 5; };
        std::vector<Flow> opt(10);
        for_each_index(10, exec, [&](int n) {
            const int i = n % 5, off = n < 5 ? 2 : -2;
            opt[n] = optimal_boundary_flow(tg, L[i], L[md(i + off)], q).flow;
        });
        std::vector<Flow> out(20);
        for_each_index(5, exec, [&](int i) {
            Flow fi;
            fi.values.resize(opt[i].values.size());
            for (size_t k = 0; k < fi.values.size(); ++k) fi.values[k] = 0.5 * (opt[i].values[k] + opt[i + 5].values[k]);
            Flow f2 = splice(tg, fi, pentagon_reflection(spec, md(i - 1)), Side::C, L[md(i + 1)]);
            f2.A = tg.attach[L[i]];
            f2.B = tg.attach[L[md(i - 2)]];
            Flow f1 = splice(tg, f2, pentagon_reflection(spec, md(i - 3)), Side::D, L[i]);
            f1.A = tg.attach[L[i]];
            f1.B = tg.attach[L[md(i - 1)]];
            const auto eta = pentagon_reflection(spec, i).perm;
            out[4 * i + 0] = f2;
            out[4 * i + 1] = f1;
            out[4 * i + 2] = map_flow(tg, f2, eta);
            out[4 * i + 3] = map_flow(tg, f1, eta);
        });
        for (int i = 0; i < 5; ++i) {
            const int to[4] = {md(i - 2), md(i - 1), md(i + 2), md(i + 1)};
            for (int r = 0; r < 4; ++r) b.flows.emplace(std::make_pair(L[i], L[to[r]]), std::move(out[4 * i + r]));
        }
    } else {
        throw Error(ErrorCode::UnsupportedClass, "flow bases are built for cubical, gasket and pentagon systems only");
    }
    finish_basis(tg, b, exec);
    return b;
}

FlowBasis build_flow_basis(const IgsSpec& spec, int m, double q, Exec exec) {
    return build_flow_basis(spec, build_tilde_graph(spec, m), q, exec);
}

bool BasisVerification::ok(double tol) const {
    const double t = tol * scale;
    return count == expected && fb1 <= t && fb2 <= t && fb3 <= t && fb4 <= t && reverse_ie_slack >= -tol;
}

BasisVerification verify_flow_basis(const IgsSpec& spec, const TildeGraph& tg, const FlowBasis& basis) {
    BasisVerification r;
    const Graph& g = tg.graph;
    const int nf = tg.num_faces();
    r.expected = nf * (nf - 1);
    r.count = static_cast<int>(basis.flows.size());
    for (const auto& [key, f] : basis.flows)
        for (double v : f.values) r.scale = std::max(r.scale, std::abs(v));
    double worst = -1;
    auto note = [&](double& slot, double res, const std::string& what) {
        slot = std::max(slot, res);
        if (res > worst) {
            worst = res;
            r.worst = what;
        }
    };
    auto tag = [&](const char* c, int a, int b) {
        return std::string(c) + " " + face_label(spec, tg.faces, a) + "->" + face_label(spec, tg.faces, b);
    };
    // value F(v_L, v) on the attachment edge
    auto att = [&](const Flow& f, int face, int v) { return f.values[tg.attachment_edge(face, v)]; };
    for (int a = 0; a < nf; ++a)
        for (int b = 0; b < nf; ++b) {
            if (a == b) continue;
            auto it = basis.flows.find({a, b});
            if (it == basis.flows.end()) {
                note(r.fb1, HUGE_VAL, tag("FB1 missing", a, b));
                continue;
            }
            const Flow& f = it->second;
            const auto d = divergence(g, f);
            std::vector<char> role(g.n, 0);
            for (int x : tg.attach[a]) role[x] = 1;
            for (int x : tg.attach[b]) role[x] = 2;
            double I = 0, div = 0;
            for (int v = 0; v < g.n; ++v) {
                if (role[v] == 1) I += d[v];
                if (role[v] == 0) div = std::max(div, std::abs(d[v]));
            }
            note(r.fb1, std::max(div, std::abs(I - 1.0)), tag("FB1", a, b));
            double z = 0;
            for (int L = 0; L < nf; ++L)
                if (L != a && L != b)
                    for (int v : tg.face_words[L]) z = std::max(z, std::abs(att(f, L, v)));
            note(r.fb2, z, tag("FB2", a, b));
        }
    // FB3 against the first partner of each face
    for (int L = 0; L < nf; ++L) {
        int ref = -1;
        for (int L1 = 0; L1 < nf; ++L1) {
            if (L1 == L || !basis.flows.count({L, L1}) || !basis.flows.count({L1, L})) continue;
            if (ref < 0) {
                ref = L1;
                continue;
            }
            double res = 0;
            for (int v : tg.face_words[L]) {
                res = std::max(res, std::abs(att(basis.at(L, L1), L, v) - att(basis.at(L, ref), L, v)));
                res = std::max(res, std::abs(att(basis.at(L1, L), L, v) - att(basis.at(ref, L), L, v)));
            }
            note(r.fb3, res, tag("FB3", L, L1));
        }
    }
    const auto flips = flip_perms(spec);
    for (int t = 0; t < spec.num_types(); ++t) {
        const auto eta = lift_perm(flips[t], tg.S, tg.level).table;
        for (Star star : {-1, +1}) {
            const int L1 = face_of(tg.faces, t, star), L2 = face_of(tg.faces, t, -star);
            if (L1 == L2 || !basis.flows.count({L1, L2}) || !basis.flows.count({L2, L1})) continue;
            const Flow& f = basis.at(L1, L2);
            const Flow& fr = basis.at(L2, L1);
            double res = 0;
            for (int v : tg.face_words[L1]) {
                const double a = att(f, L1, v);
                const int ev = eta[v];
                if (tg.attachment(L2, ev) < 0) {
                    res = HUGE_VAL;
                    continue;
                }
                res = std::max(res, std::abs(a + att(f, L2, ev)));  // F(eta v, (eta v)_{L2}) = -F((eta v)_{L2}, eta v)
                res = std::max(res, std::abs(a + att(fr, L1, v)));
            }
            note(r.fb4, res, tag("FB4", L1, L2));
        }
    }
    // Restriction to G_m is a unit flow between the faces, so its energy is at
    // least the face-pair resistance.
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < nf; ++a)
        for (int b = a + 1; b < nf; ++b) pairs.emplace_back(a, b);
    std::vector<double> slack(pairs.size(), HUGE_VAL);
    for_each_index(static_cast<int>(pairs.size()), Exec{}, [&](int i) {
        const auto [a, b] = pairs[i];
        const double R = resistance(tg, a, b, basis.q);
        if (!(R > 0)) return;
        for (const auto& key : {std::make_pair(a, b), std::make_pair(b, a)}) {
            auto it = basis.flows.find(key);
            if (it == basis.flows.end()) continue;
            double e = 0;
            for (int k = 0; k < tg.base_edges; ++k) e += std::pow(std::abs(it->second.values[k]), basis.q);
            slack[i] = std::min(slack[i], (e - R) / R);
        }
    });
    r.reverse_ie_slack = slack.empty() ? 0.0 : *std::min_element(slack.begin(), slack.end());
    return r;
}

// ---------------------------------------------------------------- replacement flow

BoundaryTyping face_typing(const IgsSpec& spec, int n, int key_a, int key_b) {
    BoundaryTyping ty;
    const auto A = boundary_set(spec, n, face_key_type(key_a), face_key_star(key_a));
    const auto B = boundary_set(spec, n, face_key_type(key_b), face_key_star(key_b));
    if (sets_overlap(A, B)) throw Error(ErrorCode::Infeasible, "source and target faces overlap");
    for (int u : A) ty.of_word[u] = {face_key_type(key_a), face_key_star(key_a)};
    for (int u : B) ty.of_word[u] = {face_key_type(key_b), face_key_star(key_b)};
    return ty;
}

ReplacementFlow replacement_flow(const IgsSpec& spec, const ReplacementGraph& gn, const Flow& fn,
                                 const FlowBasis& basis, const TildeGraph& tm, const BoundaryTyping& typing,
                                 const ReplacementGraph& gnm, Exec exec) {
    const int n = gn.level, m = tm.level;
    if (basis.level != m) throw Error(ErrorCode::LevelMismatch, "basis level differs from the attached graph");
    if (gnm.level != n + m) throw Error(ErrorCode::LevelMismatch, "target graph level must be n + m");
    if (fn.values.size() != static_cast<size_t>(gn.num_edges()))
        throw Error(ErrorCode::LevelMismatch, "flow does not live on the level-n graph");
    const double q = basis.q, p = q / (q - 1.0);
    const FaceTable& ft = tm.faces;
    const int Wm = static_cast<int>(ipow(tm.S, m));
    std::vector<std::vector<int>> eta;
    for (const auto& perm : flip_perms(spec)) eta.push_back(lift_perm(perm, tm.S, m).table);
    const auto div_n = divergence(gn, fn);
    std::vector<char> role(gn.n, 0);
    for (int a : fn.A) role[a] = 1;
    for (int b : fn.B) role[b] = 2;
    for (int u = 0; u < gn.n; ++u) {
        if (!role[u]) continue;
        auto it = typing.of_word.find(u);
        if (it == typing.of_word.end())
            throw Error(ErrorCode::TypingIncomplete, "no boundary typing for word " + std::to_string(u));
        if (tm.face_words[face_of(ft, it->second.first, it->second.second)].empty())
            throw Error(ErrorCode::TypingIncomplete, "typing selects an empty face");
    }
    auto att_out = [&](const Flow& f, int face, int v) {  // F(v, v_L)
        return -f.values[tm.attachment_edge(face, v)];
    };
    struct Nb {
        int other;  // -1 for the formal vertex x_u
        int t;
        int face, face_star;
        double out;  // F_hat(u, y)
    };
    struct Piece {
        int edge;
        double value;  // stored orientation
        bool internal;
    };
    std::vector<std::vector<Piece>> pieces(gn.n);
    std::vector<char> zero_cell(gn.n, 0);
    for_each_index(gn.n, exec, [&](int u) {
        std::vector<Nb> nbs;
        for (int i = gn.offs[u]; i < gn.offs[u + 1]; ++i) {
            const int k = gn.adj_edge[i], t = gn.etype[k];
            const Star o = gn.edges[k][0] == u ? +1 : -1;
            nbs.push_back({gn.adj[i], t, face_of(ft, t, o), face_of(ft, t, -o), o > 0 ? fn.values[k] : -fn.values[k]});
        }
        if (role[u]) {
            const auto [t, o] = typing.of_word.at(u);
            nbs.push_back({-1, t, face_of(ft, t, o), face_of(ft, t, -o), -div_n[u]});
        }
        double J = 0;
        for (const auto& y : nbs)
            if (y.out > 0) J += y.out;
        if (!(J > 0)) {
            zero_cell[u] = 1;
            return;
        }
        std::vector<double> inner(tm.base_edges, 0.0);
        std::vector<std::vector<double>> cross(nbs.size());
        for (size_t i = 0; i < nbs.size(); ++i) cross[i].assign(tm.face_words[nbs[i].face].size(), 0.0);
        for (size_t iy = 0; iy < nbs.size(); ++iy) {
            const Nb& y = nbs[iy];
            if (y.out > 0) continue;
            for (size_t iz = 0; iz < nbs.size(); ++iz) {
                const Nb& z = nbs[iz];
                if (!(z.out > 0)) continue;
                const double c = z.out / J * (-y.out);
                if (c == 0) continue;
                const auto& wy = tm.face_words[y.face];
                const auto& wz = tm.face_words[z.face];
                if (y.face != z.face) {
                    const Flow& f = basis.at(y.face, z.face);
                    for (int k = 0; k < tm.base_edges; ++k) inner[k] += c * f.values[k];
                    for (size_t j = 0; j < wy.size(); ++j) cross[iy][j] += c * att_out(f, y.face, wy[j]);
                    for (size_t j = 0; j < wz.size(); ++j) cross[iz][j] += c * att_out(f, z.face, wz[j]);
                } else {
                    const Flow& fy = basis.at(y.face, y.face_star);
                    const Flow& fz = basis.at(z.face_star, z.face);
                    for (size_t j = 0; j < wy.size(); ++j) cross[iy][j] += c * att_out(fy, y.face, wy[j]);
                    for (size_t j = 0; j < wz.size(); ++j) cross[iz][j] += c * att_out(fz, z.face, wz[j]);
                }
            }
        }
        auto& out = pieces[u];
        const int base = u * Wm;
        for (int k = 0; k < tm.base_edges; ++k) {
            const int a = base + tm.base.edges[k][0], b = base + tm.base.edges[k][1];
            const int k2 = gnm.find_edge(a, b);
            if (k2 < 0) throw Error(ErrorCode::VerificationFailure, "cell edge missing at level n+m");
            out.push_back({k2, gnm.edges[k2][0] == a ? inner[k] : -inner[k], true});
        }
        for (size_t i = 0; i < nbs.size(); ++i) {
            if (nbs[i].other < 0) continue;
            const auto& w = tm.face_words[nbs[i].face];
            for (size_t j = 0; j < w.size(); ++j) {
                const int a = base + w[j], b = nbs[i].other * Wm + eta[nbs[i].t][w[j]];
                const int k2 = gnm.find_edge(a, b);
                if (k2 < 0) throw Error(ErrorCode::VerificationFailure, "connecting edge missing at level n+m");
                out.push_back({k2, gnm.edges[k2][0] == a ? cross[i][j] : -cross[i][j], false});
            }
        }
    });
    ReplacementFlow r;
    std::vector<double> tail(gnm.num_edges(), 0.0), head(gnm.num_edges(), 0.0);
    std::vector<char> is_cross(gnm.num_edges(), 0);
    for (int u = 0; u < gn.n; ++u) {
        r.zero_cells += zero_cell[u];
        for (const auto& pc : pieces[u]) {
            if (pc.internal) {
                tail[pc.edge] = pc.value;
                continue;
            }
            is_cross[pc.edge] = 1;
            (gnm.edges[pc.edge][0] / Wm == u ? tail : head)[pc.edge] = pc.value;
        }
    }
    for (int k = 0; k < gnm.num_edges(); ++k) {
        if (!is_cross[k]) continue;
        // cells that never emitted (J = 0) contribute zero on their side
        const int cu = gnm.edges[k][0] / Wm, cv = gnm.edges[k][1] / Wm;
        if (zero_cell[cu]) tail[k] = 0.0;
        if (zero_cell[cv]) head[k] = 0.0;
        r.well_defined_residual = std::max(r.well_defined_residual, std::abs(tail[k] - head[k]));
    }
    r.flow.values = tail;
    for (int u = 0; u < gn.n; ++u) {
        if (!role[u]) continue;
        const auto [t, o] = typing.of_word.at(u);
        for (int v : tm.face_words[face_of(ft, t, o)]) (role[u] == 1 ? r.flow.A : r.flow.B).push_back(u * Wm + v);
    }
    std::sort(r.flow.A.begin(), r.flow.A.end());
    std::sort(r.flow.B.begin(), r.flow.B.end());
    const FlowCheck c = verify_flow(gnm, r.flow, q);
    r.max_interior_div = c.max_interior_div;
    r.unit_residual = c.unit_residual;
    r.max_abs = c.max_abs;
    r.energy = c.energy;
    const auto d = divergence(gnm, r.flow);
    for (int u = 0; u < gn.n; ++u) {
        if (!role[u]) continue;
        const auto [t, o] = typing.of_word.at(u);
        const int L = face_of(ft, t, o), Ls = face_of(ft, t, -o);
        const Flow& f = basis.at(L, Ls);
        for (int v : tm.face_words[L]) {
            const double expect = div_n[u] * f.values[tm.attachment_edge(L, v)];
            r.boundary_law_residual = std::max(r.boundary_law_residual, std::abs(d[u * Wm + v] - expect));
        }
    }
    r.basis_energy = basis.energy;
    r.base_energy = flow_energy(fn, q);
    const double denom = r.basis_energy * r.base_energy;
    r.realized_c = denom > 0 ? r.energy / denom : 0.0;
    const double cdeg = std::max(validate_structure(spec).c_deg, gn.max_degree());
    r.bound_c = 3.0 * std::pow(cdeg, 1.0 / (p - 1.0)) * std::pow(cdeg + 1.0, 1.0 / (p - 1.0));
    return r;
}

// ---------------------------------------------------------------- export

std::string basis_to_csv(const IgsSpec& spec, const TildeGraph& tg, const FlowBasis& basis) {
    auto label = [&](int v) {
        if (v < tg.base_n) return spec.word_label(decode_word(v, tg.S, tg.level));
        const int i = v - tg.base_n;
        return spec.word_label(decode_word(tg.att_word[i], tg.S, tg.level)) + "@" +
               face_label(spec, tg.faces, tg.att_face[i]);
    };
    std::ostringstream os;
    os.precision(17);
    os << "from_face,to_face,tail,head,value\n";
    for (const auto& [key, f] : basis.flows) {
        const std::string a = face_label(spec, tg.faces, key.first), b = face_label(spec, tg.faces, key.second);
        for (int k = 0; k < tg.graph.num_edges(); ++k) {
            if (f.values[k] == 0.0) continue;
            os << a << ',' << b << ',' << label(tg.graph.edges[k][0]) << ',' << label(tg.graph.edges[k][1]) << ','
               << f.values[k] << '\n';
        }
    }
    return os.str();
}

}  // namespace igs
