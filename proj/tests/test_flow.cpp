#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "igs/flow.hpp"

using namespace igs;

namespace {

// Net outflow at every vertex, summed directly from the edge list.
std::vector<double> oracle_div(const Graph& g, const Flow& f) {
    std::vector<double> d(g.n, 0.0);
    for (int k = 0; k < g.num_edges(); ++k) {
        d[g.edges[k][0]] += f.values[k];
        d[g.edges[k][1]] -= f.values[k];
    }
    return d;
}

double oracle_energy(const Flow& f, double q) {
    double e = 0;
    for (double v : f.values) e += std::pow(std::abs(v), q);
    return e;
}

// Largest interior divergence and deviation of the outflow of A from one.
double unit_flow_residual(const Graph& g, const Flow& f) {
    const auto d = oracle_div(g, f);
    std::set<int> ends(f.A.begin(), f.A.end());
    ends.insert(f.B.begin(), f.B.end());
    double worst = 0, out = 0;
    for (int v = 0; v < g.n; ++v)
        if (!ends.count(v)) worst = std::max(worst, std::abs(d[v]));
    for (int a : f.A) out += d[a];
    return std::max(worst, std::abs(out - 1.0));
}

}  // namespace

TEST_CASE("tilde graph of the interval") {
    const TildeGraph tg = build_tilde_graph(builtin_system("interval", {3}), 1);
    CHECK(tg.base_n == 3);
    CHECK(tg.num_faces() == 2);
    CHECK(tg.graph.n == 5);
    CHECK(tg.graph.num_edges() == 4);
    const FlowResult f = optimal_type_flow(tg, 0, -1, 2.0);
    CHECK(oracle_energy(f.flow, 2.0) == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(unit_flow_residual(tg.graph, f.flow) <= 1e-10);
}

TEST_CASE("flow extension on a path") {
    const ReplacementGraph path = build_graph(builtin_system("interval", {3}), 2);
    const FlowResult f = solve_flow(path, {0}, {8}, 2.0);
    CHECK(oracle_energy(f.flow, 2.0) == doctest::Approx(8.0).epsilon(1e-10));
    const FlowExtension ex = extend_flow(path, f.flow, 2.0);
    CHECK(ex.graph.n == 11);
    CHECK(ex.energy_before == doctest::Approx(8.0).epsilon(1e-10));
    CHECK(ex.energy_after == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(oracle_energy(ex.flow, 2.0) == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(ex.within_bound);
    // the two new vertices become the endpoints of a unit flow
    CHECK(unit_flow_residual(ex.graph, ex.flow) <= 1e-10);
}

TEST_CASE("flow bases satisfy the basis conditions") {
    struct Case {
        const char* name;
        int m;
        size_t expected;
    };
    for (const Case c : {Case{"interval", 1, 2}, Case{"interval", 2, 2}, Case{"gasket", 1, 6}, Case{"gasket", 2, 6},
                         Case{"sierpinski-carpet", 1, 12}, Case{"sierpinski-carpet", 2, 12},
                         Case{"pentagon", 1, 20}, Case{"pentagon", 2, 20}, Case{"menger-sponge", 1, 30}}) {
        CAPTURE(std::string(c.name));
        CAPTURE(c.m);
        const IgsSpec s = c.name == std::string("interval") ? builtin_system("interval", {3}) : builtin_system(c.name);
        const TildeGraph tg = build_tilde_graph(s, c.m);
        for (double q : {1.5, 2.0, 3.0}) {
            const FlowBasis b = build_flow_basis(s, tg, q);
            CHECK(b.flows.size() == c.expected);
            const BasisVerification v = verify_flow_basis(s, tg, b);
            CHECK(v.ok(1e-8));
            CHECK(v.count == static_cast<int>(c.expected));
            // independent residuals: unit flows between the right attachments,
            // silent on every uninvolved face
            for (const auto& [key, f] : b.flows) {
                CHECK(unit_flow_residual(tg.graph, f) <= 1e-8);
                CHECK(f.A == tg.attachments(key.first));
                CHECK(f.B == tg.attachments(key.second));
                for (int face = 0; face < tg.num_faces(); ++face) {
                    if (face == key.first || face == key.second) continue;
                    for (int w : tg.face_words[face])
                        CHECK(std::abs(f.at(tg.graph, tg.attachment(face, w), w)) <= 1e-8);
                }
                CHECK(oracle_energy(f, q) <= b.energy * (1 + 1e-12));
            }
        }
    }
}

TEST_CASE("symmetric bases have equal energies") {
    // number of face pairs per energy value, rounded to 1e-8 relative
    auto classes = [](const FlowBasis& b) {
        std::map<long long, int> out;
        for (const auto& [key, f] : b.flows) ++out[std::llround(oracle_energy(f, 2.0) / b.energy * 1e8)];
        return out;
    };
    const IgsSpec g = builtin_system("gasket");
    auto cg = classes(build_flow_basis(g, build_tilde_graph(g, 2), 2.0));
    CHECK(cg.size() == 1);
    CHECK(cg.begin()->second == 6);
    // carpet: opposite pairs agree with each other, and so do adjacent pairs
    const IgsSpec c = builtin_system("sierpinski-carpet");
    const TildeGraph tc = build_tilde_graph(c, 2);
    const FlowBasis bc = build_flow_basis(c, tc, 2.0);
    REQUIRE(bc.flows.size() == 12);
    std::vector<int> type_of(tc.num_faces());
    for (int t = 0; t < 2; ++t)
        for (Star st : {-1, +1}) type_of[tc.faces.of_key[face_key(t, st)]] = t;
    std::map<bool, std::vector<double>> by_kind;
    for (const auto& [key, f] : bc.flows)
        by_kind[type_of[key.first] == type_of[key.second]].push_back(oracle_energy(f, 2.0));
    CHECK(by_kind[true].size() == 4);
    CHECK(by_kind[false].size() == 8);
    for (auto& [kind, es] : by_kind)
        for (double e : es) CHECK(e == doctest::Approx(es.front()).epsilon(1e-8));
    // the pentagon splits into neighboring and second-neighboring faces
    const IgsSpec pe = builtin_system("pentagon");
    auto cp = classes(build_flow_basis(pe, build_tilde_graph(pe, 2), 2.0));
    REQUIRE(cp.size() == 2);
    for (auto [e, k] : cp) CHECK(k == 10);
}

TEST_CASE("flips reverse optimal type flows") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    const Symmetries sym = find_symmetries(c);
    const TildeGraph tg = build_tilde_graph(c, 2);
    for (int t = 0; t < 2; ++t) {
        const Flow f = optimal_type_flow(tg, t, -1, 2.0).flow;
        const Flow g = optimal_type_flow(tg, t, +1, 2.0).flow;
        const Flow mapped = map_flow(tg, f, sym.flip(t).perm);
        CHECK(mapped.A == g.A);
        CHECK(mapped.B == g.B);
        for (size_t k = 0; k < f.values.size(); ++k) {
            CHECK(mapped.values[k] == doctest::Approx(g.values[k]).epsilon(1e-8).scale(1.0));
            CHECK(g.values[k] == doctest::Approx(-f.values[k]).epsilon(1e-8).scale(1.0));
        }
    }
}

TEST_CASE("twist hypotheses") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    const TildeGraph tg = build_tilde_graph(c, 1);
    const Symmetries sym = find_symmetries(c);
    const FaceTable& ft = tg.faces;
    const int hm = ft.of_key[face_key(0, -1)], hp = ft.of_key[face_key(0, +1)];
    const Flow f = optimal_boundary_flow(tg, hm, hp, 2.0).flow;
    // the identity is not a reflection
    SymbolMap id;
    for (const auto& a : sym.automorphisms)
        if (a.perm == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}) id = a;
    REQUIRE(id.perm.size() == 8);
    try {
        twist_flow(tg, f, hm, hp, id, 2.0);
        FAIL("identity accepted as a twist");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::HypothesisViolation);
    }
    // diagonal reflections turn the h flow into unit flows to a v face
    int twists = 0;
    for (char kind : {'+', '-'}) {
        const TwistResult tr = twist_flow(tg, f, hm, hp, cubical_map(c, kind, 0, 1), 2.0);
        ++twists;
        CHECK(tr.flow.A == tg.attachments(hm));
        CHECK((tr.to_face == ft.of_key[face_key(1, -1)] || tr.to_face == ft.of_key[face_key(1, +1)]));
        CHECK(unit_flow_residual(tg.graph, tr.flow) <= 1e-10);
    }
    CHECK(twists == 2);
    // the same reflection cannot twist a flow between faces it swaps
    const int vm = ft.of_key[face_key(1, -1)];
    const Flow fv = optimal_boundary_flow(tg, hm, vm, 2.0).flow;
    try {
        twist_flow(tg, fv, hm, vm, cubical_map(c, '+', 0, 1), 2.0);
        FAIL("overlapping faces accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::HypothesisViolation);
    }
}

TEST_CASE("replacement flows") {
    struct Case {
        const char* name;
        int n, m;
    };
    for (const Case c : {Case{"interval", 1, 1}, Case{"interval", 2, 1}, Case{"sierpinski-carpet", 1, 1},
                         Case{"sierpinski-carpet", 2, 1}, Case{"menger-sponge", 1, 1}}) {
        CAPTURE(std::string(c.name));
        CAPTURE(c.n);
        const IgsSpec s = c.name == std::string("interval") ? builtin_system("interval", {3}) : builtin_system(c.name);
        const ReplacementGraph gn = build_graph(s, c.n), gnm = build_graph(s, c.n + c.m);
        const auto A = boundary_set(s, c.n, 0, -1), B = boundary_set(s, c.n, 0, +1);
        const Flow fn = solve_flow(gn, A, B, 2.0).flow;
        const TildeGraph tm = build_tilde_graph(s, c.m);
        const FlowBasis basis = build_flow_basis(s, tm, 2.0);
        const ReplacementFlow rf = replacement_flow(s, gn, fn, basis, tm,
                                                    face_typing(s, c.n, face_key(0, -1), face_key(0, +1)), gnm);
        CHECK(rf.well_defined_residual <= 1e-8);
        CHECK(rf.boundary_law_residual <= 1e-8);
        // an A_{n+m} to B_{n+m} unit flow, checked from the edge list
        CHECK(rf.flow.A == boundary_set(s, c.n + c.m, 0, -1));
        CHECK(rf.flow.B == boundary_set(s, c.n + c.m, 0, +1));
        CHECK(unit_flow_residual(gnm, rf.flow) <= 1e-8);
        CHECK(oracle_energy(rf.flow, 2.0) == doctest::Approx(rf.energy).epsilon(1e-10));
        CHECK(rf.realized_c <= rf.bound_c);
        if (c.name == std::string("interval") && c.n == 1) {
            CHECK(rf.energy == doctest::Approx(8.0).epsilon(1e-10));
            CHECK(rf.realized_c == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}
