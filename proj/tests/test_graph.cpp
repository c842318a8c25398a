#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "igs/core.hpp"
#include "igs/graph.hpp"

using namespace igs;

namespace {

// Edge test read off the definition: the words agree before position k, the
// symbols at k form a level-1 edge of type t, and every later position is a
// gluing pair of type t in the same orientation.
bool oracle_edge(const IgsSpec& s, const Word& w, const Word& v) {
    size_t k = 0;
    while (k < w.size() && w[k] == v[k]) ++k;
    if (k == w.size()) return false;
    for (const auto& e : s.edges) {
        const bool fwd = e.from == w[k] && e.to == v[k];
        const bool bwd = e.from == v[k] && e.to == w[k];
        if (!fwd && !bwd) continue;
        bool ok = true;
        for (size_t j = k + 1; j < w.size() && ok; ++j)
            ok = fwd ? s.glued(e.type, w[j], v[j]) : s.glued(e.type, v[j], w[j]);
        if (ok) return true;
    }
    return false;
}

std::set<std::pair<int, int>> oracle_edges(const IgsSpec& s, int m) {
    const int n = static_cast<int>(ipow(s.num_symbols(), m));
    std::set<std::pair<int, int>> out;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (oracle_edge(s, decode_word(a, s.num_symbols(), m), decode_word(b, s.num_symbols(), m)))
                out.insert({a, b});
    return out;
}

std::set<std::pair<int, int>> graph_edges(const Graph& g) {
    std::set<std::pair<int, int>> out;
    for (const auto& e : g.edges) out.insert({std::min(e[0], e[1]), std::max(e[0], e[1])});
    return out;
}

Word W(const IgsSpec& s, const std::string& t) { return s.parse_word(t); }

int count_lines(const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line))
        if (line.find(needle) != std::string::npos) ++n;
    return n;
}

}  // namespace

TEST_CASE("word algebra") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    CHECK(word_meet({0, 1, 2}, {0, 1, 5}) == 3);
    CHECK(word_meet({0, 0, 0}, {1, 0, 0}) == 1);
    CHECK(word_meet(W(c, "07"), W(c, "20")) == 1);
    for (int id = 0; id < 512; ++id) CHECK(encode_word(decode_word(id, 8, 3), 8) == id);
    CHECK(prefix_id(encode_word({3, 4, 5}, 8), 8, 3, 1) == 3);
    CHECK(suffix_id(encode_word({3, 4, 5}, 8), 8, 2) == encode_word({4, 5}, 8));
}

TEST_CASE("edge queries on the carpet") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    auto e = edge_query(c, W(c, "12"), W(c, "20"));
    REQUIRE(e.has_value());
    CHECK(e->first == 0);
    CHECK(e->second == +1);
    e = edge_query(c, W(c, "00"), W(c, "01"));
    REQUIRE(e.has_value());
    CHECK(e->first == 0);
    CHECK(e->second == +1);
    CHECK_FALSE(edge_query(c, W(c, "05"), W(c, "13")).has_value());
}

TEST_CASE("replacement graphs match the edge characterization") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    const ReplacementGraph g1 = build_graph(c, 1);
    CHECK(g1.n == 8);
    CHECK(g1.num_edges() == 8);
    const ReplacementGraph g2 = build_graph(c, 2);
    CHECK(g2.n == 64);
    CHECK(g2.num_edges() == 88);
    CHECK(graph_edges(g2) == oracle_edges(c, 2));
    for (const char* name : {"gasket", "pentagon", "pillow"}) {
        const IgsSpec s = builtin_system(name);
        CHECK(graph_edges(build_graph(s, 2)) == oracle_edges(s, 2));
    }
    const IgsSpec g = builtin_system("gasket");
    CHECK(graph_edges(build_graph(g, 3)) == oracle_edges(g, 3));

    // every stored edge records its meet level and type consistently
    for (int k = 0; k < g2.num_edges(); ++k) {
        const Word a = decode_word(g2.edges[k][0], 8, 2), b = decode_word(g2.edges[k][1], 8, 2);
        CHECK(g2.meet[k] == word_meet(a, b));
        const auto q = edge_query(c, a, b);
        REQUIRE(q.has_value());
        CHECK(q->first == g2.etype[k]);
        CHECK(q->second == +1);
    }

    const ReplacementGraph path = build_graph(builtin_system("interval", {3}), 2);
    CHECK(path.n == 9);
    CHECK(path.num_edges() == 8);
    CHECK(path.max_degree() == 2);
}

TEST_CASE("vertex budget") {
    BuildOptions o;
    o.max_vertices = 1000;
    CHECK_THROWS_AS(build_graph(builtin_system("menger-sponge"), 3, o), Error);
}

TEST_CASE("boundary sets") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    const auto left = boundary_set(c, 2, 0, -1);
    CHECK(left.size() == 9);
    for (int v : left)
        for (int x : decode_word(v, 8, 2)) CHECK((x == 0 || x == 3 || x == 5));
    const IgsSpec g = builtin_system("gasket");
    CHECK(boundary_set(g, 3, 0, +1) == std::vector<int>{encode_word({1, 1, 1}, 3)});
    CHECK(boundary_set(builtin_system("pentagon"), 1, 0, +1) == std::vector<int>{1, 2});
}

TEST_CASE("distances") {
    const IgsSpec I = builtin_system("interval", {3});
    const ReplacementGraph p = build_graph(I, 2);
    const DistanceResult d = graph_distance(p, {0}, {8});
    CHECK(d.distance == 8);
    CHECK(d.path.size() == 9);
    const std::vector<double> w(9, 1.0 / 9.0);
    CHECK(graph_distance(p, {0}, {8}, &w).distance == doctest::Approx(1.0).epsilon(1e-12));

    const IgsSpec c = builtin_system("sierpinski-carpet");
    const ReplacementGraph g2 = build_graph(c, 2);
    const DistanceResult f = graph_distance(g2, boundary_set(c, 2, 0, -1), boundary_set(c, 2, 0, +1));
    CHECK(f.distance == 8);
    // the witness is a path of consecutive edges
    for (size_t i = 0; i + 1 < f.path.size(); ++i) CHECK(g2.find_edge(f.path[i], f.path[i + 1]) >= 0);

    // zero weights must not produce predecessor cycles
    std::vector<double> z(g2.n, 0.0);
    z[5] = 1.0;
    const DistanceResult zz = graph_distance(g2, {0}, {63}, &z);
    CHECK(zz.path.front() == 0);
    CHECK(zz.path.back() == 63);
    CHECK(zz.distance == 0.0);
}

TEST_CASE("lifted symmetries") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    const Symmetries sym = find_symmetries(c);
    const LiftedMap eh = lift_map(sym.flip(0), 8, 2);
    CHECK(eh(encode_word({0, 0}, 8)) == encode_word({2, 2}, 8));
    const LiftedMap id = lift_perm({0, 1, 2, 3, 4, 5, 6, 7}, 8, 3);
    for (int v = 0; v < 512; ++v) CHECK(id(v) == v);

    // every automorphism lifts to a graph automorphism of G_2
    const ReplacementGraph g2 = build_graph(c, 2);
    const auto E = graph_edges(g2);
    for (const auto& a : sym.automorphisms) {
        const LiftedMap L = lift_map(a, 8, 2);
        std::set<std::pair<int, int>> img;
        for (auto [x, y] : E) img.insert({std::min(L(x), L(y)), std::max(L(x), L(y))});
        CHECK(img == E);
    }

    // lifted reflection partition: C-D edges join x to its image
    const IgsSpec pe = builtin_system("pentagon");
    const ReplacementGraph gp = build_graph(pe, 3);
    for (int i = 0; i < 5; ++i) {
        const LiftedMap L = lift_map(pentagon_reflection(pe, i), 5, 3);
        for (const auto& e : gp.edges) {
            const Side a = L.classify(e[0]), b = L.classify(e[1]);
            if ((a == Side::C && b == Side::D) || (a == Side::D && b == Side::C)) CHECK(L(e[0]) == e[1]);
        }
    }
}

TEST_CASE("foldings") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    const Symmetries sym = find_symmetries(c);
    // G_2 folded onto the cell 4.W_1
    const auto table = fold_onto_cell(c, sym, {4}, 1);
    for (int x = 0; x < 8; ++x) CHECK(table[encode_word({4, x}, 8)] == encode_word({4, x}, 8));
    const ReplacementGraph g2 = build_graph(c, 2);
    for (const auto& e : g2.edges) {
        const int a = table[e[0]], b = table[e[1]];
        CHECK((a == b || g2.find_edge(a, b) >= 0));
    }
    // a path inside one cell folds to its suffix projection
    const std::vector<int> inside = {encode_word({3, 0}, 8), encode_word({3, 1}, 8), encode_word({3, 2}, 8)};
    CHECK(fold_path(c, sym, inside, 1, 1) == std::vector<int>{0, 1, 2});
    // crossing the h-gluing from 02 to 10 folds to the single vertex 2
    CHECK(fold_path(c, sym, {encode_word({0, 2}, 8), encode_word({1, 0}, 8)}, 1, 1) == std::vector<int>{2});
}

TEST_CASE("cubical coordinates") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    CHECK(cubical_coordinates(c, W(c, "00")).x == std::vector<long long>{0, 0});
    CHECK(cubical_coordinates(c, W(c, "77")).x == std::vector<long long>{8, 8});
    const IgsSpec ms = builtin_system("menger-sponge");
    CHECK(cubical_coordinates(ms, {19}).x == std::vector<long long>{2, 2, 2});
    // coordinates turn G_m edges into unit steps
    const ReplacementGraph g2 = build_graph(c, 2);
    for (const auto& e : g2.edges) {
        const auto a = cubical_coordinates(c, decode_word(e[0], 8, 2)).x;
        const auto b = cubical_coordinates(c, decode_word(e[1], 8, 2)).x;
        CHECK(std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) == 1);
    }
}

TEST_CASE("exports") {
    const IgsSpec ms = builtin_system("menger-sponge");
    const ReplacementGraph g = build_graph(ms, 2);
    const std::string dot = export_dot(ms, g);
    CHECK(count_lines(dot, "->") == g.num_edges());
    CHECK(count_lines(dot, "\";") == 400);

    const IgsSpec pi = builtin_system("pillow");
    const ReplacementGraph gp = build_graph(pi, 2);
    const std::string csv = export_edge_csv(pi, gp);
    std::set<std::string> verts;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "w,v,type,orientation,meet");
    while (std::getline(in, line)) {
        std::istringstream f(line);
        std::string a, b;
        std::getline(f, a, ',');
        std::getline(f, b, ',');
        verts.insert(a);
        verts.insert(b);
    }
    CHECK(verts.size() == 100);
    CHECK(count_lines(export_cubical_csv(pi, gp), ",") == 101);
    CHECK(export_json_adjacency(pi, gp).find("\"adjacency\"") != std::string::npos);
}
