#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "igs/geometry.hpp"

using namespace igs;

namespace {

std::set<std::pair<int, int>> edge_set(const Graph& g) {
    std::set<std::pair<int, int>> out;
    for (const auto& e : g.edges) out.insert({std::min(e[0], e[1]), std::max(e[0], e[1])});
    return out;
}

}  // namespace

TEST_CASE("bounded geometry probe") {
    for (const char* name : {"interval", "gasket"}) {
        const auto r = bounded_geometry_probe(builtin_system(name), 5);
        CHECK(r.stabilized);
        for (int v : r.max_nc_vertices) CHECK(v <= 2);
        CHECK(r.m_star_estimate <= 2);
    }
    const auto p = bounded_geometry_probe(builtin_system("pentagon"), 5);
    CHECK(p.stabilized);
    CHECK(p.m_star_estimate <= 4);
}

TEST_CASE("neighborhoods") {
    const IgsSpec I = builtin_system("interval", {3});
    const Neighborhood n0 = neighborhood(I, {0});
    CHECK(n0.ids() == std::vector<int>{0, 1});
    CHECK(n0.certified);

    // every graph neighbor of w belongs to N(w)
    const IgsSpec c = builtin_system("sierpinski-carpet");
    const ReplacementGraph g1 = build_graph(c, 1);
    for (int w = 0; w < 8; ++w) {
        const auto ids = neighborhood(c, {w}).ids();
        for (int i = g1.offs[w]; i < g1.offs[w + 1]; ++i)
            CHECK(std::binary_search(ids.begin(), ids.end(), g1.adj[i]));
    }
}

TEST_CASE("incidence graphs") {
    const IgsSpec I = builtin_system("interval", {3});
    CHECK(edge_set(incidence_graph(I, 2).graph) == edge_set(build_graph(I, 2)));
    const IgsSpec g = builtin_system("gasket");
    CHECK(edge_set(incidence_graph(g, 2).graph) == edge_set(build_graph(g, 2)));
    const IgsSpec c = builtin_system("sierpinski-carpet");
    const auto inc = edge_set(incidence_graph(c, 1).graph);
    CHECK(inc.count({1, 3}) == 1);
    CHECK(inc.count({1, 4}) == 1);
    for (const auto& e : edge_set(build_graph(c, 1))) CHECK(inc.count(e) == 1);
}

TEST_CASE("diameters") {
    const DiameterGrowth I = diameter_growth(builtin_system("interval", {3}), 5);
    for (size_t i = 0; i < I.levels.size(); ++i)
        CHECK(I.diam[i] == static_cast<int>(std::pow(3, I.levels[i])) - 1);
    CHECK(I.fitted_l_star == doctest::Approx(3.0).epsilon(0.02));

    const DiameterGrowth c = diameter_growth(builtin_system("sierpinski-carpet"), 4);
    CHECK(c.fitted_l_star >= 2.9);
    CHECK(c.fitted_l_star <= 3.1);
    CHECK(c.l_star == 3.0);

    // iFUB agrees with all-sources eccentricities
    for (const char* name : {"sierpinski-carpet", "gasket", "pentagon", "pillow"}) {
        const ReplacementGraph g = build_graph(builtin_system(name), 2);
        const DiameterResult d = graph_diameter(g);
        CHECK(d.exact);
        CHECK(d.diameter == diameter_all_sources(g));
    }
}

TEST_CASE("gasket corner distance") {
    const IgsSpec g = builtin_system("gasket");
    for (int m = 1; m <= 6; ++m) {
        const ReplacementGraph G = build_graph(g, m);
        const int zeros = 0, ones = encode_word(Word(m, 1), 3);
        CHECK(graph_distance(G, {zeros}, {ones}).distance == (1 << m) - 1);
    }
}

TEST_CASE("face separation") {
    const FaceSeparation c = face_separation(builtin_system("sierpinski-carpet"), 4);
    for (int m = 1; m <= 4; ++m) CHECK(c.min_distance[m - 1] >= 0.5 * std::pow(3, m));
    const FaceSeparation I = face_separation(builtin_system("interval", {3}), 3);
    CHECK(I.min_distance[2] == 26);
    const FaceSeparation p = face_separation(builtin_system("pentagon"), 2);
    CHECK(p.min_distance[1] >= 2);
}

TEST_CASE("central words") {
    const IgsSpec I = builtin_system("interval", {3});
    const CentralWord ci = central_word(I, 0);  // radius-0 ball: any non-boundary word
    CHECK(ci.level == 1);
    CHECK(ci.word == Word{1});
    CHECK(ci.boundary_distance == 1);

    for (const char* name : {"sierpinski-carpet", "pentagon"}) {
        const IgsSpec s = builtin_system(name);
        const int m_star = bounded_geometry_probe(s, 5).m_star_estimate;
        const CentralWord cw = central_word(s, m_star);
        // independent check: BFS from the word to the union of faces
        const ReplacementGraph g = build_graph(s, cw.level);
        const auto dist = bfs_distances(g, {encode_word(cw.word, s.num_symbols())});
        int to_boundary = g.n;
        for (int v : boundary_union(s, cw.level)) to_boundary = std::min(to_boundary, dist[v]);
        CHECK(to_boundary == cw.boundary_distance);
        CHECK(to_boundary > m_star);
    }
}

TEST_CASE("geometry report") {
    const GeometryReport r = geometry_report(builtin_system("sierpinski-carpet"), 4);
    CHECK(r.l_star == doctest::Approx(3.0));
    CHECK(r.d_f == doctest::Approx(std::log(8.0) / std::log(3.0)).epsilon(1e-12));
}
