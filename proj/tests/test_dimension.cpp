#include <cmath>

#include "doctest.h"
#include "igs/dimension.hpp"
#include "json.hpp"

using namespace igs;

TEST_CASE("interval sequences are exact powers") {
    const IgsSpec I = builtin_system("interval", {3});
    for (double p : {1.5, 2.0, 3.0}) {
        CAPTURE(p);
        const ModulusSequence seq = modulus_sequence(I, p, {1, 2, 3, 4});
        // the uniform density 3^{-m} is optimal on a path of 3^m vertices
        for (int m = 1; m <= 4; ++m) CHECK(seq.at(m) == doctest::Approx(std::pow(3.0, m * (1 - p))).epsilon(1e-6));
        const GrowthRate g = growth_rate(seq);
        CHECK(g.estimate == doctest::Approx(std::pow(3.0, 1 - p)).epsilon(1e-6));
        CHECK(g.width <= 1e-6);
        // diffusion on a path: walk dimension equals p
        const WalkDimension w = walk_dimension(I, g, p);
        CHECK(w.d_w == doctest::Approx(p).epsilon(1e-6));
    }
    CHECK_THROWS_AS(growth_rate(modulus_sequence(I, 2.0, {1, 2})), Error);
}

TEST_CASE("carpet level one and sequence bounds") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    for (double p : {1.5, 2.0, 3.0}) {
        CAPTURE(p);
        const ModulusSequence seq = modulus_sequence(c, p, {1, 2, 3});
        // each face pair is blocked by two disjoint three-vertex paths, so the
        // symmetrized density is 1/3 on all eight squares
        CHECK(seq.at(1) == doctest::Approx(8.0 * std::pow(3.0, -p)).epsilon(1e-6));
        for (int m = 1; m <= 3; ++m) {
            const auto& d = seq.diagnostics[m - 1];
            CHECK(d.converged);
            CHECK(d.kkt_residual <= 1e-8);
            CHECK(d.invariance_defect <= 1e-9);
            // the symmetrized density is admissible for every pair
            CHECK(seq.at(m) >= d.max_pair_modulus * (1 - 1e-9));
        }
    }
    const GrowthRate g = growth_rate(modulus_sequence(c, 2.0, {1, 2, 3}));
    CHECK(g.ratios.size() == 2);
    for (double r : g.ratios) {
        CHECK(r > 0.5);
        CHECK(r < 1.0);
    }
}

TEST_CASE("face modulus decreases in p") {
    for (const char* name : {"sierpinski-carpet", "pentagon", "gasket"}) {
        CAPTURE(std::string(name));
        const IgsSpec s = builtin_system(name);
        const ReplacementGraph g = build_graph(s, 2);
        const auto A = boundary_set(s, 2, 0, -1), B = boundary_set(s, 2, 0, +1);
        double prev = HUGE_VAL;
        for (double p : {1.0, 1.25, 1.5, 2.0, 3.0, 4.0}) {
            const double v = solve_modulus(g, A, B, p).value;
            CHECK(v <= prev * (1 + 1e-8));
            prev = v;
        }
    }
}

TEST_CASE("multiplicativity on the carpet") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    const MultiplicativityReport r = multiplicativity_report(c, 2.0, {{1, 1}, {1, 2}, {2, 1}});
    REQUIRE(r.pairs.size() == 3);
    for (const auto& pr : r.pairs) {
        CHECK(pr.ratio >= r.c_super);
        CHECK(pr.ratio <= r.c_sub);
        CHECK(pr.flow_consistent);
        CHECK(pr.flow_lower_bound <= pr.face_modulus * (1 + 1e-9));
        CHECK(pr.realized_c > 0);
    }
    // the ratio only depends on n + m through the sequence, so (1,2) and (2,1) agree
    CHECK(r.pairs[1].ratio == doctest::Approx(r.pairs[2].ratio).epsilon(1e-12));
    CHECK(r.c_super > 0);
}

TEST_CASE("conformal dimension brackets") {
    SUBCASE("interval and gasket have local cut points") {
        for (const char* name : {"interval", "gasket"}) {
            CAPTURE(std::string(name));
            const IgsSpec s = name == std::string("interval") ? builtin_system("interval", {3}) : builtin_system(name);
            DimensionOptions o;
            o.m_cap = 3;
            o.probe_levels = 3;
            const DimensionReport d = conformal_dimension(s, o);
            CHECK(d.p_lo == 1.0);
            CHECK(d.p_hi == 1.0);
            CHECK(d.local_cut_points);
            for (int k : d.disjoint_paths) CHECK(k == 1);
        }
    }
    SUBCASE("carpet bracket lies between the classical bounds") {
        DimensionOptions o;
        o.m_cap = 3;
        o.tol = 0.02;
        const IgsSpec c = builtin_system("sierpinski-carpet");
        const DimensionReport d = conformal_dimension(c, o);
        CHECK(d.p_hi - d.p_lo <= o.tol);
        CHECK(d.p_lo >= 1.0 + std::log(2.0) / std::log(3.0));
        CHECK(d.p_hi <= std::log(8.0) / std::log(3.0));
        CHECK_FALSE(d.local_cut_points);
        CHECK_FALSE(d.budget_exceeded);
        // the top-level ratio falls as p grows
        std::vector<std::pair<double, double>> pr;
        for (const auto& e : d.evaluations) pr.push_back({e.p, e.rate.last_ratio});
        std::sort(pr.begin(), pr.end());
        for (size_t i = 1; i < pr.size(); ++i) CHECK(pr[i].second <= pr[i - 1].second * (1 + 1e-9));

        const auto j = nlohmann::json::parse(dimension_to_json(c, d));
        CHECK(j.contains("bracket"));
        CHECK(j.contains("evaluations"));
        CHECK(j["m_cap"] == 3);
    }
    SUBCASE("invalid options") {
        DimensionOptions o;
        o.m_cap = 2;
        CHECK_THROWS_AS(conformal_dimension(builtin_system("gasket"), o), Error);
    }
}

TEST_CASE("gasket p = 1 sequence stays bounded") {
    const ModulusSequence seq = modulus_sequence(builtin_system("gasket"), 1.0, {1, 2, 3, 4});
    for (int m = 1; m <= 4; ++m) CHECK(seq.at(m) <= seq.at(1) * (1 + 1e-9));
}

TEST_CASE("CLP probe") {
    const IgsSpec c = builtin_system("sierpinski-carpet");
    // radius beyond the diameter of G_1 is skipped
    const ClpProbe far = clp_probe(c, 2.0, 1, 1, 50);
    CHECK(far.skipped);
    const ClpProbe pr = clp_probe(c, 2.0, 2, 1, 1, 3);
    CHECK_FALSE(pr.skipped);
    CHECK(pr.reference == doctest::Approx(8.0 / 9.0).epsilon(1e-6));
    for (const auto& t : pr.tubes) {
        CHECK(t.modulus > 0);
        CHECK(t.lower_bound == doctest::Approx(std::pow(t.distance, -1.0) * pr.reference).epsilon(1e-12));
    }
}
