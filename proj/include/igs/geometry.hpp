#pragma once

// Finite-depth probes of the geometric assumptions: bounded geometry,
// neighborhoods N(w), diameter growth, face separation and central words.

#include <string>
#include <vector>

#include "igs/core.hpp"
#include "igs/graph.hpp"

namespace igs {

struct BoundedGeometryProbe {
    std::vector<int> max_nc_vertices;  // index m-1: longest non-collapsing simple path (vertices)
    int m_star_estimate = 0;
    bool stabilized = false;
    int stabilization_level = 0;
    int level_reached = 0;
};

BoundedGeometryProbe bounded_geometry_probe(const IgsSpec& spec, int m_max, long long path_budget = 50000000);

struct NeighborEntry {
    int v = 0;             // vertex id at level m
    int distance = 0;      // stable hop distance between the lifted cells
    std::vector<int> witness;  // path at level m+k (vertex ids)
    bool non_collapsing = false;
};

struct Neighborhood {
    int w = 0;
    int level = 0;
    int depth = 0;
    int radius = 0;
    std::vector<NeighborEntry> members;  // sorted by v, includes w
    bool certified = false;

    std::vector<int> ids() const;
};

// N(w) from lifted cell distances: v is kept when the distance between
// w.W_j and v.W_j is equal at j = k-1 and j = k. Certified when the sets at
// depths k-1 and k agree.
Neighborhood neighborhood(const IgsSpec& spec, const Word& w, int depth = 4, int radius = 4);
// Neighborhoods of every word of level m, computed over shared lifted graphs.
std::vector<Neighborhood> all_neighborhoods(const IgsSpec& spec, int m, int depth = 4, int radius = 4,
                                            Exec exec = {});

struct IncidenceGraph {
    Graph graph;
    bool certified = false;
    int depth = 0;
};

IncidenceGraph incidence_graph(const IgsSpec& spec, int m, int depth = 4, Exec exec = {});

struct DiameterResult {
    int diameter = 0;
    bool exact = true;
    int bfs_runs = 0;
};

// Exact diameter by iFUB with a BFS budget; falls back to the best lower
// bound (flagged inexact) when the budget runs out.
DiameterResult graph_diameter(const Graph& g, Exec exec = {}, int bfs_budget = 4000);
// Reference: eccentricity of every vertex.
int diameter_all_sources(const Graph& g, Exec exec = {});

struct DiameterGrowth {
    std::vector<int> levels;
    std::vector<int> diam;
    std::vector<bool> exact;
    double fitted_l_star = 0;
    double l_star = 0;
    bool l_star_declared = false;
    double c_diam = 0;
};

DiameterGrowth diameter_growth(const IgsSpec& spec, int m_max, Exec exec = {},
                               std::int64_t exact_limit = 1000000);

struct FaceSeparation {
    std::vector<std::pair<int, int>> pairs;   // distinct-face index pairs
    std::vector<std::vector<int>> distance;   // [pair][m-1]
    std::vector<int> min_distance;            // per level
    double c1 = 0;
    double l_star = 0;
};

FaceSeparation face_separation(const IgsSpec& spec, int m_max, double l_star = 0);

struct CentralWord {
    Word word;
    int level = 0;
    int boundary_distance = 0;
    bool fast_path = false;
};

CentralWord central_word(const IgsSpec& spec, int m_star, int max_level = 8);

struct GeometryReport {
    BoundedGeometryProbe probe;
    DiameterGrowth diam;
    FaceSeparation faces;
    CentralWord central;
    double l_star = 0;
    double d_f = 0;
    int m_star = 0;
    bool central_found = false;
};

GeometryReport geometry_report(const IgsSpec& spec, int m_max, Exec exec = {});

}  // namespace igs
