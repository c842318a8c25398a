#pragma once

// Replacement graphs G_m on words W_m, word algebra, distances, lifted maps
// and foldings.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "igs/core.hpp"

namespace igs {

using Word = std::vector<int>;

// Undirected simple graph with a stored orientation per edge (a -> b).
struct Graph {
    int n = 0;
    std::vector<std::array<int, 2>> edges;
    std::vector<int> offs;      // CSR offsets, size n+1
    std::vector<int> adj;       // neighbor ids
    std::vector<int> adj_edge;  // edge index per adjacency slot

    void finalize();
    int degree(int v) const { return offs[v + 1] - offs[v]; }
    int max_degree() const;
    int num_edges() const { return static_cast<int>(edges.size()); }
    // Edge index joining a and b, or -1.
    int find_edge(int a, int b) const;
};

struct ReplacementGraph : Graph {
    int level = 0;
    int S = 0;
    std::vector<std::uint8_t> etype;  // type per edge
    std::vector<std::uint8_t> meet;   // |w ^ v| per edge (1-based)
};

std::int64_t ipow(std::int64_t b, int e);
int encode_word(const Word& w, int S);
Word decode_word(int id, int S, int m);
// |w ^ v|: first index (1-based) where the words differ.
int word_meet(const Word& w, const Word& v);
// Prefix [w]_n and suffix sigma (last k symbols) of an encoded word.
inline int prefix_id(int id, int S, int m, int n) { return static_cast<int>(id / ipow(S, m - n)); }
inline int suffix_id(int id, int S, int k) { return static_cast<int>(id % ipow(S, k)); }

// Edge test from the characterization of edges, without building G_m.
// Returns (type, orientation of w).
std::optional<std::pair<int, Star>> edge_query(const IgsSpec& spec, const Word& w, const Word& v);

struct BuildOptions {
    std::int64_t max_vertices = 10000000;
};

ReplacementGraph build_graph(const IgsSpec& spec, int m, const BuildOptions& opts = {});

// All words with every coordinate in I_{t,star}; sorted vertex ids.
std::vector<int> boundary_set(const IgsSpec& spec, int m, int t, Star star);
// Union of all faces, sorted.
std::vector<int> boundary_union(const IgsSpec& spec, int m);

struct DistanceResult {
    double distance = 0;    // hops (unweighted) or sum of vertex weights
    std::vector<int> path;  // source ... target
};

// Unweighted: BFS hop count. Weighted: minimal sum of weights over the path's
// vertices, both endpoints included. Ties go to the smaller predecessor id.
DistanceResult graph_distance(const Graph& g, const std::vector<int>& sources,
                              const std::vector<int>& targets,
                              const std::vector<double>* weights = nullptr);
// Hop distances from a source set (-1 if unreachable).
std::vector<int> bfs_distances(const Graph& g, const std::vector<int>& sources);
// Vertex-weighted distances (sum over vertices including both ends) and
// predecessor array.
void dijkstra(const Graph& g, const std::vector<int>& sources, const std::vector<double>& w,
              std::vector<double>* dist, std::vector<int>* pred);

// Coordinate-wise lift of a symbol permutation to W_m.
struct LiftedMap {
    int S = 0;
    int level = 0;
    std::vector<int> perm;
    std::vector<Side> side;  // level-1 partition for reflections (may be empty)
    std::vector<int> table;  // image of every vertex id

    int operator()(int v) const { return table[v]; }
    // Level-m class by the first coordinate outside Delta.
    Side classify(int v) const;
};

LiftedMap lift_map(const SymbolMap& base, int S, int m);
LiftedMap lift_perm(const std::vector<int>& perm, int S, int m);

// Folding of G_{n+|target|} onto target . W_n as a table of vertex ids.
std::vector<int> fold_onto_cell(const IgsSpec& spec, const Symmetries& sym, const Word& target, int n);

// m-folding of a path in G_{n+m} to a path in G_m (vertex ids of level m).
std::vector<int> fold_path(const IgsSpec& spec, const Symmetries& sym, const std::vector<int>& theta,
                           int n, int m);

struct CubicalCoordinates {
    std::vector<long long> x;  // 0-based global coordinates
    std::vector<int> sheets;   // sheet history, one per letter
};

CubicalCoordinates cubical_coordinates(const IgsSpec& spec, const Word& w);

// Exports.
std::string export_dot(const IgsSpec& spec, const ReplacementGraph& g);
std::string export_edge_csv(const IgsSpec& spec, const ReplacementGraph& g);
std::string export_json_adjacency(const IgsSpec& spec, const ReplacementGraph& g);
std::string export_cubical_csv(const IgsSpec& spec, const ReplacementGraph& g);

}  // namespace igs
