#pragma once

// Boundary-attached graphs, optimal boundary flows, symmetry actions and
// twists on flows, flow bases and the replacement-flow construction.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "igs/core.hpp"
#include "igs/graph.hpp"
#include "igs/modulus.hpp"

namespace igs {

// G_m plus one attachment vertex v_L per distinct face L and word v in L,
// joined to v. Base vertices and edges keep their ids; attachment edges are
// stored as (v_L, v).
struct TildeGraph {
    Graph graph;
    Graph base;  // G_m alone
    int level = 0;
    int S = 0;
    int base_n = 0;
    int base_edges = 0;
    FaceTable faces;
    std::vector<std::vector<int>> face_words;  // per distinct face, sorted word ids
    std::vector<std::vector<int>> attach;      // per distinct face, attachment ids parallel to face_words
    std::vector<int> att_face, att_word;       // per attachment (index v - base_n)

    int num_faces() const { return static_cast<int>(face_words.size()); }
    bool is_attachment(int v) const { return v >= base_n; }
    // Attachment vertex v_L, or -1 when v is not in L.
    int attachment(int face, int word) const;
    // Edge index of {v_L, v}, or -1.
    int attachment_edge(int face, int word) const;
    std::vector<int> attachments(int face) const { return attach[face]; }
};

TildeGraph build_tilde_graph(const IgsSpec& spec, const ReplacementGraph& g);
TildeGraph build_tilde_graph(const IgsSpec& spec, int m);

// Join extension: attach v_x to every x in A u B with flow div(F)(x).
struct FlowExtension {
    Graph graph;
    Flow flow;
    double energy_before = 0;
    double energy_after = 0;
    double bound = 0;  // 3 deg^{1/(p-1)} E_q(F)
    bool within_bound = false;
};

FlowExtension extend_flow(const Graph& g, const Flow& f, double q);

// Energy-minimizing unit flow between the attachments of two distinct faces,
// with the attachment edges of every other face forced to zero.
FlowResult optimal_boundary_flow(const TildeGraph& tg, int face_from, int face_to, double q);
FlowResult optimal_type_flow(const TildeGraph& tg, int t, Star star, double q);

// Vertex table of the lift of a symbol permutation to the tilde graph:
// v -> alpha(v), v_L -> alpha(v)_{alpha(L)}.
std::vector<int> tilde_vertex_map(const TildeGraph& tg, const std::vector<int>& perm);
// alpha(F)(x, y) = F(alpha^{-1} x, alpha^{-1} y).
Flow map_flow(const TildeGraph& tg, const Flow& f, const std::vector<int>& perm);
double flow_value(const Graph& g, const Flow& f, int x, int y);

struct TwistResult {
    Flow flow;
    int from_face = 0;
    int to_face = 0;
    bool swapped_partition = false;
    double energy_ratio = 0;  // E_q(T F) / E_q(F)
};

TwistResult twist_flow(const TildeGraph& tg, const Flow& f, int face_from, int face_to, const SymbolMap& alpha,
                       double q);

struct FlowBasis {
    int level = 0;
    double q = 0;
    std::string family;
    std::map<std::pair<int, int>, Flow> flows;  // (from face, to face)
    std::map<std::pair<int, int>, double> energies;
    double energy = 0;               // max energy over the basis
    double min_face_resistance = 0;  // min over types of E_q(I_{t,-}, I_{t,+}, G_m)
    double energy_ratio = 0;         // energy / min_face_resistance

    const Flow& at(int a, int b) const { return flows.at({a, b}); }
};

struct BasisVerification {
    double fb1 = 0;  // max |interior div| and |I - 1|
    double fb2 = 0;  // max attachment value of uninvolved faces
    double fb3 = 0;
    double fb4 = 0;
    double scale = 0;  // max |F| over the basis
    int count = 0;
    int expected = 0;
    std::string worst;  // condition and pair with the largest scaled residual
    double reverse_ie_slack = 0;  // min over disjoint pairs of E(F|_{W_m}) - E_q(L1, L2, G_m)

    bool ok(double tol = 1e-8) const;
};

FlowBasis build_flow_basis(const IgsSpec& spec, const TildeGraph& tg, double q, Exec exec = {});
FlowBasis build_flow_basis(const IgsSpec& spec, int m, double q, Exec exec = {});
BasisVerification verify_flow_basis(const IgsSpec& spec, const TildeGraph& tg, const FlowBasis& basis);

// Face (t(u), o(u)) per boundary word of A_n u B_n.
struct BoundaryTyping {
    std::map<int, std::pair<int, Star>> of_word;
};

BoundaryTyping face_typing(const IgsSpec& spec, int n, int key_a, int key_b);

struct ReplacementFlow {
    Flow flow;  // on G_{n+m}, with A_{n+m}, B_{n+m}
    double well_defined_residual = 0;
    double max_interior_div = 0;
    double unit_residual = 0;
    double boundary_law_residual = 0;
    double max_abs = 0;
    double energy = 0;
    double basis_energy = 0;
    double base_energy = 0;
    double realized_c = 0;  // energy / (basis_energy * base_energy)
    double bound_c = 0;     // 3 deg^{1/(p-1)} (deg+1)^{1/(p-1)}
    int zero_cells = 0;     // cells with J_u = 0
};

ReplacementFlow replacement_flow(const IgsSpec& spec, const ReplacementGraph& gn, const Flow& fn,
                                 const FlowBasis& basis, const TildeGraph& tm, const BoundaryTyping& typing,
                                 const ReplacementGraph& gnm, Exec exec = {});

std::string basis_to_csv(const IgsSpec& spec, const TildeGraph& tg, const FlowBasis& basis);

}  // namespace igs
