#pragma once

// Discrete vertex p-modulus between vertex sets, q-energy minimizing unit
// flows, duality checks, a brute-force oracle and the universal density.

#include <cmath>
#include <string>
#include <vector>

#include "igs/core.hpp"
#include "igs/graph.hpp"

namespace igs {

enum class ModulusMethod {
    Potential,     // distance-potential reformulation, one interior-point solve
    CuttingPlane,  // active path set with weighted shortest-path separation
};

struct ModulusOptions {
    double eps_adm = 1e-9;
    double eps_kkt = 1e-8;
    double p_max = 16.0;
    int max_iter = 300;    // interior-point iterations per solve
    int max_rounds = 400;  // cutting-plane rounds
    int paths_per_round = 8;
    ModulusMethod method = ModulusMethod::Potential;
};

struct Density {
    std::vector<double> values;
    int level = 0;
};

double density_mass(const Density& rho, double p);

struct ModulusResult {
    double value = 0;
    Density density;
    std::vector<std::vector<int>> active_paths;
    double kkt_residual = 0;
    double min_length = 0;  // shortest rho-length of an A-B path before rescaling
    int iterations = 0;
    double p = 0;
    bool converged = true;
    bool near_one = false;  // p in (1, 1.05): objective close to degenerate
    std::string method;
};

// Mod_p of the paths from A to B; a path's rho-length sums rho over all its
// vertices, endpoints included.
ModulusResult solve_modulus(const Graph& g, const std::vector<int>& A, const std::vector<int>& B, double p,
                            const ModulusOptions& opts = {});

// Antisymmetric edge function stored once per edge, in the edge's stored
// orientation: F(a,b) = values[k] for edges[k] = (a,b), F(b,a) = -values[k].
struct Flow {
    std::vector<double> values;
    std::vector<int> A, B;

    double at(const Graph& g, int x, int y) const;
};

std::vector<double> divergence(const Graph& g, const Flow& f);

struct FlowResult {
    Flow flow;
    double energy = 0;  // sum |F|^q, or max |F| when q is infinite
    double q = 0;
    double max_interior_div = 0;
    double unit_residual = 0;
    double max_abs = 0;
    int iterations = 0;
    bool converged = true;
};

struct FlowOptions {
    double tol = 1e-12;
    int max_newton = 200;
};

// Unit flow from A to B minimizing sum |F|^q. zero_edges marks edges forced
// to carry nothing. q = infinity (pass HUGE_VAL) minimizes max |F|.
FlowResult solve_flow(const Graph& g, const std::vector<int>& A, const std::vector<int>& B, double q,
                      const std::vector<char>* zero_edges = nullptr, const FlowOptions& opts = {});

double flow_energy(const Flow& f, double q);

struct FlowCheck {
    double max_interior_div = 0;
    double unit_residual = 0;
    int off_edge_violations = 0;
    double energy = 0;
    double max_abs = 0;
};

FlowCheck verify_flow(const Graph& g, const Flow& f, double q);

inline double conjugate_exponent(double p) { return p == 1.0 ? HUGE_VAL : p / (p - 1.0); }

struct DualityCheck {
    double ratio = 0;  // Mod_p * E_q^{p/q}
    double bound = 0;  // 2^p * deg
    bool within_bounds = false;
};

DualityCheck duality_gap(const ModulusResult& mod, const FlowResult& flow, const Graph& g);

struct BruteForceOptions {
    int max_vertices = 12;
    long long max_paths = 10000;
    double rel_gap = 1e-10;
    long long max_sweeps = 2000000;
};

// Independent oracle: all simple A-B paths, full constraint set.
double brute_force_modulus(const Graph& g, const std::vector<int>& A, const std::vector<int>& B, double p,
                           const BruteForceOptions& opts = {});

// Menger count of pairwise vertex-disjoint A-B paths (= Mod_1).
int max_vertex_disjoint_paths(const Graph& g, const std::vector<int>& A, const std::vector<int>& B);

struct UniversalDensity {
    Density rho;
    double mass = 0;
    std::vector<std::pair<int, int>> pairs;  // distinct-face pairs
    std::vector<ModulusResult> pair_results;
    double max_pair_modulus = 0;
    double invariance_defect = 0;  // max |rho o eta_t - rho|
};

UniversalDensity universal_density(const IgsSpec& spec, int m, double p, const ModulusOptions& opts = {},
                                   Exec exec = {});
// Same, reusing a prebuilt level-m graph and symmetry data.
UniversalDensity universal_density(const IgsSpec& spec, const ReplacementGraph& g, const Symmetries& sym,
                                   double p, const ModulusOptions& opts = {}, Exec exec = {});

std::string modulus_to_json(const IgsSpec& spec, const ModulusResult& r, int level);

}  // namespace igs
