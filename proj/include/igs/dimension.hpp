#pragma once

// Modulus sequences M_p^(m), growth rates, multiplicativity constants,
// conformal-dimension brackets, walk dimensions and CLP probes.

#include <string>
#include <utility>
#include <vector>

#include "igs/core.hpp"
#include "igs/modulus.hpp"

namespace igs {

struct LevelDiagnostics {
    int level = 0;
    double kkt_residual = 0;  // worst over the pair solves
    int iterations = 0;
    bool converged = true;
    double max_pair_modulus = 0;
    double invariance_defect = 0;
};

struct ModulusSequence {
    double p = 0;
    std::vector<int> levels;
    std::vector<double> values;  // M_p^(m) = mass of the universal density
    std::vector<LevelDiagnostics> diagnostics;

    double at(int m) const;
};

ModulusSequence modulus_sequence(const IgsSpec& spec, double p, const std::vector<int>& levels,
                                 const ModulusOptions& opts = {}, Exec exec = {});

struct GrowthRate {
    double estimate = 0;    // geometric mean of the successive ratios
    double last_ratio = 0;  // M^(m)/M^(m-1) at the top level
    double width = 0;       // max - min of the successive ratios
    std::vector<double> ratios;
};

GrowthRate growth_rate(const ModulusSequence& seq);

struct PairRatio {
    int n = 0, m = 0;
    double ratio = 0;       // M^(n+m) / (M^(n) M^(m))
    double face_ratio = 0;  // same for the first antipodal face-pair modulus
    // Replacement-flow certificate: E(F_{n+m})^{-p/q} / (2^p deg) <= Mod(n+m)
    double flow_lower_bound = 0;
    double face_modulus = 0;  // Mod_p between the faces at level n+m
    bool flow_consistent = true;
    double realized_c = 0;
};

struct MultiplicativityReport {
    double p = 0;
    std::vector<PairRatio> pairs;
    double c_sub = 0;    // max ratio
    double c_super = 0;  // min ratio
};

MultiplicativityReport multiplicativity_report(const IgsSpec& spec, double p,
                                               const std::vector<std::pair<int, int>>& pairs,
                                               const ModulusOptions& opts = {}, Exec exec = {},
                                               bool with_flows = true);

struct DimensionOptions {
    double tol = 0.01;       // bracket width
    int m_cap = 4;           // top level of every sequence
    int probe_levels = 3;    // disjoint-path probe levels
    int max_bisections = 40;
    ModulusOptions modulus;
};

struct PEvaluation {
    double p = 0;
    ModulusSequence seq;
    GrowthRate rate;
    double c_super = 0, c_sub = 0;  // over all (a, b) with a + b <= m_cap
    bool super_certificate = false;  // M^(m) c_super >= 1: dim >= p (conditional)
    bool sub_certificate = false;    // C_sub M^(m) < 1: dim <= p (conditional)
};

struct WalkDimension {
    double p = 0;
    double d_w = 0;
    double width = 0;  // from the successive-ratio spread
    bool sobolev_condition = false;  // d_f - d_w < 1
};

struct DimensionReport {
    double d_f = 0;
    double l_star = 0;
    int m_cap = 0;
    double p_lo = 1, p_hi = 1;
    double q_star = 1;
    std::vector<PEvaluation> evaluations;  // in evaluation order
    std::vector<int> disjoint_paths;       // per probe level
    bool local_cut_points = false;
    bool budget_exceeded = false;
    std::vector<WalkDimension> walk;
};

DimensionReport conformal_dimension(const IgsSpec& spec, const DimensionOptions& opts = {}, Exec exec = {});

double scaling_factor(const IgsSpec& spec, int levels = 4);
WalkDimension walk_dimension(const IgsSpec& spec, const GrowthRate& rate, double p, double l_star = 0);

struct AnnulusSample {
    int w = 0;
    int r = 0;
    double modulus = 0;
    double ratio = 0;  // modulus / M_p^(m)
    bool skipped = false;
};

struct TubeSample {
    int w = 0, w2 = 0;
    int distance = 0;
    double modulus = 0;
    double lower_bound = 0;  // d^{1-p} M_p^(m)
    double ratio = 0;        // modulus / lower_bound
};

struct ClpProbe {
    int n = 0, m = 0;
    double p = 0;
    double reference = 0;  // M_p^(m)
    std::vector<AnnulusSample> annulus;
    std::vector<TubeSample> tubes;
    bool skipped = false;  // r exceeds the diameter of G_n
};

ClpProbe clp_probe(const IgsSpec& spec, double p, int n, int m, int r = 1, int samples = 4,
                   const ModulusOptions& opts = {});

std::string dimension_to_json(const IgsSpec& spec, const DimensionReport& d);

}  // namespace igs
