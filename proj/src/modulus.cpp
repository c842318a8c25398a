#include "igs/modulus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <cstdio>
#include <cstdlib>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "json.hpp"

namespace igs {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Trip = Eigen::Triplet<double>;

double density_mass(const Density& rho, double p) {
    double s = 0;
    for (double v : rho.values) s += std::pow(v, p);
    return s;
}

namespace {

void check_sets(const Graph& g, const std::vector<int>& A, const std::vector<int>& B) {
    if (A.empty() || B.empty()) throw Error(ErrorCode::Infeasible, "source or target set is empty");
    std::vector<char> in(g.n, 0);
    for (int a : A) {
        if (a < 0 || a >= g.n) throw Error(ErrorCode::Infeasible, "vertex out of range");
        in[a] = 1;
    }
    for (int b : B) {
        if (b < 0 || b >= g.n) throw Error(ErrorCode::Infeasible, "vertex out of range");
        if (in[b]) throw Error(ErrorCode::Infeasible, "source and target sets overlap");
    }
}

// ---------------------------------------------------------------- max-flow

struct Dinic {
    struct Arc {
        int to;
        long long cap;
    };
    std::vector<Arc> arcs;
    std::vector<std::vector<int>> out;
    std::vector<int> level, it;

    explicit Dinic(int n) : out(n), level(n), it(n) {}
    int add(int a, int b, long long c) {
        out[a].push_back(static_cast<int>(arcs.size()));
        arcs.push_back({b, c});
        out[b].push_back(static_cast<int>(arcs.size()));
        arcs.push_back({a, 0});
        return static_cast<int>(arcs.size()) - 2;
    }
    bool bfs(int s, int t) {
        std::fill(level.begin(), level.end(), -1);
        std::vector<int> q = {s};
        level[s] = 0;
        for (size_t h = 0; h < q.size(); ++h)
            for (int e : out[q[h]])
                if (arcs[e].cap > 0 && level[arcs[e].to] < 0) {
                    level[arcs[e].to] = level[q[h]] + 1;
                    q.push_back(arcs[e].to);
                }
        return level[t] >= 0;
    }
    long long dfs(int x, int t, long long f) {
        if (x == t) return f;
        for (int& i = it[x]; i < static_cast<int>(out[x].size()); ++i) {
            const int e = out[x][i];
            const int y = arcs[e].to;
            if (arcs[e].cap > 0 && level[y] == level[x] + 1) {
                const long long d = dfs(y, t, std::min(f, arcs[e].cap));
                if (d > 0) {
                    arcs[e].cap -= d;
                    arcs[e ^ 1].cap += d;
                    return d;
                }
            }
        }
        return 0;
    }
    long long run(int s, int t) {
        long long total = 0;
        while (bfs(s, t)) {
            std::fill(it.begin(), it.end(), 0);
            while (long long f = dfs(s, t, std::numeric_limits<long long>::max())) total += f;
        }
        return total;
    }
    // Vertices reachable from s in the residual network.
    std::vector<char> reachable(int s) const {
        std::vector<char> r(out.size(), 0);
        std::vector<int> q = {s};
        r[s] = 1;
        for (size_t h = 0; h < q.size(); ++h)
            for (int e : out[q[h]])
                if (arcs[e].cap > 0 && !r[arcs[e].to]) {
                    r[arcs[e].to] = 1;
                    q.push_back(arcs[e].to);
                }
        return r;
    }
};

constexpr long long kInf = 1LL << 40;

// Split-vertex network: v_in = 2v, v_out = 2v+1, source 2n, sink 2n+1.
struct VertexCut {
    long long value = 0;
    std::vector<int> cut;
};

VertexCut min_vertex_cut(const Graph& g, const std::vector<int>& A, const std::vector<int>& B) {
    const int s = 2 * g.n, t = 2 * g.n + 1;
    Dinic d(2 * g.n + 2);
    std::vector<int> inner(g.n);
    for (int v = 0; v < g.n; ++v) inner[v] = d.add(2 * v, 2 * v + 1, 1);
    for (const auto& e : g.edges) {
        d.add(2 * e[0] + 1, 2 * e[1], kInf);
        d.add(2 * e[1] + 1, 2 * e[0], kInf);
    }
    for (int a : A) d.add(s, 2 * a, kInf);
    for (int b : B) d.add(2 * b + 1, t, kInf);
    VertexCut r;
    r.value = d.run(s, t);
    const auto reach = d.reachable(s);
    for (int v = 0; v < g.n; ++v)
        if (reach[2 * v] && !reach[2 * v + 1]) r.cut.push_back(v);
    return r;
}

// ---------------------------------------------------------------- interior point

// min sum_{i < npow} x_i^p subject to G x >= h, started from a strictly
// feasible x. Mehrotra predictor-corrector on the primal-dual system, with
// s = Gx - h kept exact.
struct Program {
    int nvar = 0;
    int npow = 0;
    double p = 2;
    double xref = 1;  // typical magnitude of x; the objective uses (x / xref)^p
    SpMat G;
    Vec h;
};

struct IpmResult {
    Vec x;
    int iterations = 0;
    double kkt = 0;
    bool converged = false;
};

double objective(const Program& P, const Vec& x) {
    double f = 0;
    for (int i = 0; i < P.npow; ++i) f += std::pow(x[i] / P.xref, P.p);
    return f;
}

double max_step(const Vec& v, const Vec& dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
    return a;
}

IpmResult interior_point(const Program& P, Vec x, const ModulusOptions& o) {
    const Eigen::Index mc = P.G.rows();
    const SpMat Gt = P.G.transpose();
    const SpMat Gabs = Gt.cwiseAbs();
    Vec s = P.G * x - P.h;
    for (Eigen::Index i = 0; i < mc; ++i)
        if (!(s[i] > 0)) throw Error(ErrorCode::Infeasible, "interior-point start is not strictly feasible");
    const double f0 = objective(P, x);
    Vec lam = Vec::Constant(mc, std::max(f0, 1e-300) / static_cast<double>(mc)).cwiseQuotient(s);
    Eigen::SimplicialLDLT<SpMat> ldlt;
    bool analyzed = false;
    IpmResult r;
    double best_kkt = HUGE_VAL;
    Vec best_x = x;
    for (int it = 0; it < o.max_iter; ++it) {
        r.iterations = it;
        Vec grad = Vec::Zero(P.nvar), hdiag = Vec::Zero(P.nvar);
        for (int i = 0; i < P.npow; ++i) {
            const double y = x[i] / P.xref;
            grad[i] = P.p * std::pow(y, P.p - 1) / P.xref;
            hdiag[i] = P.p * (P.p - 1) * std::pow(y, P.p - 2) / (P.xref * P.xref);
        }
        const Vec glam = Gt * lam;
        const double f = objective(P, x);
        const double gap = s.dot(lam);
        // Componentwise scale |G|^T |lam|: the dual residual is measured as a backward
        // error, since the flow-conservation rows cancel large multipliers.
        const double scale = std::max(grad.lpNorm<Eigen::Infinity>(), (Gabs * lam.cwiseAbs()).lpNorm<Eigen::Infinity>());
        // KKT residual: relative dual residual and relative complementarity.
        const double kkt = std::max((grad - glam).lpNorm<Eigen::Infinity>() / std::max(scale, 1e-300),
                                    gap / std::max(f, 1e-300));
        if (kkt < best_kkt) {
            best_kkt = kkt;
            best_x = x;
        }
        if (kkt <= o.eps_kkt) {
            r.converged = true;
            break;
        }
        const double mu = gap / static_cast<double>(mc);
        const Vec D = lam.cwiseQuotient(s);
        SpMat K = Gt * D.asDiagonal() * P.G;
        for (int i = 0; i < P.nvar; ++i) K.coeffRef(i, i) += hdiag[i] + 1e-14 * (1.0 + K.coeff(i, i));
        if (!analyzed) {
            ldlt.analyzePattern(K);
            analyzed = true;
        }
        ldlt.factorize(K);
        if (ldlt.info() != Eigen::Success) break;
        // one round of iterative refinement against K
        auto solve = [&](const Vec& rhs) {
            Vec d = ldlt.solve(rhs);
            d += ldlt.solve(rhs - K * d);
            return d;
        };
        // predictor
        const Vec dx_a = solve(-grad);
        const Vec ds_a = P.G * dx_a;
        const Vec dl_a = -lam - D.cwiseProduct(ds_a);
        const double a_aff = std::min(max_step(s, ds_a), max_step(lam, dl_a));
        const double mu_aff = (s + a_aff * ds_a).dot(lam + a_aff * dl_a) / static_cast<double>(mc);
        const double sigma = std::clamp(std::pow(mu_aff / mu, 3), 1e-6, 0.9);
        // Complementarity far below the tolerance only wrecks the conditioning of
        // K, so the centering target is floored once the gap is small enough.
        const double target = std::max(sigma * mu, 0.1 * o.eps_kkt * f / static_cast<double>(mc));
        // corrector
        const Vec w = (Vec::Constant(mc, target) - ds_a.cwiseProduct(dl_a)).cwiseQuotient(s);
        const Vec dx = solve(-grad + Gt * w);
        const Vec ds = P.G * dx;
        const Vec dl = w - lam - D.cwiseProduct(ds);
        const double a = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(lam, dl)));
        Vec xn = x + a * dx;
        Vec sn = P.G * xn - P.h;
        bool ok = true;
        for (Eigen::Index i = 0; i < mc && ok; ++i) ok = sn[i] > 0;
        if (!ok) {  // rounding pushed a slack to zero; take the linearized slack
            sn = s + a * ds;
            for (Eigen::Index i = 0; i < mc; ++i) sn[i] = std::max(sn[i], 1e-300);
        }
        x = xn;
        s = sn;
        lam = lam + a * dl;
        r.iterations = it + 1;
    }
    r.x = best_x;
    r.kkt = best_kkt;
    return r;
}

// Hop distances and a BFS path from A to B.
std::vector<int> bfs_path(const Graph& g, const std::vector<int>& A, const std::vector<int>& B) {
    return graph_distance(g, A, B).path;
}

struct Lengths {
    double min_length = 0;
    std::vector<int> path;
};

Lengths shortest_rho_path(const Graph& g, const std::vector<int>& A, const std::vector<int>& B,
                          const std::vector<double>& rho) {
    const auto d = graph_distance(g, A, B, &rho);
    return {d.distance, d.path};
}

ModulusResult finish(const Graph& g, const std::vector<int>& A, const std::vector<int>& B, double p,
                     std::vector<double> rho, ModulusResult r, const ModulusOptions& o) {
    for (double& v : rho) v = std::max(v, 0.0);
    const Lengths L = shortest_rho_path(g, A, B, rho);
    r.min_length = L.min_length;
    if (L.min_length < 1.0 - o.eps_adm && r.converged) r.converged = false;
    const double sc = 1.0 / std::min(1.0, L.min_length);
    for (double& v : rho) v *= sc;
    r.density.values = std::move(rho);
    r.value = density_mass(r.density, p);
    if (r.active_paths.empty()) r.active_paths.push_back(L.path);
    r.p = p;
    return r;
}

ModulusResult modulus_potential(const Graph& g, const std::vector<int>& A, const std::vector<int>& B, double p,
                                const ModulusOptions& o) {
    const int n = g.n;
    Program P;
    P.nvar = 2 * n;
    P.npow = n;
    P.p = p;
    std::vector<Trip> tr;
    std::vector<double> h;
    int row = 0;
    auto rho = [](int v) { return v; };
    auto u = [n](int v) { return n + v; };
    for (int a : A) {  // rho_a - u_a >= 0
        tr.push_back({row, rho(a), 1.0});
        tr.push_back({row, u(a), -1.0});
        h.push_back(0);
        ++row;
    }
    for (const auto& e : g.edges)
        for (int dir = 0; dir < 2; ++dir) {  // u_x + rho_y - u_y >= 0
            const int x = e[dir], y = e[1 - dir];
            tr.push_back({row, u(x), 1.0});
            tr.push_back({row, rho(y), 1.0});
            tr.push_back({row, u(y), -1.0});
            h.push_back(0);
            ++row;
        }
    for (int b : B) {  // u_b >= 1
        tr.push_back({row, u(b), 1.0});
        h.push_back(1);
        ++row;
    }
    for (int v = 0; v < n; ++v) {  // rho >= 0
        tr.push_back({row, rho(v), 1.0});
        h.push_back(0);
        ++row;
    }
    P.G.resize(row, P.nvar);
    P.G.setFromTriplets(tr.begin(), tr.end());
    P.h = Eigen::Map<Vec>(h.data(), static_cast<Eigen::Index>(h.size()));

    const auto hop = bfs_distances(g, A);
    int hmin = std::numeric_limits<int>::max();
    for (int b : B) {
        if (hop[b] < 0) throw Error(ErrorCode::Disconnected, "no path from A to B");
        hmin = std::min(hmin, hop[b]);
    }
    const double r0 = 4.0 / (hmin + 1), theta = 0.5;
    P.xref = r0;
    Vec x(P.nvar);
    for (int v = 0; v < n; ++v) {
        x[v] = r0;
        x[n + v] = hop[v] >= 0 ? r0 * (hop[v] + 1) * (1 - theta) : 0.0;
    }
    // vertices unreachable from A: any value keeping their edge rows positive
    for (int v = 0; v < n; ++v)
        if (hop[v] < 0) throw Error(ErrorCode::Disconnected, "graph is disconnected");
    const IpmResult ip = interior_point(P, x, o);
    ModulusResult r;
    r.method = "potential";
    r.iterations = ip.iterations;
    r.kkt_residual = ip.kkt;
    r.converged = ip.converged;
    return finish(g, A, B, p, std::vector<double>(ip.x.data(), ip.x.data() + n), r, o);
}

ModulusResult modulus_cutting_plane(const Graph& g, const std::vector<int>& A, const std::vector<int>& B,
                                    double p, const ModulusOptions& o) {
    const int n = g.n;
    std::vector<std::vector<int>> paths = {bfs_path(g, A, B)};
    std::vector<double> rho(n, 0.0);
    ModulusResult r;
    r.method = "cutting-plane";
    int total_iter = 0;
    double kkt = 0;
    bool ok = false;
    for (int round = 0; round < o.max_rounds; ++round) {
        Program P;
        P.nvar = n;
        P.npow = n;
        P.p = p;
        std::vector<Trip> tr;
        std::vector<double> h;
        int row = 0;
        size_t shortest = paths[0].size();
        for (const auto& path : paths) {
            for (int v : path) tr.push_back({row, v, 1.0});
            h.push_back(1);
            ++row;
            shortest = std::min(shortest, path.size());
        }
        for (int v = 0; v < n; ++v) {
            tr.push_back({row, v, 1.0});
            h.push_back(0);
            ++row;
        }
        P.G.resize(row, n);
        P.G.setFromTriplets(tr.begin(), tr.end());
        P.h = Eigen::Map<Vec>(h.data(), static_cast<Eigen::Index>(h.size()));
        const Vec x0 = Vec::Constant(n, 2.0 / static_cast<double>(shortest));
        P.xref = x0[0];
        const IpmResult ip = interior_point(P, x0, o);
        total_iter += ip.iterations;
        kkt = ip.kkt;
        for (int v = 0; v < n; ++v) rho[v] = std::max(ip.x[v], 0.0);
        // Separation: shortest rho-paths to each target, most violated first.
        std::vector<double> dist;
        std::vector<int> pred;
        dijkstra(g, A, rho, &dist, &pred);
        std::vector<int> order(B);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
        int added = 0;
        for (int b : order) {
            if (dist[b] >= 1.0 - o.eps_adm || added >= o.paths_per_round) break;
            std::vector<int> path;
            for (int x = b; x >= 0; x = pred[x]) path.push_back(x);
            std::reverse(path.begin(), path.end());
            // trim to the last vertex of A so the path leaves A once
            size_t start = 0;
            std::vector<char> inA(n, 0);
            for (int a : A) inA[a] = 1;
            for (size_t i = 0; i < path.size(); ++i)
                if (inA[path[i]]) start = i;
            path.erase(path.begin(), path.begin() + static_cast<long>(start));
            if (std::find(paths.begin(), paths.end(), path) == paths.end()) {
                paths.push_back(path);
                ++added;
            }
        }
        if (added == 0) {
            ok = ip.converged;
            break;
        }
    }
    r.iterations = total_iter;
    r.kkt_residual = kkt;
    r.converged = ok;
    r.active_paths = paths;
    return finish(g, A, B, p, rho, r, o);
}

}  // namespace

ModulusResult solve_modulus(const Graph& g, const std::vector<int>& A, const std::vector<int>& B, double p,
                            const ModulusOptions& o) {
    if (!(p >= 1.0) || p > o.p_max) throw Error(ErrorCode::InvalidExponent, "exponent outside [1, p_max]");
    check_sets(g, A, B);
    if (p == 1.0) {
        const VertexCut c = min_vertex_cut(g, A, B);
        ModulusResult r;
        r.method = "min-cut";
        r.p = 1.0;
        r.density.values.assign(g.n, 0.0);
        for (int v : c.cut) r.density.values[v] = 1.0;
        r.value = static_cast<double>(c.value);
        r.min_length = shortest_rho_path(g, A, B, r.density.values).min_length;
        r.active_paths.push_back(shortest_rho_path(g, A, B, r.density.values).path);
        return r;
    }
    ModulusResult r = o.method == ModulusMethod::CuttingPlane ? modulus_cutting_plane(g, A, B, p, o)
                                                              : modulus_potential(g, A, B, p, o);
    r.near_one = p < 1.05;
    return r;
}

// ---------------------------------------------------------------- flows

double Flow::at(const Graph& g, int x, int y) const {
    const int k = g.find_edge(x, y);
    if (k < 0) return 0.0;
    return g.edges[k][0] == x ? values[k] : -values[k];
}

std::vector<double> divergence(const Graph& g, const Flow& f) {
    std::vector<double> d(g.n, 0.0);
    for (int k = 0; k < g.num_edges(); ++k) {
        d[g.edges[k][0]] += f.values[k];
        d[g.edges[k][1]] -= f.values[k];
    }
    return d;
}

double flow_energy(const Flow& f, double q) {
    double e = 0;
    if (std::isinf(q)) {
        for (double v : f.values) e = std::max(e, std::abs(v));
        return e;
    }
    for (double v : f.values) e += std::pow(std::abs(v), q);
    return e;
}

FlowCheck verify_flow(const Graph& g, const Flow& f, double q) {
    FlowCheck c;
    const auto d = divergence(g, f);
    std::vector<char> end(g.n, 0);
    for (int a : f.A) end[a] = 1;
    for (int b : f.B) end[b] = 2;
    double I = 0;
    for (int v = 0; v < g.n; ++v) {
        if (end[v] == 1) I += d[v];
        if (end[v] == 0) c.max_interior_div = std::max(c.max_interior_div, std::abs(d[v]));
    }
    c.unit_residual = std::abs(I - 1.0);
    if (f.values.size() != static_cast<size_t>(g.num_edges())) c.off_edge_violations = 1;
    c.energy = flow_energy(f, q);
    for (double v : f.values) c.max_abs = std::max(c.max_abs, std::abs(v));
    return c;
}

namespace {

// Weighted Laplacian restricted to free vertices; fixed vertices enter the
// right-hand side.
struct Reduced {
    std::vector<int> free_index;  // -1 for fixed
    int nfree = 0;
};

// Removes divergence at free vertices by a grounded least-squares correction.
void project_divergence(const Graph& g, const std::vector<char>& fixed, const std::vector<char>& active,
                        std::vector<double>& F) {
    Reduced R;
    R.free_index.assign(g.n, -1);
    for (int v = 0; v < g.n; ++v)
        if (!fixed[v]) R.free_index[v] = R.nfree++;
    if (R.nfree == 0) return;
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> d(g.n, 0.0);
        for (int k = 0; k < g.num_edges(); ++k) {
            d[g.edges[k][0]] += F[k];
            d[g.edges[k][1]] -= F[k];
        }
        std::vector<Trip> tr;
        for (int k = 0; k < g.num_edges(); ++k) {
            if (!active[k]) continue;
            const int a = R.free_index[g.edges[k][0]], b = R.free_index[g.edges[k][1]];
            if (a >= 0) tr.push_back({a, a, 1.0});
            if (b >= 0) tr.push_back({b, b, 1.0});
            if (a >= 0 && b >= 0) {
                tr.push_back({a, b, -1.0});
                tr.push_back({b, a, -1.0});
            }
        }
        SpMat L(R.nfree, R.nfree);
        L.setFromTriplets(tr.begin(), tr.end());
        Vec rhs(R.nfree);
        for (int v = 0; v < g.n; ++v)
            if (R.free_index[v] >= 0) rhs[R.free_index[v]] = d[v];
        for (int i = 0; i < R.nfree; ++i)
            if (L.coeff(i, i) == 0) L.coeffRef(i, i) = 1.0;
        Eigen::SimplicialLDLT<SpMat> ldlt(L);
        const Vec w = ldlt.solve(rhs);
        for (int k = 0; k < g.num_edges(); ++k) {
            if (!active[k]) continue;
            const int a = R.free_index[g.edges[k][0]], b = R.free_index[g.edges[k][1]];
            const double wa = a >= 0 ? w[a] : 0.0, wb = b >= 0 ? w[b] : 0.0;
            F[k] -= wa - wb;
        }
    }
}

FlowResult flow_infinity(const Graph& g, const std::vector<int>& A, const std::vector<int>& B,
                         const std::vector<char>& active) {
    // min max|F| over unit flows = 1 / (max flow with unit edge capacities)
    const int s = g.n, t = g.n + 1;
    Dinic d(g.n + 2);
    std::vector<int> arc(g.num_edges(), -1);
    for (int k = 0; k < g.num_edges(); ++k)
        if (active[k]) {
            arc[k] = d.add(g.edges[k][0], g.edges[k][1], 1);
            d.add(g.edges[k][1], g.edges[k][0], 1);
        }
    for (int a : A) d.add(s, a, kInf);
    for (int b : B) d.add(b, t, kInf);
    const long long v = d.run(s, t);
    if (v == 0) throw Error(ErrorCode::Infeasible, "A and B are disconnected");
    FlowResult r;
    r.q = HUGE_VAL;
    r.flow.A = A;
    r.flow.B = B;
    r.flow.values.assign(g.num_edges(), 0.0);
    for (int k = 0; k < g.num_edges(); ++k)
        if (arc[k] >= 0) {
            // forward arc residual 0 means one unit went a->b; reverse arc
            // (arc+2) carries the opposite direction.
            const long long fwd = 1 - d.arcs[arc[k]].cap;
            const long long bwd = 1 - d.arcs[arc[k] + 2].cap;
            r.flow.values[k] = static_cast<double>(fwd - bwd) / static_cast<double>(v);
        }
    return r;
}

}  // namespace

FlowResult solve_flow(const Graph& g, const std::vector<int>& A, const std::vector<int>& B, double q,
                      const std::vector<char>* zero_edges, const FlowOptions& fo) {
    if (!(q > 1.0)) throw Error(ErrorCode::InvalidExponent, "dual exponent must exceed 1");
    check_sets(g, A, B);
    std::vector<char> active(g.num_edges(), 1);
    if (zero_edges)
        for (int k = 0; k < g.num_edges(); ++k)
            if ((*zero_edges)[k]) active[k] = 0;
    // Components over active edges that miss A or B carry no flow.
    std::vector<char> fixed(g.n, 0);
    std::vector<double> u(g.n, 0.0);
    for (int a : A) {
        fixed[a] = 1;
        u[a] = 1.0;
    }
    for (int b : B) fixed[b] = 1;
    {
        std::vector<int> comp(g.n, -1);
        int nc = 0;
        for (int v = 0; v < g.n; ++v) {
            if (comp[v] >= 0) continue;
            std::vector<int> q2 = {v};
            comp[v] = nc;
            bool hasA = false, hasB = false;
            for (size_t h = 0; h < q2.size(); ++h) {
                const int x = q2[h];
                for (int i = g.offs[x]; i < g.offs[x + 1]; ++i)
                    if (active[g.adj_edge[i]] && comp[g.adj[i]] < 0) {
                        comp[g.adj[i]] = nc;
                        q2.push_back(g.adj[i]);
                    }
            }
            for (int x : q2) {
                hasA = hasA || (fixed[x] && u[x] == 1.0);
                hasB = hasB || (fixed[x] && u[x] == 0.0);
            }
            if (!(hasA && hasB))
                for (int x : q2) fixed[x] = 1;  // carries no flow
            ++nc;
        }
    }
    if (std::isinf(q)) {
        FlowResult r = flow_infinity(g, A, B, active);
        const FlowCheck c = verify_flow(g, r.flow, q);
        r.energy = c.energy;
        r.max_interior_div = c.max_interior_div;
        r.unit_residual = c.unit_residual;
        r.max_abs = c.max_abs;
        return r;
    }
    const double p = q / (q - 1.0);
    std::vector<int> fi(g.n, -1);
    int nf = 0;
    for (int v = 0; v < g.n; ++v)
        if (!fixed[v]) fi[v] = nf++;
    // Minimize sum_e phi(u_x - u_y) with phi(t) = (t^2 + eps^2)^{p/2}, u = 1
    // on A and 0 on B; eps decreases geometrically (exact for p = 2).
    auto du = [&](int k) { return u[g.edges[k][0]] - u[g.edges[k][1]]; };
    int iters = 0;
    bool conv = true;
    if (nf > 0) {
        Eigen::SimplicialLDLT<SpMat> ldlt;
        bool analyzed = false;
        const bool quadratic = std::abs(p - 2.0) < 1e-15;
        std::vector<double> eps_list;
        if (quadratic)
            eps_list = {0.0};
        else
            for (double e = 1.0; e >= 1e-12; e *= 0.1) eps_list.push_back(e);
        // initial guess: harmonic potential
        for (size_t stage = 0; stage < eps_list.size() + (quadratic ? 0 : 1); ++stage) {
            const bool harmonic = !quadratic && stage == 0;
            const double eps = quadratic ? 0.0 : (harmonic ? 0.0 : eps_list[stage - 1]);
            for (int nt = 0; nt < fo.max_newton; ++nt) {
                ++iters;
                Vec grad = Vec::Zero(nf);
                std::vector<Trip> tr;
                double obj = 0;
                auto phi = [&](double t, double* d1, double* d2) {
                    if (quadratic || harmonic) {
                        *d1 = 2 * t;
                        *d2 = 2;
                        return t * t;
                    }
                    const double r2 = t * t + eps * eps;
                    *d1 = p * t * std::pow(r2, p / 2 - 1);
                    *d2 = p * std::pow(r2, p / 2 - 1) + p * (p - 2) * t * t * std::pow(r2, p / 2 - 2);
                    return std::pow(r2, p / 2);
                };
                for (int k = 0; k < g.num_edges(); ++k) {
                    if (!active[k]) continue;
                    const int a = fi[g.edges[k][0]], b = fi[g.edges[k][1]];
                    if (a < 0 && b < 0) continue;
                    double d1, d2;
                    obj += phi(du(k), &d1, &d2);
                    d2 = std::max(d2, 1e-300);
                    if (a >= 0) {
                        grad[a] += d1;
                        tr.push_back({a, a, d2});
                    }
                    if (b >= 0) {
                        grad[b] -= d1;
                        tr.push_back({b, b, d2});
                    }
                    if (a >= 0 && b >= 0) {
                        tr.push_back({a, b, -d2});
                        tr.push_back({b, a, -d2});
                    }
                }
                SpMat H(nf, nf);
                H.setFromTriplets(tr.begin(), tr.end());
                for (int i = 0; i < nf; ++i) H.coeffRef(i, i) += 1e-300;
                if (!analyzed) {
                    ldlt.analyzePattern(H);
                    analyzed = true;
                }
                ldlt.factorize(H);
                if (ldlt.info() != Eigen::Success) {
                    conv = false;
                    break;
                }
                const Vec step = ldlt.solve(-grad);
                const double dec = -grad.dot(step);
                if (quadratic || harmonic) {
                    for (int v = 0; v < g.n; ++v)
                        if (fi[v] >= 0) u[v] += step[fi[v]];
                    break;
                }
                // backtracking on the smoothed objective
                std::vector<double> u0 = u;
                double t = 1.0;
                for (int ls = 0; ls < 60; ++ls) {
                    for (int v = 0; v < g.n; ++v)
                        if (fi[v] >= 0) u[v] = u0[v] + t * step[fi[v]];
                    double o2 = 0, d1, d2;
                    for (int k = 0; k < g.num_edges(); ++k)
                        if (active[k] && (fi[g.edges[k][0]] >= 0 || fi[g.edges[k][1]] >= 0))
                            o2 += phi(du(k), &d1, &d2);
                    if (o2 <= obj - 1e-4 * t * dec || o2 <= obj * (1 + 1e-15)) break;
                    t *= 0.5;
                }
                if (dec <= fo.tol * fo.tol * std::max(obj, 1e-300)) break;
                if (nt + 1 == fo.max_newton && stage == eps_list.size()) conv = false;
            }
        }
    }
    FlowResult r;
    r.q = q;
    r.flow.A = A;
    r.flow.B = B;
    r.flow.values.assign(g.num_edges(), 0.0);
    for (int k = 0; k < g.num_edges(); ++k)
        if (active[k]) {
            const double t = du(k);
            r.flow.values[k] = std::pow(std::abs(t), p - 1) * (t >= 0 ? 1.0 : -1.0);
        }
    std::vector<char> fixed_ab(g.n, 0);
    for (int a : A) fixed_ab[a] = 1;
    for (int b : B) fixed_ab[b] = 1;
    if (std::abs(p - 2.0) > 1e-15) project_divergence(g, fixed_ab, active, r.flow.values);
    double I = 0;
    const auto d = divergence(g, r.flow);
    for (int a : A) I += d[a];
    if (!(std::abs(I) > 0)) throw Error(ErrorCode::Infeasible, "A and B are disconnected");
    for (double& v : r.flow.values) v /= I;
    const FlowCheck c = verify_flow(g, r.flow, q);
    r.energy = c.energy;
    r.max_interior_div = c.max_interior_div;
    r.unit_residual = c.unit_residual;
    r.max_abs = c.max_abs;
    r.iterations = iters;
    r.converged = conv;
    return r;
}

DualityCheck duality_gap(const ModulusResult& mod, const FlowResult& flow, const Graph& g) {
    const double q = conjugate_exponent(mod.p);
    if (!(std::isinf(q) && std::isinf(flow.q)) && std::abs(q - flow.q) > 1e-12 * q)
        throw Error(ErrorCode::ExponentMismatch, "flow exponent is not conjugate to the modulus exponent");
    DualityCheck c;
    const double e = std::isinf(q) ? flow.energy : std::pow(flow.energy, mod.p / q);
    c.ratio = mod.value * e;
    c.bound = std::pow(2.0, mod.p) * g.max_degree();
    c.within_bounds = c.ratio >= 1.0 / c.bound && c.ratio <= c.bound;
    return c;
}

int max_vertex_disjoint_paths(const Graph& g, const std::vector<int>& A, const std::vector<int>& B) {
    check_sets(g, A, B);
    return static_cast<int>(min_vertex_cut(g, A, B).value);
}

// ---------------------------------------------------------------- oracle

namespace {

std::vector<std::vector<int>> enumerate_paths(const Graph& g, const std::vector<int>& A, const std::vector<int>& B,
                                              long long limit) {
    std::vector<char> inA(g.n, 0), inB(g.n, 0), on(g.n, 0);
    for (int a : A) inA[a] = 1;
    for (int b : B) inB[b] = 1;
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int x) {
        if (static_cast<long long>(out.size()) > limit) return;
        cur.push_back(x);
        on[x] = 1;
        if (inB[x]) {
            out.push_back(cur);
        } else {
            for (int i = g.offs[x]; i < g.offs[x + 1]; ++i) {
                const int y = g.adj[i];
                if (!on[y] && !inA[y]) rec(y);
            }
        }
        on[x] = 0;
        cur.pop_back();
    };
    for (int a : A) rec(a);
    return out;
}

// max 1'l s.t. N' l <= 1, l >= 0 by the simplex method with Bland's rule.
double packing_lp(const std::vector<std::vector<int>>& paths, int n) {
    const int m = n, k = static_cast<int>(paths.size());
    // tableau rows: vertices (constraints), columns: paths + slacks
    std::vector<std::vector<double>> T(m + 1, std::vector<double>(k + m + 1, 0.0));
    for (int j = 0; j < k; ++j)
        for (int v : paths[j]) T[v][j] = 1.0;
    for (int i = 0; i < m; ++i) {
        T[i][k + i] = 1.0;
        T[i][k + m] = 1.0;
    }
    for (int j = 0; j < k; ++j) T[m][j] = -1.0;
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) basis[i] = k + i;
    const double eps = 1e-12;
    for (int iter = 0; iter < 100000; ++iter) {
        int col = -1;
        for (int j = 0; j < k + m; ++j)
            if (T[m][j] < -eps) {
                col = j;
                break;
            }
        if (col < 0) break;
        int rowp = -1;
        double best = 0;
        for (int i = 0; i < m; ++i)
            if (T[i][col] > eps) {
                const double r = T[i][k + m] / T[i][col];
                if (rowp < 0 || r < best - eps || (std::abs(r - best) <= eps && basis[i] < basis[rowp])) {
                    rowp = i;
                    best = r;
                }
            }
        if (rowp < 0) throw Error(ErrorCode::NoConvergence, "unbounded packing LP");
        const double piv = T[rowp][col];
        for (double& v : T[rowp]) v /= piv;
        for (int i = 0; i <= m; ++i)
            if (i != rowp && std::abs(T[i][col]) > 0) {
                const double f = T[i][col];
                for (int j = 0; j <= k + m; ++j) T[i][j] -= f * T[rowp][j];
            }
        basis[rowp] = col;
    }
    return T[m][k + m];
}

}  // namespace

double brute_force_modulus(const Graph& g, const std::vector<int>& A, const std::vector<int>& B, double p,
                           const BruteForceOptions& o) {
    if (!(p >= 1.0)) throw Error(ErrorCode::InvalidExponent, "exponent below 1");
    check_sets(g, A, B);
    const auto paths = enumerate_paths(g, A, B, o.max_paths);
    if (g.n > o.max_vertices && static_cast<long long>(paths.size()) > o.max_paths)
        throw Error(ErrorCode::TooLarge, "instance too large for path enumeration");
    if (static_cast<long long>(paths.size()) > o.max_paths)
        throw Error(ErrorCode::TooLarge, "instance too large for path enumeration");
    if (paths.empty()) throw Error(ErrorCode::Infeasible, "no path from A to B");
    if (p == 1.0) return packing_lp(paths, g.n);
    // Dual coordinate ascent: g(l) = sum l - (p-1) sum (s/p)^{p/(p-1)}, s = N'l,
    // rho(l) = (s/p)^{1/(p-1)}. Every feasible l gives a lower bound and the
    // rescaled rho an upper bound.
    const double r = 1.0 / (p - 1.0);
    const int k = static_cast<int>(paths.size());
    std::vector<double> lam(k, 0.0), s(g.n, 0.0);
    auto rho_of = [&](double sv) { return sv > 0 ? std::pow(sv / p, r) : 0.0; };
    auto len = [&](int j, double delta) {
        double L = 0;
        for (int v : paths[j]) L += rho_of(s[v] + delta);
        return L;
    };
    double lower = 0, upper = HUGE_VAL;
    for (long long sweep = 0; sweep < o.max_sweeps; ++sweep) {
        for (int j = 0; j < k; ++j) {
            // make the path's rho-length 1 (or drop lam_j to 0 if already longer)
            double lo = -lam[j], hi;
            if (len(j, lo) >= 1.0) {
                for (int v : paths[j]) s[v] -= lam[j];
                lam[j] = 0;
                continue;
            }
            hi = std::max(1e-16, lam[j]);
            while (len(j, hi) < 1.0) hi *= 2;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (len(j, mid) < 1.0)
                    lo = mid;
                else
                    hi = mid;
                if (hi - lo <= 1e-17 * std::max(1.0, std::abs(hi))) break;
            }
            const double delta = 0.5 * (lo + hi);
            for (int v : paths[j]) s[v] += delta;
            lam[j] += delta;
        }
        if (sweep % 8 == 7 || sweep < 8) {
            double gsum = 0;
            for (double l : lam) gsum += l;
            double pen = 0;
            for (int v = 0; v < g.n; ++v)
                if (s[v] > 0) pen += std::pow(s[v] / p, p * r);
            lower = std::max(lower, gsum - (p - 1) * pen);
            double lmin = HUGE_VAL;
            for (int j = 0; j < k; ++j) lmin = std::min(lmin, len(j, 0));
            if (lmin > 0) {
                double up = 0;
                for (int v = 0; v < g.n; ++v) up += std::pow(rho_of(s[v]) / lmin, p);
                upper = std::min(upper, up);
            }
            if (upper - lower <= o.rel_gap * upper) return 0.5 * (upper + lower);
        }
    }
    throw Error(ErrorCode::NoConvergence, "oracle did not reach the requested gap");
}

// ---------------------------------------------------------------- universal density

UniversalDensity universal_density(const IgsSpec& spec, const ReplacementGraph& g, const Symmetries& sym,
                                   double p, const ModulusOptions& opts, Exec exec) {
    UniversalDensity u;
    const int m = g.level, S = spec.num_symbols();
    const FaceTable ft = face_table(spec);
    u.pairs = antipodal_face_pairs(spec);
    if (u.pairs.empty()) throw Error(ErrorCode::Infeasible, "no antipodal pairs");
    u.pair_results.resize(u.pairs.size());
    std::vector<std::string> errors(u.pairs.size());
#pragma omp parallel for schedule(dynamic) if (exec.parallel)
    for (long i = 0; i < static_cast<long>(u.pairs.size()); ++i) {
        try {
            const int ka = ft.key_of[u.pairs[i].first], kb = ft.key_of[u.pairs[i].second];
            const auto A = boundary_set(spec, m, face_key_type(ka), face_key_star(ka));
            const auto B = boundary_set(spec, m, face_key_type(kb), face_key_star(kb));
            u.pair_results[i] = solve_modulus(g, A, B, p, opts);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw Error(ErrorCode::NoConvergence, "pair solve failed: " + e);
    u.rho.level = m;
    u.rho.values.assign(g.n, 0.0);
    std::vector<std::vector<int>> group = sym.group;
    if (group.empty()) {
        std::vector<int> id(S);
        std::iota(id.begin(), id.end(), 0);
        group.push_back(id);
    }
    std::vector<std::vector<int>> tables;
    for (const auto& perm : group) tables.push_back(lift_perm(perm, S, m).table);
    for (const auto& r : u.pair_results) {
        u.max_pair_modulus = std::max(u.max_pair_modulus, r.value);
        for (const auto& tab : tables)
            for (int v = 0; v < g.n; ++v) u.rho.values[v] = std::max(u.rho.values[v], r.density.values[tab[v]]);
    }
    u.mass = density_mass(u.rho, p);
    for (int t = 0; t < spec.num_types(); ++t) {
        if (sym.flipping.empty() || sym.flipping[t] < 0) continue;
        const auto tab = lift_perm(sym.flip(t).perm, S, m).table;
        for (int v = 0; v < g.n; ++v)
            u.invariance_defect = std::max(u.invariance_defect, std::abs(u.rho.values[tab[v]] - u.rho.values[v]));
    }
    return u;
}

UniversalDensity universal_density(const IgsSpec& spec, int m, double p, const ModulusOptions& opts, Exec exec) {
    const ReplacementGraph g = build_graph(spec, m);
    const Symmetries sym = find_symmetries(spec);
    return universal_density(spec, g, sym, p, opts, exec);
}

std::string modulus_to_json(const IgsSpec& spec, const ModulusResult& r, int level) {
    nlohmann::ordered_json j;
    j["p"] = r.p;
    j["value"] = r.value;
    j["method"] = r.method;
    j["iterations"] = r.iterations;
    j["kkt_residual"] = r.kkt_residual;
    j["min_length"] = r.min_length;
    j["converged"] = r.converged;
    j["near_one"] = r.near_one;
    nlohmann::ordered_json dens = nlohmann::ordered_json::object();
    const int S = spec.num_symbols();
    for (size_t v = 0; v < r.density.values.size(); ++v)
        dens[spec.word_label(decode_word(static_cast<int>(v), S, level))] = r.density.values[v];
    j["density"] = dens;
    return j.dump(2);
}

}  // namespace igs
