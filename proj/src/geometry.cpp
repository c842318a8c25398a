#include "igs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include <omp.h>

namespace igs {

// ---------------------------------------------------------------- probe

BoundedGeometryProbe bounded_geometry_probe(const IgsSpec& spec, int m_max, long long path_budget) {
    if (m_max < 2) throw Error(ErrorCode::InsufficientLevels, "bounded geometry probe needs m_max >= 2");
    BoundedGeometryProbe r;
    long long steps = 0;
    for (int m = 1; m <= m_max; ++m) {
        ReplacementGraph g;
        try {
            g = build_graph(spec, m);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BudgetExceeded) break;
            throw;
        }
        // Subgraph of edges joining different level-(m-1) cells.
        std::vector<std::vector<int>> nc(g.n);
        for (int k = 0; k < g.num_edges(); ++k)
            if (g.meet[k] < m) {
                nc[g.edges[k][0]].push_back(g.edges[k][1]);
                nc[g.edges[k][1]].push_back(g.edges[k][0]);
            }
        int best = 1;
        std::vector<char> on(g.n, 0);
        bool budget_hit = false;
        std::function<void(int, int)> dfs = [&](int x, int len) {
            best = std::max(best, len);
            if (++steps > path_budget) {
                budget_hit = true;
                return;
            }
            for (int y : nc[x])
                if (!on[y] && !budget_hit) {
                    on[y] = 1;
                    dfs(y, len + 1);
                    on[y] = 0;
                }
        };
        for (int v = 0; v < g.n && !budget_hit; ++v) {
            if (nc[v].empty()) continue;
            on[v] = 1;
            dfs(v, 1);
            on[v] = 0;
        }
        if (budget_hit) break;
        r.max_nc_vertices.push_back(best);
        r.level_reached = m;
    }
    const auto& s = r.max_nc_vertices;
    if (!s.empty()) r.m_star_estimate = *std::max_element(s.begin(), s.end());
    if (s.size() >= 3) {
        const size_t n = s.size();
        r.stabilized = s[n - 1] == s[n - 2] && s[n - 2] == s[n - 3];
        if (r.stabilized) {
            size_t i = n - 1;
            while (i > 0 && s[i - 1] == s[n - 1]) --i;
            r.stabilization_level = static_cast<int>(i) + 1;
        }
    }
    return r;
}

// ---------------------------------------------------------------- lifted cells

namespace {

// Induced subgraph of G_{m+j} on the cells U . W_j; vertex idx*S^j + x stands
// for the word U[idx] x.
Graph lifted_cells(const IgsSpec& spec, const ReplacementGraph& gm, const std::vector<int>& U,
                   const std::vector<int>& index, int j, const ReplacementGraph* gj) {
    const int S = spec.num_symbols();
    const int cell = static_cast<int>(ipow(S, j));
    Graph h;
    h.n = static_cast<int>(U.size()) * cell;
    if (j >= 1)
        for (size_t i = 0; i < U.size(); ++i)
            for (const auto& e : gj->edges)
                h.edges.push_back({static_cast<int>(i) * cell + e[0], static_cast<int>(i) * cell + e[1]});
    std::vector<std::vector<std::pair<int, int>>> pairs(spec.num_types());
    for (int t = 0; t < spec.num_types(); ++t) {
        std::vector<std::pair<int, int>> cur = {{0, 0}};
        for (int k = 0; k < j; ++k) {
            std::vector<std::pair<int, int>> nxt;
            for (auto [x, y] : cur)
                for (auto [a, b] : spec.gluings[t]) nxt.push_back({x * S + a, y * S + b});
            cur.swap(nxt);
        }
        pairs[t] = cur;
    }
    for (int k = 0; k < gm.num_edges(); ++k) {
        const int ia = index[gm.edges[k][0]], ib = index[gm.edges[k][1]];
        if (ia < 0 || ib < 0) continue;
        for (auto [x, y] : pairs[gm.etype[k]]) h.edges.push_back({ia * cell + x, ib * cell + y});
    }
    h.finalize();
    return h;
}

struct LiftedStack {
    int m = 0;
    int depth = 0;
    std::vector<int> U;
    std::vector<int> index;
    std::vector<Graph> H;  // H[j], j = 0..depth
};

LiftedStack make_stack(const IgsSpec& spec, const ReplacementGraph& gm, const std::vector<int>& U, int depth) {
    LiftedStack st;
    st.m = gm.level;
    st.depth = depth;
    st.U = U;
    st.index.assign(gm.n, -1);
    for (size_t i = 0; i < U.size(); ++i) st.index[U[i]] = static_cast<int>(i);
    for (int j = 0; j <= depth; ++j) {
        ReplacementGraph gj;
        if (j >= 1) gj = build_graph(spec, j);
        st.H.push_back(lifted_cells(spec, gm, U, st.index, j, j >= 1 ? &gj : nullptr));
    }
    return st;
}

Neighborhood neighborhood_on_stack(const IgsSpec& spec, const ReplacementGraph& gm, const LiftedStack& st,
                                   int w, int radius) {
    const int S = spec.num_symbols();
    const int k = st.depth;
    const int nu = static_cast<int>(st.U.size());
    const auto d0 = bfs_distances(st.H[0], {st.index[w]});
    std::vector<int> cand;
    for (int i = 0; i < nu; ++i)
        if (d0[i] >= 0 && d0[i] <= radius) cand.push_back(i);
    // cell distance per depth
    std::vector<std::vector<int>> dj(k + 1, std::vector<int>(nu, -1));
    std::vector<int> parent_k;
    std::vector<int> dist_k;
    for (int j = 0; j <= k; ++j) {
        const int cell = static_cast<int>(ipow(S, j));
        const Graph& h = st.H[j];
        std::vector<int> src;
        for (int x = 0; x < cell; ++x) src.push_back(st.index[w] * cell + x);
        std::vector<int> dist(h.n, -1), par(h.n, -1), q;
        q.reserve(h.n);
        for (int s : src) {
            dist[s] = 0;
            q.push_back(s);
        }
        for (size_t hd = 0; hd < q.size(); ++hd) {
            const int x = q[hd];
            for (int i = h.offs[x]; i < h.offs[x + 1]; ++i) {
                const int y = h.adj[i];
                if (dist[y] < 0) {
                    dist[y] = dist[x] + 1;
                    par[y] = x;
                    q.push_back(y);
                }
            }
        }
        for (int i : cand) {
            int best = -1;
            for (int x = 0; x < cell; ++x) {
                const int d = dist[i * cell + x];
                if (d >= 0 && (best < 0 || d < best)) best = d;
            }
            dj[j][i] = best;
        }
        if (j == k) {
            parent_k.swap(par);
            dist_k.swap(dist);
        }
    }
    auto stable = [&](int i, int j) { return dj[j][i] >= 0 && dj[j][i] == dj[j - 1][i]; };
    Neighborhood nb;
    nb.w = w;
    nb.level = gm.level;
    nb.depth = k;
    nb.radius = radius;
    std::vector<int> prev_set, cur_set;
    for (int i : cand) {
        const bool in_cur = (k == 0) ? dj[0][i] <= 1 : stable(i, k);
        const bool in_prev = (k <= 1) ? dj[0][i] <= 1 : stable(i, k - 1);
        if (in_prev) prev_set.push_back(i);
        if (!in_cur) continue;
        cur_set.push_back(i);
        NeighborEntry e;
        e.v = st.U[i];
        e.distance = dj[k][i];
        const int cell = static_cast<int>(ipow(S, k));
        int end = -1;
        for (int x = 0; x < cell; ++x) {
            const int id = i * cell + x;
            if (dist_k[id] == dj[k][i]) {
                end = id;
                break;
            }
        }
        std::vector<int> path;
        for (int x = end; x >= 0; x = parent_k[x]) path.push_back(st.U[x / cell] * cell + x % cell);
        std::reverse(path.begin(), path.end());
        e.witness = path;
        e.non_collapsing = true;
        const int lvl = gm.level + k;
        for (size_t p = 1; p < path.size(); ++p)
            if (word_meet(decode_word(path[p - 1], S, lvl), decode_word(path[p], S, lvl)) >= lvl && k > 0)
                e.non_collapsing = false;
        nb.members.push_back(std::move(e));
    }
    std::sort(nb.members.begin(), nb.members.end(),
              [](const NeighborEntry& a, const NeighborEntry& b) { return a.v < b.v; });
    nb.certified = k >= 2 && prev_set == cur_set;
    return nb;
}

}  // namespace

std::vector<int> Neighborhood::ids() const {
    std::vector<int> out;
    for (const auto& e : members) out.push_back(e.v);
    return out;
}

Neighborhood neighborhood(const IgsSpec& spec, const Word& w, int depth, int radius) {
    if (depth < 1) throw Error(ErrorCode::InsufficientLevels, "lift depth must be >= 1");
    const int m = static_cast<int>(w.size());
    const ReplacementGraph gm = build_graph(spec, m);
    const int wid = encode_word(w, spec.num_symbols());
    const auto d = bfs_distances(gm, {wid});
    std::vector<int> U;
    for (int v = 0; v < gm.n; ++v)
        if (d[v] >= 0 && d[v] <= radius + 1) U.push_back(v);
    const LiftedStack st = make_stack(spec, gm, U, depth);
    return neighborhood_on_stack(spec, gm, st, wid, radius);
}

std::vector<Neighborhood> all_neighborhoods(const IgsSpec& spec, int m, int depth, int radius, Exec exec) {
    if (depth < 1) throw Error(ErrorCode::InsufficientLevels, "lift depth must be >= 1");
    const ReplacementGraph gm = build_graph(spec, m);
    std::vector<int> U(gm.n);
    for (int v = 0; v < gm.n; ++v) U[v] = v;
    const LiftedStack st = make_stack(spec, gm, U, depth);
    std::vector<Neighborhood> out(gm.n);
#pragma omp parallel for schedule(dynamic) if (exec.parallel)
    for (int v = 0; v < gm.n; ++v) out[v] = neighborhood_on_stack(spec, gm, st, v, radius);
    return out;
}

IncidenceGraph incidence_graph(const IgsSpec& spec, int m, int depth, Exec exec) {
    const auto nbs = all_neighborhoods(spec, m, depth, 4, exec);
    IncidenceGraph ig;
    ig.depth = depth;
    ig.certified = true;
    ig.graph.n = static_cast<int>(nbs.size());
    for (const auto& nb : nbs) {
        ig.certified = ig.certified && nb.certified;
        for (const auto& e : nb.members)
            if (e.v > nb.w) ig.graph.edges.push_back({nb.w, e.v});
    }
    // Symmetrize: keep pairs reported from either side.
    for (const auto& nb : nbs)
        for (const auto& e : nb.members)
            if (e.v < nb.w) ig.graph.edges.push_back({e.v, nb.w});
    std::sort(ig.graph.edges.begin(), ig.graph.edges.end());
    ig.graph.edges.erase(std::unique(ig.graph.edges.begin(), ig.graph.edges.end()), ig.graph.edges.end());
    ig.graph.finalize();
    return ig;
}

// ---------------------------------------------------------------- diameter

namespace {

int eccentricity(const Graph& g, int s, std::vector<int>& dist, std::vector<int>& q) {
    std::fill(dist.begin(), dist.end(), -1);
    q.clear();
    dist[s] = 0;
    q.push_back(s);
    int ecc = 0;
    for (size_t h = 0; h < q.size(); ++h) {
        const int x = q[h];
        ecc = dist[x];
        for (int i = g.offs[x]; i < g.offs[x + 1]; ++i) {
            const int y = g.adj[i];
            if (dist[y] < 0) {
                dist[y] = dist[x] + 1;
                q.push_back(y);
            }
        }
    }
    return ecc;
}

int max_ecc(const Graph& g, const std::vector<int>& verts, Exec exec) {
    int best = 0;
#pragma omp parallel if (exec.parallel)
    {
        std::vector<int> dist(g.n), q;
        q.reserve(g.n);
        int local = 0;
#pragma omp for schedule(dynamic)
        for (long i = 0; i < static_cast<long>(verts.size()); ++i)
            local = std::max(local, eccentricity(g, verts[i], dist, q));
#pragma omp critical
        best = std::max(best, local);
    }
    return best;
}

}  // namespace

int diameter_all_sources(const Graph& g, Exec exec) {
    std::vector<int> all(g.n);
    for (int v = 0; v < g.n; ++v) all[v] = v;
    return max_ecc(g, all, exec);
}

DiameterResult graph_diameter(const Graph& g, Exec exec, int bfs_budget) {
    DiameterResult r;
    if (g.n <= 1) return r;
    std::vector<int> dist(g.n), q;
    q.reserve(g.n);
    auto farthest = [&](int s) {
        eccentricity(g, s, dist, q);
        ++r.bfs_runs;
        int best = s;
        for (int v = 0; v < g.n; ++v)
            if (dist[v] > dist[best]) best = v;
        return best;
    };
    const int a = farthest(0);
    const int b = farthest(a);
    const std::vector<int> da = dist;
    int lb = da[b];
    for (int v = 0; v < g.n; ++v)
        if (da[v] < 0) throw Error(ErrorCode::Disconnected, "graph is disconnected");
    // middle vertex of the a-b path
    int u = b;
    while (da[u] > lb / 2) {
        for (int i = g.offs[u]; i < g.offs[u + 1]; ++i)
            if (da[g.adj[i]] == da[u] - 1) {
                u = g.adj[i];
                break;
            }
    }
    const int ecc_u = eccentricity(g, u, dist, q);
    ++r.bfs_runs;
    lb = std::max(lb, ecc_u);
    std::vector<std::vector<int>> levels(ecc_u + 1);
    for (int v = 0; v < g.n; ++v) levels[dist[v]].push_back(v);
    int ub = 2 * ecc_u;
    int i = ecc_u;
    r.exact = true;
    while (ub > lb && i > 0) {
        if (r.bfs_runs + static_cast<int>(levels[i].size()) > bfs_budget) {
            r.exact = false;
            break;
        }
        const int bi = max_ecc(g, levels[i], exec);
        r.bfs_runs += static_cast<int>(levels[i].size());
        lb = std::max(lb, bi);
        if (lb > 2 * (i - 1)) break;
        ub = 2 * (i - 1);
        --i;
    }
    r.diameter = lb;
    return r;
}

namespace {

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

DiameterGrowth diameter_growth(const IgsSpec& spec, int m_max, Exec exec, std::int64_t exact_limit) {
    if (m_max < 2) throw Error(ErrorCode::InsufficientLevels, "diameter growth needs m_max >= 2");
    DiameterGrowth r;
    for (int m = 1; m <= m_max; ++m) {
        if (ipow(spec.num_symbols(), m) > exact_limit * 10) break;
        const ReplacementGraph g = build_graph(spec, m);
        DiameterResult d = graph_diameter(g, exec, g.n <= exact_limit ? 4000 : 2);
        r.levels.push_back(m);
        r.diam.push_back(d.diameter);
        r.exact.push_back(d.exact);
    }
    // Fit on first differences, which removes the additive offset in
    // diam(G_m) ~ C L^m - c.
    std::vector<double> xs, ys;
    int prev = 0;
    for (size_t i = 0; i < r.levels.size(); ++i) {
        const int delta = r.diam[i] - prev;
        prev = r.diam[i];
        if (delta > 0) {
            xs.push_back(r.levels[i]);
            ys.push_back(std::log(static_cast<double>(delta)));
        }
    }
    if (xs.size() >= 3) {
        xs.erase(xs.begin());
        ys.erase(ys.begin());
    }
    r.fitted_l_star = xs.size() >= 2 ? std::exp(fit_slope(xs, ys)) : 0.0;
    r.l_star_declared = spec.scale > 0;
    r.l_star = r.l_star_declared ? spec.scale : r.fitted_l_star;
    for (size_t i = 0; i < r.levels.size(); ++i)
        if (r.l_star > 0) r.c_diam = std::max(r.c_diam, r.diam[i] / std::pow(r.l_star, r.levels[i]));
    return r;
}

FaceSeparation face_separation(const IgsSpec& spec, int m_max, double l_star) {
    FaceSeparation r;
    r.l_star = l_star > 0 ? l_star : (spec.scale > 0 ? spec.scale : 0);
    const FaceTable ft = face_table(spec);
    r.pairs = antipodal_face_pairs(spec);
    if (r.pairs.empty()) throw Error(ErrorCode::Infeasible, "no antipodal pairs");
    r.distance.assign(r.pairs.size(), {});
    r.c1 = std::numeric_limits<double>::infinity();
    for (int m = 1; m <= m_max; ++m) {
        const ReplacementGraph g = build_graph(spec, m);
        int mn = std::numeric_limits<int>::max();
        for (size_t p = 0; p < r.pairs.size(); ++p) {
            const int ka = ft.key_of[r.pairs[p].first], kb = ft.key_of[r.pairs[p].second];
            const auto A = boundary_set(spec, m, face_key_type(ka), face_key_star(ka));
            const auto B = boundary_set(spec, m, face_key_type(kb), face_key_star(kb));
            const int d = static_cast<int>(graph_distance(g, A, B).distance);
            r.distance[p].push_back(d);
            mn = std::min(mn, d);
            if (r.l_star > 0) r.c1 = std::min(r.c1, d / std::pow(r.l_star, m));
        }
        r.min_distance.push_back(mn);
    }
    if (r.l_star <= 0) r.c1 = 0;
    return r;
}

CentralWord central_word(const IgsSpec& spec, int m_star, int max_level) {
    const int S = spec.num_symbols();
    auto fast_candidate = [&](int m) -> std::optional<Word> {
        if (spec.family == Family::Cubical && spec.cubical && m >= 2) {
            const CubicalInfo& ci = *spec.cubical;
            int lo = -1, hi = -1;
            for (int a = 0; a < S; ++a) {
                bool all1 = ci.sheet[a] == 1, allL = ci.sheet[a] == 1;
                for (int c : ci.coords[a]) {
                    all1 = all1 && c == 1;
                    allL = allL && c == ci.L;
                }
                if (all1) lo = a;
                if (allL) hi = a;
            }
            if (lo < 0 || hi < 0) return std::nullopt;
            Word w(m, hi);
            w[0] = lo;
            return w;
        }
        if (spec.family == Family::Gasket || spec.family == Family::Pentagon) {
            Word w(m, 2);
            w[0] = 0;
            return w;
        }
        return std::nullopt;
    };
    for (int m = 1; m <= max_level; ++m) {
        if (ipow(S, m) > 20000000) break;
        const ReplacementGraph g = build_graph(spec, m);
        const auto dist = bfs_distances(g, boundary_union(spec, m));
        if (auto w = fast_candidate(m)) {
            const int id = encode_word(*w, S);
            if (dist[id] > m_star) return {*w, m, dist[id], true};
        }
        for (int v = 0; v < g.n; ++v)
            if (dist[v] > m_star) return {decode_word(v, S, m), m, dist[v], false};
    }
    throw Error(ErrorCode::NotFound, "no central word within the level budget");
}

GeometryReport geometry_report(const IgsSpec& spec, int m_max, Exec exec) {
    GeometryReport r;
    r.probe = bounded_geometry_probe(spec, std::max(2, m_max));
    r.diam = diameter_growth(spec, std::max(2, m_max), exec);
    r.l_star = r.diam.l_star;
    r.faces = face_separation(spec, std::min(m_max, r.diam.levels.back()), r.l_star);
    r.m_star = r.probe.m_star_estimate;
    try {
        r.central = central_word(spec, r.m_star);
        r.central_found = true;
    } catch (const Error&) {
        r.central_found = false;
    }
    r.d_f = r.l_star > 1 ? std::log(static_cast<double>(spec.num_symbols())) / std::log(r.l_star) : 0.0;
    return r;
}

}  // namespace igs
