#include "igs/graph.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace igs {

// ---------------------------------------------------------------- Graph

void Graph::finalize() {
    offs.assign(n + 1, 0);
    for (const auto& e : edges) {
        ++offs[e[0] + 1];
        ++offs[e[1] + 1];
    }
    for (int i = 0; i < n; ++i) offs[i + 1] += offs[i];
    adj.assign(offs[n], 0);
    adj_edge.assign(offs[n], 0);
    std::vector<int> pos(offs.begin(), offs.end() - 1);
    for (int k = 0; k < num_edges(); ++k) {
        const auto& e = edges[k];
        adj[pos[e[0]]] = e[1];
        adj_edge[pos[e[0]]++] = k;
        adj[pos[e[1]]] = e[0];
        adj_edge[pos[e[1]]++] = k;
    }
    // Sort each neighbor list by id so traversals are deterministic.
    std::vector<std::pair<int, int>> tmp;
    for (int v = 0; v < n; ++v) {
        tmp.clear();
        for (int i = offs[v]; i < offs[v + 1]; ++i) tmp.emplace_back(adj[i], adj_edge[i]);
        std::sort(tmp.begin(), tmp.end());
        for (int i = offs[v]; i < offs[v + 1]; ++i) {
            adj[i] = tmp[i - offs[v]].first;
            adj_edge[i] = tmp[i - offs[v]].second;
        }
    }
}

int Graph::max_degree() const {
    int d = 0;
    for (int v = 0; v < n; ++v) d = std::max(d, degree(v));
    return d;
}

int Graph::find_edge(int a, int b) const {
    auto first = adj.begin() + offs[a], last = adj.begin() + offs[a + 1];
    auto it = std::lower_bound(first, last, b);
    if (it == last || *it != b) return -1;
    return adj_edge[it - adj.begin()];
}

// ---------------------------------------------------------------- words

std::int64_t ipow(std::int64_t b, int e) {
    std::int64_t r = 1;
    while (e-- > 0) r *= b;
    return r;
}

int encode_word(const Word& w, int S) {
    std::int64_t id = 0;
    for (int x : w) id = id * S + x;
    return static_cast<int>(id);
}

Word decode_word(int id, int S, int m) {
    Word w(m);
    for (int i = m - 1; i >= 0; --i) {
        w[i] = id % S;
        id /= S;
    }
    return w;
}

int word_meet(const Word& w, const Word& v) {
    if (w.size() != v.size()) throw Error(ErrorCode::LevelMismatch, "words of different length");
    for (size_t i = 0; i < w.size(); ++i)
        if (w[i] != v[i]) return static_cast<int>(i) + 1;
    throw Error(ErrorCode::EqualWords, "words are equal");
}

std::optional<std::pair<int, Star>> edge_query(const IgsSpec& spec, const Word& w, const Word& v) {
    if (w.size() != v.size() || w == v) return std::nullopt;
    const int k = word_meet(w, v) - 1;
    auto e = spec.edge_between(w[k], v[k]);
    if (!e) return std::nullopt;
    const auto [t, o] = *e;
    for (size_t i = k + 1; i < w.size(); ++i) {
        const bool ok = (o > 0) ? spec.glued(t, w[i], v[i]) : spec.glued(t, v[i], w[i]);
        if (!ok) return std::nullopt;
    }
    return e;
}

ReplacementGraph build_graph(const IgsSpec& spec, int m, const BuildOptions& opts) {
    if (m < 1) throw Error(ErrorCode::LevelMismatch, "level must be >= 1");
    const int S = spec.num_symbols();
    if (ipow(S, m) > opts.max_vertices)
        throw Error(ErrorCode::BudgetExceeded, "|S|^m = " + std::to_string(ipow(S, m)) + " exceeds the vertex budget");
    ReplacementGraph g;
    g.S = S;
    g.level = 1;
    g.n = S;
    for (const auto& e : spec.edges) {
        g.edges.push_back({e.from, e.to});
        g.etype.push_back(static_cast<std::uint8_t>(e.type));
        g.meet.push_back(1);
    }
    for (int k = 2; k <= m; ++k) {
        ReplacementGraph h;
        h.S = S;
        h.level = k;
        h.n = g.n * S;
        std::size_t cap = static_cast<std::size_t>(g.n) * spec.edges.size();
        for (std::size_t i = 0; i < g.edges.size(); ++i) cap += spec.gluings[g.etype[i]].size();
        h.edges.reserve(cap);
        h.etype.reserve(cap);
        h.meet.reserve(cap);
        for (int u = 0; u < g.n; ++u)
            for (const auto& e : spec.edges) {
                h.edges.push_back({u * S + e.from, u * S + e.to});
                h.etype.push_back(static_cast<std::uint8_t>(e.type));
                h.meet.push_back(static_cast<std::uint8_t>(k));
            }
        for (std::size_t i = 0; i < g.edges.size(); ++i) {
            const int x = g.edges[i][0], y = g.edges[i][1], t = g.etype[i];
            for (const auto& [a, b] : spec.gluings[t]) {
                h.edges.push_back({x * S + a, y * S + b});
                h.etype.push_back(static_cast<std::uint8_t>(t));
                h.meet.push_back(g.meet[i]);
            }
        }
        g = std::move(h);
    }
    g.finalize();
    return g;
}

std::vector<int> boundary_set(const IgsSpec& spec, int m, int t, Star star) {
    const auto side = spec.side(t, star);
    const int S = spec.num_symbols();
    std::vector<int> cur = side;
    for (int k = 2; k <= m; ++k) {
        std::vector<int> nxt;
        nxt.reserve(cur.size() * side.size());
        for (int u : cur)
            for (int a : side) nxt.push_back(u * S + a);
        cur.swap(nxt);
    }
    std::sort(cur.begin(), cur.end());
    return cur;
}

std::vector<int> boundary_union(const IgsSpec& spec, int m) {
    std::vector<int> out;
    for (int t = 0; t < spec.num_types(); ++t)
        for (Star s : {-1, +1}) {
            auto b = boundary_set(spec, m, t, s);
            out.insert(out.end(), b.begin(), b.end());
        }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------- distances

std::vector<int> bfs_distances(const Graph& g, const std::vector<int>& sources) {
    std::vector<int> dist(g.n, -1);
    std::vector<int> q;
    q.reserve(g.n);
    for (int s : sources)
        if (dist[s] < 0) {
            dist[s] = 0;
            q.push_back(s);
        }
    for (std::size_t h = 0; h < q.size(); ++h) {
        const int x = q[h];
        for (int i = g.offs[x]; i < g.offs[x + 1]; ++i) {
            const int y = g.adj[i];
            if (dist[y] < 0) {
                dist[y] = dist[x] + 1;
                q.push_back(y);
            }
        }
    }
    return dist;
}

void dijkstra(const Graph& g, const std::vector<int>& sources, const std::vector<double>& w,
              std::vector<double>* dist_out, std::vector<int>* pred_out) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double>& dist = *dist_out;
    std::vector<int>& pred = *pred_out;
    dist.assign(g.n, inf);
    pred.assign(g.n, -1);
    std::vector<char> settled(g.n, 0);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    for (int s : sources)
        if (w[s] < dist[s]) {
            dist[s] = w[s];
            pq.push({dist[s], s});
        }
    while (!pq.empty()) {
        auto [d, x] = pq.top();
        pq.pop();
        if (d > dist[x] || settled[x]) continue;
        settled[x] = 1;
        for (int i = g.offs[x]; i < g.offs[x + 1]; ++i) {
            const int y = g.adj[i];
            const double nd = d + w[y];
            if (nd < dist[y]) {
                dist[y] = nd;
                pred[y] = x;
                pq.push({nd, y});
            } else if (nd == dist[y] && !settled[y] && pred[y] >= 0 && x < pred[y]) {
                // settled vertices keep their predecessor: with zero weights
                // a late tie-break could close a cycle
                pred[y] = x;
            }
        }
    }
}

DistanceResult graph_distance(const Graph& g, const std::vector<int>& sources,
                              const std::vector<int>& targets, const std::vector<double>* weights) {
    if (sources.empty() || targets.empty()) throw Error(ErrorCode::Infeasible, "empty source or target set");
    DistanceResult r;
    if (!weights) {
        auto dist = bfs_distances(g, sources);
        int best = -1;
        for (int t : targets)
            if (dist[t] >= 0 && (best < 0 || dist[t] < dist[best] || (dist[t] == dist[best] && t < best)))
                best = t;
        if (best < 0) throw Error(ErrorCode::Disconnected, "targets unreachable");
        r.distance = dist[best];
        int x = best;
        r.path.push_back(x);
        while (dist[x] > 0) {
            int p = -1;
            for (int i = g.offs[x]; i < g.offs[x + 1]; ++i)
                if (dist[g.adj[i]] == dist[x] - 1) {
                    p = g.adj[i];
                    break;  // neighbors are sorted, so this is the smallest id
                }
            x = p;
            r.path.push_back(x);
        }
        std::reverse(r.path.begin(), r.path.end());
        return r;
    }
    std::vector<double> dist;
    std::vector<int> pred;
    dijkstra(g, sources, *weights, &dist, &pred);
    int best = -1;
    for (int t : targets)
        if (dist[t] < std::numeric_limits<double>::infinity() &&
            (best < 0 || dist[t] < dist[best] || (dist[t] == dist[best] && t < best)))
            best = t;
    if (best < 0) throw Error(ErrorCode::Disconnected, "targets unreachable");
    r.distance = dist[best];
    for (int x = best; x >= 0; x = pred[x]) r.path.push_back(x);
    std::reverse(r.path.begin(), r.path.end());
    return r;
}

// ---------------------------------------------------------------- lifts

LiftedMap lift_perm(const std::vector<int>& perm, int S, int m) {
    LiftedMap L;
    L.S = S;
    L.level = m;
    L.perm = perm;
    std::vector<int> t = perm;
    for (int k = 2; k <= m; ++k) {
        std::vector<int> nt(static_cast<std::size_t>(t.size()) * S);
        for (std::size_t u = 0; u < t.size(); ++u)
            for (int a = 0; a < S; ++a) nt[u * S + a] = t[u] * S + perm[a];
        t.swap(nt);
    }
    L.table = std::move(t);
    return L;
}

LiftedMap lift_map(const SymbolMap& base, int S, int m) {
    LiftedMap L = lift_perm(base.perm, S, m);
    L.side = base.side;
    return L;
}

Side LiftedMap::classify(int v) const {
    if (side.empty()) return Side::Delta;
    const Word w = decode_word(v, S, level);
    for (int x : w)
        if (side[x] != Side::Delta) return side[x];
    return Side::Delta;
}

// ---------------------------------------------------------------- foldings

namespace {

std::vector<int> apply_perm_word(const std::vector<int>& perm, int v, int S, int m) {
    Word w = decode_word(v, S, m);
    for (int& x : w) x = perm[x];
    return {encode_word(w, S)};
}

// Folding of G_{n+1} onto target . W_n for a single-letter target.
std::vector<int> fold_one(const IgsSpec& spec, const Symmetries& sym, int target, int n) {
    const int S = spec.num_symbols();
    const int cell = static_cast<int>(ipow(S, n));
    std::vector<int> out(static_cast<std::size_t>(cell) * S);
    if (spec.family == Family::Cubical) {
        const CubicalInfo& ci = *spec.cubical;
        for (int a = 0; a < S; ++a) {
            std::vector<int> perm(S);
            for (int x = 0; x < S; ++x) perm[x] = x;
            for (int j = 0; j < ci.d; ++j)
                if ((ci.coords[target][j] - ci.coords[a][j]) % 2 != 0)
                    perm = compose(cubical_map(spec, 'e', j).perm, perm);
            const LiftedMap lm = lift_perm(perm, S, n);
            for (int v = 0; v < cell; ++v) out[static_cast<std::size_t>(a) * cell + v] = target * cell + lm.table[v];
        }
        return out;
    }
    if (spec.family != Family::Gasket && spec.family != Family::Pentagon)
        throw Error(ErrorCode::UnsupportedClass, "foldings exist only for cubical, gasket and pentagon systems");
    if (!sym.has_all_flippings()) throw Error(ErrorCode::MissingFlippingSymmetry, "folding needs flippings");
    std::vector<int> nbr(S, 0);
    nbr[target] = 1;
    for (const auto& e : spec.edges) {
        if (e.from == target) nbr[e.to] = 1;
        if (e.to == target) nbr[e.from] = 1;
    }
    // First fold onto C u Delta of a reflection whose kept half only holds the
    // target and its neighbors.
    std::vector<int> stage(static_cast<std::size_t>(cell) * S);
    for (std::size_t v = 0; v < stage.size(); ++v) stage[v] = static_cast<int>(v);
    if (std::count(nbr.begin(), nbr.end(), 1) < S) {
        const SymbolMap* pick = nullptr;
        for (int ri : sym.reflections) {
            const SymbolMap& r = sym.automorphisms[ri];
            bool ok = r.side[target] != Side::D;
            for (int x = 0; x < S && ok; ++x)
                if (r.side[x] != Side::D && !nbr[x]) ok = false;
            if (ok) {
                pick = &r;
                break;
            }
        }
        if (!pick) throw Error(ErrorCode::UnsupportedClass, "no reflection folding toward the target");
        const LiftedMap lm = lift_map(*pick, S, n + 1);
        for (std::size_t v = 0; v < stage.size(); ++v)
            if (lm.classify(static_cast<int>(v)) == Side::D) stage[v] = lm.table[v];
    }
    std::vector<LiftedMap> flips(S);
    for (int j = 0; j < S; ++j) {
        if (j == target || !nbr[j]) continue;
        const int t = spec.edge_between(target, j)->first;
        flips[j] = lift_perm(sym.flip(t).perm, S, n);
    }
    for (std::size_t v = 0; v < stage.size(); ++v) {
        const int u = stage[v];
        const int j = u / cell, rest = u % cell;
        if (j == target) out[v] = u;
        else if (nbr[j]) out[v] = target * cell + (n > 0 ? flips[j].table[rest] : 0);
        else throw Error(ErrorCode::UnsupportedClass, "reflection stage left a non-neighbor cell");
    }
    return out;
}

}  // namespace

std::vector<int> fold_onto_cell(const IgsSpec& spec, const Symmetries& sym, const Word& target, int n) {
    if (target.empty()) throw Error(ErrorCode::LevelMismatch, "empty target");
    if (spec.family == Family::Generic)
        throw Error(ErrorCode::UnsupportedClass, "foldings exist only for cubical, gasket and pentagon systems");
    const int S = spec.num_symbols();
    const int k = static_cast<int>(target.size());
    std::vector<int> first = fold_one(spec, sym, target[0], n + k - 1);
    if (k == 1) return first;
    const Word rest(target.begin() + 1, target.end());
    const std::vector<int> inner = fold_onto_cell(spec, sym, rest, n);
    const int cell = static_cast<int>(ipow(S, n + k - 1));
    for (auto& v : first) v = target[0] * cell + inner[v % cell];
    return first;
}

std::vector<int> fold_path(const IgsSpec& spec, const Symmetries& sym, const std::vector<int>& theta, int n,
                           int m) {
    if (!sym.has_all_flippings()) throw Error(ErrorCode::MissingFlippingSymmetry, "every type needs a flipping");
    const int S = spec.num_symbols();
    const int cell = static_cast<int>(ipow(S, m));
    std::vector<int> out;
    auto push = [&](int v) {
        if (out.empty() || out.back() != v) out.push_back(v);
    };
    std::vector<int> eta(S);
    for (int x = 0; x < S; ++x) eta[x] = x;
    int prev_prefix = -1;
    for (int w : theta) {
        const int pre = w / cell, suf = w % cell;
        if (prev_prefix >= 0 && pre != prev_prefix) {
            auto e = edge_query(spec, decode_word(prev_prefix, S, n), decode_word(pre, S, n));
            if (!e) throw Error(ErrorCode::VerificationFailure, "projected path is not a path");
            eta = compose(eta, sym.flip(e->first).perm);
        }
        prev_prefix = pre;
        push(apply_perm_word(eta, suf, S, m)[0]);
    }
    return out;
}

CubicalCoordinates cubical_coordinates(const IgsSpec& spec, const Word& w) {
    if (!spec.cubical) throw Error(ErrorCode::NotCubical, "spec is not cubical");
    const CubicalInfo& ci = *spec.cubical;
    CubicalCoordinates c;
    c.x.assign(ci.d, 0);
    for (int x : w) {
        for (int i = 0; i < ci.d; ++i) c.x[i] = c.x[i] * ci.L + (ci.coords[x][i] - 1);
        c.sheets.push_back(ci.sheet[x]);
    }
    return c;
}

// ---------------------------------------------------------------- export

namespace {
const char* kPalette[] = {"red", "blue", "darkgreen", "orange", "purple", "brown", "magenta", "cyan"};
}

std::string export_dot(const IgsSpec& spec, const ReplacementGraph& g) {
    std::ostringstream os;
    os << "digraph G" << g.level << " {\n";
    for (int v = 0; v < g.n; ++v)
        os << "  \"" << spec.word_label(decode_word(v, g.S, g.level)) << "\";\n";
    for (int k = 0; k < g.num_edges(); ++k) {
        os << "  \"" << spec.word_label(decode_word(g.edges[k][0], g.S, g.level)) << "\" -> \""
           << spec.word_label(decode_word(g.edges[k][1], g.S, g.level)) << "\" [label=\""
           << spec.types[g.etype[k]] << "\", color=" << kPalette[g.etype[k] % 8] << "];\n";
    }
    os << "}\n";
    return os.str();
}

std::string export_edge_csv(const IgsSpec& spec, const ReplacementGraph& g) {
    std::ostringstream os;
    os << "w,v,type,orientation,meet\n";
    for (int k = 0; k < g.num_edges(); ++k)
        os << spec.word_label(decode_word(g.edges[k][0], g.S, g.level)) << ','
           << spec.word_label(decode_word(g.edges[k][1], g.S, g.level)) << ',' << spec.types[g.etype[k]]
           << ",+," << int(g.meet[k]) << '\n';
    return os.str();
}

std::string export_json_adjacency(const IgsSpec& spec, const ReplacementGraph& g) {
    nlohmann::json doc;
    doc["level"] = g.level;
    std::vector<std::string> labels(g.n);
    for (int v = 0; v < g.n; ++v) labels[v] = spec.word_label(decode_word(v, g.S, g.level));
    doc["vertices"] = labels;
    nlohmann::json adj = nlohmann::json::array();
    for (int v = 0; v < g.n; ++v) {
        nlohmann::json row = nlohmann::json::array();
        for (int i = g.offs[v]; i < g.offs[v + 1]; ++i) {
            const int k = g.adj_edge[i];
            row.push_back({{"v", labels[g.adj[i]]},
                           {"type", spec.types[g.etype[k]]},
                           {"orientation", g.edges[k][0] == v ? "+" : "-"},
                           {"meet", int(g.meet[k])}});
        }
        adj.push_back(row);
    }
    doc["adjacency"] = adj;
    return doc.dump(1) + "\n";
}

std::string export_cubical_csv(const IgsSpec& spec, const ReplacementGraph& g) {
    if (!spec.cubical) throw Error(ErrorCode::NotCubical, "spec is not cubical");
    std::ostringstream os;
    os << "word";
    for (int i = 1; i <= spec.cubical->d; ++i) os << ",x_" << i;
    os << ",sheet\n";
    for (int v = 0; v < g.n; ++v) {
        const Word w = decode_word(v, g.S, g.level);
        const auto c = cubical_coordinates(spec, w);
        os << spec.word_label(w);
        for (auto x : c.x) os << ',' << x;
        os << ',';
        for (size_t i = 0; i < c.sheets.size(); ++i) os << (i ? "." : "") << c.sheets[i];
        os << '\n';
    }
    return os.str();
}

}  // namespace igs
