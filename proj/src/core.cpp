#include "igs/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace igs {

using json = nlohmann::json;

const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::SchemaViolation: return "schema-violation";
        case ErrorCode::SemanticViolation: return "semantic-violation";
        case ErrorCode::UnknownName: return "unknown-name";
        case ErrorCode::CubicalViolation: return "cubical-violation";
        case ErrorCode::SearchBudgetExceeded: return "search-budget-exceeded";
        case ErrorCode::EqualWords: return "equal-words";
        case ErrorCode::LevelMismatch: return "level-mismatch";
        case ErrorCode::BudgetExceeded: return "budget-exceeded";
        case ErrorCode::Disconnected: return "disconnected";
        case ErrorCode::UnsupportedClass: return "unsupported-class";
        case ErrorCode::MissingFlippingSymmetry: return "missing-flipping-symmetry";
        case ErrorCode::NotCubical: return "not-cubical";
        case ErrorCode::NotFound: return "not-found-within-budget";
        case ErrorCode::NoConvergence: return "no-convergence";
        case ErrorCode::InvalidExponent: return "invalid-exponent";
        case ErrorCode::Infeasible: return "infeasible";
        case ErrorCode::ExponentMismatch: return "exponent-mismatch";
        case ErrorCode::TooLarge: return "too-large";
        case ErrorCode::HypothesisViolation: return "hypothesis-violation";
        case ErrorCode::VerificationFailure: return "verification-failure";
        case ErrorCode::TypingIncomplete: return "typing-incomplete";
        case ErrorCode::InsufficientLevels: return "insufficient-levels";
        case ErrorCode::Io: return "io-error";
    }
    return "error";
}

// ---------------------------------------------------------------- IgsSpec

std::vector<int> IgsSpec::side(int t, Star star) const {
    std::vector<int> out;
    for (const auto& [a, b] : gluings.at(t)) out.push_back(star > 0 ? a : b);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool IgsSpec::glued(int t, int a, int b) const {
    for (const auto& [x, y] : gluings[t])
        if (x == a && y == b) return true;
    return false;
}

std::optional<std::pair<int, Star>> IgsSpec::edge_between(int a, int b) const {
    for (const auto& e : edges) {
        if (e.from == a && e.to == b) return std::make_pair(e.type, +1);
        if (e.from == b && e.to == a) return std::make_pair(e.type, -1);
    }
    return std::nullopt;
}

int IgsSpec::type_index(const std::string& n) const {
    for (int i = 0; i < num_types(); ++i)
        if (types[i] == n) return i;
    return -1;
}

int IgsSpec::symbol_index(const std::string& label) const {
    for (int i = 0; i < num_symbols(); ++i)
        if (symbols[i] == label) return i;
    return -1;
}

bool IgsSpec::single_char_labels() const {
    return std::all_of(symbols.begin(), symbols.end(),
                       [](const std::string& s) { return s.size() == 1; });
}

std::string IgsSpec::word_label(const std::vector<int>& word) const {
    std::string out;
    const bool compact = single_char_labels();
    for (size_t i = 0; i < word.size(); ++i) {
        if (!compact && i) out += '.';
        out += symbols.at(word[i]);
    }
    return out;
}

std::vector<int> IgsSpec::parse_word(const std::string& text) const {
    std::vector<int> word;
    if (single_char_labels()) {
        for (char ch : text) {
            int id = symbol_index(std::string(1, ch));
            if (id < 0) throw Error(ErrorCode::UnknownName, "symbol '" + std::string(1, ch) + "'");
            word.push_back(id);
        }
    } else {
        std::stringstream ss(text);
        std::string tok;
        while (std::getline(ss, tok, '.')) {
            int id = symbol_index(tok);
            if (id < 0) throw Error(ErrorCode::UnknownName, "symbol '" + tok + "'");
            word.push_back(id);
        }
    }
    if (word.empty()) throw Error(ErrorCode::LevelMismatch, "empty word");
    return word;
}

// ---------------------------------------------------------------- parsing

namespace {

void require(bool cond, ErrorCode c, const std::string& msg) {
    if (!cond) throw Error(c, msg);
}

void check_semantics(const IgsSpec& s) {
    std::set<std::pair<int, int>> seen;
    std::vector<int> used(s.num_types(), 0);
    for (const auto& e : s.edges) {
        require(e.from != e.to, ErrorCode::SemanticViolation,
                "self-loop at symbol " + s.symbols[e.from]);
        require(!seen.count({e.from, e.to}), ErrorCode::SemanticViolation,
                "duplicate edge " + s.symbols[e.from] + "->" + s.symbols[e.to]);
        require(!seen.count({e.to, e.from}), ErrorCode::SemanticViolation,
                "both orientations of " + s.symbols[e.from] + "," + s.symbols[e.to]);
        seen.insert({e.from, e.to});
        used[e.type] = 1;
    }
    for (int t = 0; t < s.num_types(); ++t) {
        require(used[t], ErrorCode::SemanticViolation, "type '" + s.types[t] + "' has no edge");
        require(!s.gluings[t].empty(), ErrorCode::SemanticViolation,
                "empty gluing list for type '" + s.types[t] + "'");
        std::set<std::pair<int, int>> g(s.gluings[t].begin(), s.gluings[t].end());
        require(g.size() == s.gluings[t].size(), ErrorCode::SemanticViolation,
                "duplicate gluing pair for type '" + s.types[t] + "'");
    }
}

}  // namespace

IgsSpec parse_igs_spec(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("malformed document: ") + e.what());
    }
    require(doc.is_object(), ErrorCode::SchemaViolation, "top level must be an object");
    for (const char* key : {"symbols", "types", "edges", "gluings"})
        require(doc.contains(key), ErrorCode::SchemaViolation, std::string("missing field '") + key + "'");
    require(doc["symbols"].is_array() && !doc["symbols"].empty(), ErrorCode::SchemaViolation,
            "'symbols' must be a nonempty array");
    require(doc["types"].is_array() && !doc["types"].empty(), ErrorCode::SchemaViolation,
            "'types' must be a nonempty array");
    require(doc["edges"].is_array(), ErrorCode::SchemaViolation, "'edges' must be an array");
    require(doc["gluings"].is_object(), ErrorCode::SchemaViolation, "'gluings' must be an object");

    IgsSpec s;
    for (const auto& v : doc["symbols"]) {
        require(v.is_string(), ErrorCode::SchemaViolation, "symbol labels must be strings");
        s.symbols.push_back(v.get<std::string>());
    }
    for (const auto& v : doc["types"]) {
        require(v.is_string(), ErrorCode::SchemaViolation, "type names must be strings");
        s.types.push_back(v.get<std::string>());
    }
    {
        std::set<std::string> a(s.symbols.begin(), s.symbols.end());
        require(a.size() == s.symbols.size(), ErrorCode::SemanticViolation, "duplicate symbol label");
        std::set<std::string> b(s.types.begin(), s.types.end());
        require(b.size() == s.types.size(), ErrorCode::SemanticViolation, "duplicate type name");
    }
    auto sym = [&](const json& v) {
        require(v.is_string(), ErrorCode::SchemaViolation, "symbol references must be strings");
        int id = s.symbol_index(v.get<std::string>());
        require(id >= 0, ErrorCode::SemanticViolation, "unknown symbol '" + v.get<std::string>() + "'");
        return id;
    };
    for (const auto& e : doc["edges"]) {
        require(e.is_object() && e.contains("from") && e.contains("to") && e.contains("type"),
                ErrorCode::SchemaViolation, "edge needs from, to, type");
        SpecEdge se;
        se.from = sym(e["from"]);
        se.to = sym(e["to"]);
        require(e["type"].is_string(), ErrorCode::SchemaViolation, "edge type must be a string");
        se.type = s.type_index(e["type"].get<std::string>());
        require(se.type >= 0, ErrorCode::SemanticViolation,
                "unknown type '" + e["type"].get<std::string>() + "'");
        s.edges.push_back(se);
    }
    s.gluings.assign(s.types.size(), {});
    for (auto it = doc["gluings"].begin(); it != doc["gluings"].end(); ++it) {
        int t = s.type_index(it.key());
        require(t >= 0, ErrorCode::SemanticViolation, "gluing for unknown type '" + it.key() + "'");
        require(it.value().is_array(), ErrorCode::SchemaViolation, "gluing list must be an array");
        for (const auto& pr : it.value()) {
            require(pr.is_array() && pr.size() == 2, ErrorCode::SchemaViolation,
                    "gluing pair must be [from, to]");
            s.gluings[t].push_back({sym(pr[0]), sym(pr[1])});
        }
    }
    if (doc.contains("meta")) {
        const auto& m = doc["meta"];
        require(m.is_object(), ErrorCode::SchemaViolation, "'meta' must be an object");
        if (m.contains("name") && m["name"].is_string()) s.name = m["name"].get<std::string>();
        if (m.contains("notes") && m["notes"].is_string()) s.notes = m["notes"].get<std::string>();
        if (m.contains("scale")) {
            require(m["scale"].is_number_integer(), ErrorCode::SchemaViolation, "'meta.scale' must be an integer");
            s.scale = m["scale"].get<int>();
        }
    }
    check_semantics(s);
    return s;
}

IgsSpec load_igs_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_igs_spec(ss.str());
}

std::string serialize_igs_spec(const IgsSpec& s) {
    json doc;
    std::vector<std::string> syms = s.symbols;
    std::sort(syms.begin(), syms.end());
    doc["symbols"] = syms;
    doc["types"] = s.types;
    std::vector<std::tuple<std::string, std::string, std::string>> es;
    for (const auto& e : s.edges) es.emplace_back(s.symbols[e.from], s.symbols[e.to], s.types[e.type]);
    std::sort(es.begin(), es.end());
    doc["edges"] = json::array();
    for (const auto& [f, t, ty] : es) doc["edges"].push_back({{"from", f}, {"to", t}, {"type", ty}});
    doc["gluings"] = json::object();
    for (int t = 0; t < s.num_types(); ++t) {
        std::vector<std::pair<std::string, std::string>> ps;
        for (const auto& [a, b] : s.gluings[t]) ps.emplace_back(s.symbols[a], s.symbols[b]);
        std::sort(ps.begin(), ps.end());
        json arr = json::array();
        for (const auto& [a, b] : ps) arr.push_back({a, b});
        doc["gluings"][s.types[t]] = arr;
    }
    json meta = json::object();
    if (!s.name.empty()) meta["name"] = s.name;
    if (!s.notes.empty()) meta["notes"] = s.notes;
    if (s.scale > 0) meta["scale"] = s.scale;
    if (!meta.empty()) doc["meta"] = meta;
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------- validation

int b_count(const IgsSpec& s, int t, Star star, int w) {
    int c = 0;
    for (const auto& [a, b] : s.gluings[t])
        if ((star > 0 ? a : b) == w) ++c;
    return c;
}

int deg_count(const IgsSpec& s, int t, Star star, int w) {
    int c = 0;
    for (const auto& e : s.edges) {
        if (e.type != t) continue;
        if (star > 0 && e.from == w) ++c;
        if (star < 0 && e.to == w) ++c;
    }
    return c;
}

namespace {

bool level1_connected(const IgsSpec& s) {
    const int n = s.num_symbols();
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : s.edges) {
        adj[e.from].push_back(e.to);
        adj[e.to].push_back(e.from);
    }
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int cnt = 1;
    while (!q.empty()) {
        int x = q.front();
        q.pop();
        for (int y : adj[x])
            if (!seen[y]) {
                seen[y] = 1;
                ++cnt;
                q.push(y);
            }
    }
    return cnt == n;
}

bool disjoint_sorted(const std::vector<int>& a, const std::vector<int>& b) {
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) return false;
        if (a[i] < b[j]) ++i;
        else ++j;
    }
    return true;
}

}  // namespace

ValidationReport validate_structure(const IgsSpec& s) {
    ValidationReport r;
    const int T = s.num_types();
    for (int t = 0; t < T; ++t) {
        for (Star star : {-1, +1}) {
            int best = 0;
            for (int w = 0; w < s.num_symbols(); ++w) {
                const int b = b_count(s, t, star, w);
                const int d = deg_count(s, t, star, w);
                best = std::max(best, d);
                if (b > 1) {
                    r.gr1_ok = false;
                    r.gr1_witnesses.push_back({t, star, w});
                }
                if (b > 0 && d > 0) {
                    r.gr2_ok = false;
                    r.gr2_witnesses.push_back({t, star, w});
                }
            }
            r.c_deg += best;
        }
        const auto minus = s.side(t, -1), plus = s.side(t, +1);
        for (int w : minus)
            if (std::binary_search(plus.begin(), plus.end(), w)) {
                r.gr3_ok = false;
                r.gr3_witnesses.push_back({t, 0, w});
            }
    }
    r.connectivity_ok = level1_connected(s);

    const int K = 2 * T;
    std::vector<std::vector<int>> faces(K);
    for (int k = 0; k < K; ++k) faces[k] = s.side(face_key_type(k), face_key_star(k));
    for (int mask = 1; mask < (1 << K); ++mask) {
        std::vector<int> members;
        for (int k = 0; k < K; ++k)
            if (mask >> k & 1) members.push_back(k);
        if (members.size() < 2) continue;
        std::vector<int> inter = faces[members[0]];
        for (size_t i = 1; i < members.size() && !inter.empty(); ++i) {
            std::vector<int> tmp;
            std::set_intersection(inter.begin(), inter.end(), faces[members[i]].begin(),
                                  faces[members[i]].end(), std::back_inserter(tmp));
            inter.swap(tmp);
        }
        if (!inter.empty()) continue;
        bool has_pair = false;
        for (size_t i = 0; i < members.size() && !has_pair; ++i)
            for (size_t j = i + 1; j < members.size() && !has_pair; ++j)
                if (disjoint_sorted(faces[members[i]], faces[members[j]])) has_pair = true;
        if (!has_pair) {
            r.corner_ok = false;
            r.corner_witnesses.push_back(members);
        }
    }
    return r;
}

// ---------------------------------------------------------------- built-ins

namespace {

std::string cubical_type_name(int d, int j) {
    if (d == 2) return j == 0 ? "h" : "v";
    if (d == 3) return std::string(1, "xyz"[j]);
    return "t" + std::to_string(j + 1);
}

// Canonical order: highest coordinate most significant, then sheet.
bool cubical_less(const std::vector<int>& a, const std::vector<int>& b) {
    for (int i = static_cast<int>(a.size()) - 2; i >= 0; --i)
        if (a[i] != b[i]) return a[i] < b[i];
    return a.back() < b.back();
}

std::vector<int> cube_image(const std::vector<int>& c, char kind, int j, int k, int L) {
    std::vector<int> out = c;
    if (kind == 'e') {
        out[j] = L + 1 - c[j];
    } else if (kind == '+') {
        out[j] = c[k];
        out[k] = c[j];
    } else {
        out[k] = L + 1 - c[j];
        out[j] = L + 1 - c[k];
    }
    return out;
}

}  // namespace

IgsSpec cubical_system(int d, int L, int s, const std::vector<std::vector<int>>& kept_in,
                       const std::string& name) {
    if (d < 1 || L < 3 || s < 1)
        throw Error(ErrorCode::CubicalViolation, "parameters need d>=1, L>=3, s>=1");
    // Each tuple is (c_1..c_d, sheet); the sheet may be omitted.
    std::vector<std::vector<int>> kept;
    if (kept_in.empty()) {
        std::vector<int> c(d + 1, 1);
        while (true) {
            kept.push_back(c);
            int i = 0;
            while (i <= d) {
                const int lim = (i == d) ? s : L;
                if (++c[i] <= lim) break;
                c[i] = 1;
                ++i;
            }
            if (i > d) break;
        }
    } else {
        for (auto c : kept_in) {
            if (static_cast<int>(c.size()) == d) c.push_back(1);
            if (static_cast<int>(c.size()) != d + 1)
                throw Error(ErrorCode::CubicalViolation, "kept symbol with wrong arity");
            for (int i = 0; i < d; ++i)
                if (c[i] < 1 || c[i] > L) throw Error(ErrorCode::CubicalViolation, "coordinate out of range");
            if (c[d] < 1 || c[d] > s) throw Error(ErrorCode::CubicalViolation, "sheet out of range");
            kept.push_back(c);
        }
    }
    std::sort(kept.begin(), kept.end(), cubical_less);
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    std::map<std::vector<int>, int> id;
    for (size_t i = 0; i < kept.size(); ++i) id[kept[i]] = static_cast<int>(i);

    std::vector<std::string> failures;
    auto on_cube_edge = [&](const std::vector<int>& c, int j) {
        if (c[d] != 1) return false;
        for (int i = 0; i < d; ++i)
            if (i != j && c[i] != 1 && c[i] != L) return false;
        return true;
    };
    // C1: every symbol on an edge of the cube (sheet 1) is present.
    {
        std::vector<int> c(d, 1);
        bool c1 = true;
        std::function<void(int)> rec = [&](int i) {
            if (i == d) {
                std::vector<int> t = c;
                t.push_back(1);
                bool on = false;
                for (int j = 0; j < d; ++j) on = on || on_cube_edge(t, j);
                if (on && !id.count(t)) c1 = false;
                return;
            }
            for (int v = 1; v <= L; ++v) {
                c[i] = v;
                rec(i + 1);
            }
        };
        rec(0);
        if (!c1) failures.push_back("C1");
    }

    IgsSpec spec;
    spec.name = name;
    spec.family = Family::Cubical;
    spec.scale = L;
    for (size_t i = 0; i < kept.size(); ++i) spec.symbols.push_back(std::to_string(i));
    for (int j = 0; j < d; ++j) spec.types.push_back(cubical_type_name(d, j));
    spec.gluings.assign(d, {});
    CubicalInfo info;
    info.d = d;
    info.L = L;
    info.s = s;
    for (const auto& c : kept) {
        info.coords.emplace_back(c.begin(), c.begin() + d);
        info.sheet.push_back(c[d]);
    }
    const int n = static_cast<int>(kept.size());
    for (int j = 0; j < d; ++j) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                bool others = true;
                for (int i = 0; i < d; ++i)
                    if (i != j && kept[a][i] != kept[b][i]) others = false;
                if (!others) continue;
                if (kept[b][j] == kept[a][j] + 1) spec.edges.push_back({a, b, j});
                if (kept[a][j] == L && kept[b][j] == 1 && kept[a][d] == kept[b][d])
                    spec.gluings[j].push_back({a, b});
            }
    }
    std::sort(spec.edges.begin(), spec.edges.end(), [](const SpecEdge& x, const SpecEdge& y) {
        return std::tie(x.type, x.from, x.to) < std::tie(y.type, y.from, y.to);
    });
    // C2 and C3 hold by construction once C1 holds (edges and gluings are the
    // restriction of the full grid system), but check them explicitly.
    bool c2 = true, c3 = true;
    for (int j = 0; j < d && failures.empty(); ++j)
        for (int a = 0; a < n; ++a) {
            if (!on_cube_edge(kept[a], j)) continue;
            std::vector<int> up = kept[a];
            if (up[j] < L) {
                up[j] += 1;
                if (!id.count(up) || !spec.edge_between(a, id[up])) c2 = false;
            }
            if (kept[a][j] == L) {
                std::vector<int> lo = kept[a];
                lo[j] = 1;
                if (!id.count(lo) || !spec.glued(j, a, id[lo])) c3 = false;
            }
        }
    if (!c2) failures.push_back("C2");
    if (!c3) failures.push_back("C3");
    // C4: closure under the symmetry generators.
    bool c4 = true;
    for (int j = 0; j < d; ++j) {
        std::vector<std::tuple<char, int, int>> maps = {{'e', j, -1}};
        for (int k = j + 1; k < d; ++k) {
            maps.emplace_back('+', j, k);
            maps.emplace_back('-', j, k);
        }
        for (const auto& [kind, a, b] : maps)
            for (const auto& c : kept) {
                std::vector<int> img = cube_image(c, kind, a, b, L);
                if (!id.count(img)) c4 = false;
            }
    }
    if (!c4) failures.push_back("C4");
    for (int t = 0; t < d; ++t)
        if (spec.gluings[t].empty() && failures.empty()) failures.push_back("C3");
    if (!failures.empty()) {
        std::string msg;
        for (const auto& f : failures) msg += (msg.empty() ? "" : ",") + f;
        throw Error(ErrorCode::CubicalViolation, "conditions failing: " + msg);
    }
    spec.cubical = info;
    check_semantics(spec);
    if (!level1_connected(spec)) throw Error(ErrorCode::CubicalViolation, "level-1 graph disconnected");
    return spec;
}

namespace {

IgsSpec make_gasket() {
    IgsSpec s;
    s.name = "gasket";
    s.family = Family::Gasket;
    s.scale = 2;
    s.symbols = {"0", "1", "2"};
    s.types = {"a", "b", "c"};
    s.edges = {{0, 1, 0}, {1, 2, 1}, {0, 2, 2}};
    s.gluings = {{{1, 0}}, {{2, 1}}, {{2, 0}}};
    return s;
}

IgsSpec make_pentagon() {
    IgsSpec s;
    s.name = "pentagon";
    s.family = Family::Pentagon;
    s.scale = 2;
    s.symbols = {"0", "1", "2", "3", "4"};
    s.types = {"a", "b", "c", "d", "e"};
    s.edges = {{0, 1, 0}, {1, 2, 1}, {2, 3, 2}, {3, 4, 3}, {4, 0, 4}};
    s.gluings = {{{1, 0}, {2, 4}}, {{2, 1}, {3, 0}}, {{3, 2}, {4, 1}}, {{4, 3}, {0, 2}}, {{0, 4}, {1, 3}}};
    return s;
}

}  // namespace

std::vector<std::string> builtin_names() {
    return {"sierpinski-carpet", "menger-sponge", "pillow", "gasket", "pentagon", "interval", "cubical"};
}

IgsSpec builtin_system(const std::string& name, const std::vector<int>& params,
                       const std::vector<std::vector<int>>& kept) {
    if (name == "sierpinski-carpet") {
        std::vector<std::vector<int>> k;
        for (int y = 1; y <= 3; ++y)
            for (int x = 1; x <= 3; ++x)
                if (!(x == 2 && y == 2)) k.push_back({x, y, 1});
        return cubical_system(2, 3, 1, k, name);
    }
    if (name == "menger-sponge") {
        std::vector<std::vector<int>> k;
        for (int z = 1; z <= 3; ++z)
            for (int y = 1; y <= 3; ++y)
                for (int x = 1; x <= 3; ++x)
                    if ((x == 2) + (y == 2) + (z == 2) <= 1) k.push_back({x, y, z, 1});
        return cubical_system(3, 3, 1, k, name);
    }
    if (name == "pillow") {
        std::vector<std::vector<int>> k;
        for (int y = 1; y <= 3; ++y)
            for (int x = 1; x <= 3; ++x) k.push_back({x, y, 1});
        k.push_back({2, 2, 2});
        return cubical_system(2, 3, 2, k, name);
    }
    if (name == "gasket") return make_gasket();
    if (name == "pentagon") return make_pentagon();
    if (name == "interval") {
        const int L = params.empty() ? 3 : params[0];
        return cubical_system(1, L, 1, {}, "interval");
    }
    if (name == "cubical") {
        if (params.size() < 2) throw Error(ErrorCode::CubicalViolation, "cubical needs d and L");
        const int s = params.size() >= 3 ? params[2] : 1;
        return cubical_system(params[0], params[1], s, kept, "cubical");
    }
    throw Error(ErrorCode::UnknownName, "no built-in system '" + name + "'");
}

// ---------------------------------------------------------------- morphisms

namespace {

MorphismCheck check_morphism(const IgsSpec& a, const IgsSpec& b, const std::vector<int>& map, bool with_inverse) {
    MorphismCheck r;
    if (static_cast<int>(map.size()) != a.num_symbols()) {
        r.witness = "map is not total";
        return r;
    }
    for (int x : map)
        if (x < 0 || x >= b.num_symbols()) {
            r.witness = "map value out of range";
            return r;
        }
    for (const auto& e : a.edges) {
        const int fw = map[e.from], fv = map[e.to];
        const auto& I = a.gluings[e.type];
        const std::string tag = "edge (" + a.symbols[e.from] + "," + a.symbols[e.to] + ")";
        if (fw == fv) {
            for (const auto& [w2, v2] : I)
                if (map[w2] != map[v2]) {
                    r.witness = tag + " collapses but gluing (" + a.symbols[w2] + "," + a.symbols[v2] + ") does not";
                    return r;
                }
            continue;
        }
        auto eb = b.edge_between(fw, fv);
        if (!eb) {
            r.witness = tag + " maps to a non-edge";
            return r;
        }
        const auto [t2, o] = *eb;
        for (const auto& [w2, v2] : I) {
            const bool ok = (o > 0) ? b.glued(t2, map[w2], map[v2]) : b.glued(t2, map[v2], map[w2]);
            if (!ok) {
                r.witness = tag + " gluing (" + a.symbols[w2] + "," + a.symbols[v2] + ") not preserved";
                return r;
            }
        }
    }
    r.is_mapping = true;
    if (!with_inverse) return r;
    if (a.num_symbols() != b.num_symbols() || a.edges.size() != b.edges.size()) return r;
    std::vector<int> inv(b.num_symbols(), -1);
    for (int i = 0; i < a.num_symbols(); ++i) {
        if (inv[map[i]] >= 0) return r;
        inv[map[i]] = i;
    }
    MorphismCheck back = check_morphism(b, a, inv, false);
    // A bijective mapping never collapses, so with equal edge counts it is a
    // graph isomorphism; the inverse must be a mapping as well.
    r.is_isomorphism = back.is_mapping;
    if (!r.is_isomorphism) r.witness = "inverse: " + back.witness;
    return r;
}

}  // namespace

MorphismCheck check_igs_morphism(const IgsSpec& a, const IgsSpec& b, const std::vector<int>& map) {
    return check_morphism(a, b, map, true);
}

// ---------------------------------------------------------------- symmetries

bool SymbolMap::is_identity() const {
    for (size_t i = 0; i < perm.size(); ++i)
        if (perm[i] != static_cast<int>(i)) return false;
    return true;
}

bool Symmetries::has_all_flippings() const {
    return std::all_of(flipping.begin(), flipping.end(), [](int i) { return i >= 0; });
}

std::vector<int> compose(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out(b.size());
    for (size_t i = 0; i < b.size(); ++i) out[i] = a[b[i]];
    return out;
}

std::vector<int> inverse(const std::vector<int>& a) {
    std::vector<int> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[a[i]] = static_cast<int>(i);
    return out;
}

bool is_flipping(const IgsSpec& s, const std::vector<int>& perm, int t) {
    for (int w : s.side(t, +1))
        if (!s.glued(t, w, perm[w])) return false;
    for (int v : s.side(t, -1))
        if (!s.glued(t, perm[v], v)) return false;
    return true;
}

std::string reflection_defect(const IgsSpec& s, const std::vector<int>& perm,
                              const std::vector<Side>& side, bool* separative) {
    const int n = s.num_symbols();
    for (int x = 0; x < n; ++x) {
        if (perm[perm[x]] != x) return "not an involution";
        if ((perm[x] == x) != (side[x] == Side::Delta)) return "fixed set differs from Delta";
        if (side[x] == Side::C && side[perm[x]] != Side::D) return "alpha(C) != D";
    }
    auto in = [&](int x, Side a) { return side[x] == a || side[x] == Side::Delta; };
    bool sep = true;
    for (const auto& e : s.edges) {
        const Side sw = side[e.from], sv = side[e.to];
        const auto& I = s.gluings[e.type];
        if ((sw == Side::C && sv == Side::D) || (sw == Side::D && sv == Side::C)) {
            sep = false;
            if (perm[e.from] != e.to) return "D1: C-D edge not of the form x, alpha(x)";
            for (const auto& [w2, v2] : I)
                if (perm[w2] != v2) return "D5: gluing of C-D edge not matched by alpha";
        }
        if (sv == Side::Delta && sw != Side::Delta)
            for (int x : s.side(e.type, -1))
                if (!in(x, sw)) return "D2";
        if (sw == Side::Delta && sv != Side::Delta)
            for (int x : s.side(e.type, +1))
                if (!in(x, sv)) return "D3";
        if (sw == Side::Delta && sv == Side::Delta)
            for (const auto& [w2, v2] : I)
                if (side[w2] != side[v2]) return "D4";
    }
    if (separative) *separative = sep;
    return "";
}

bool find_reflection_partition(const IgsSpec& s, const std::vector<int>& perm,
                               std::vector<Side>* side_out, bool* separative) {
    const int n = s.num_symbols();
    bool any_moved = false;
    for (int x = 0; x < n; ++x) {
        if (perm[perm[x]] != x) return false;
        any_moved = any_moved || perm[x] != x;
    }
    if (!any_moved) return false;
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    for (const auto& e : s.edges) {
        const int x = e.from, y = e.to;
        if (perm[x] == x || perm[y] == y || perm[x] == y) continue;
        parent[find(x)] = find(y);
    }
    // Component representatives ordered by their smallest member.
    std::vector<int> comp_min(n, n);
    for (int x = 0; x < n; ++x)
        if (perm[x] != x) comp_min[find(x)] = std::min(comp_min[find(x)], x);
    std::vector<std::pair<int, int>> pairs;  // (component of smaller min, its mirror)
    std::set<int> done;
    for (int x = 0; x < n; ++x) {
        if (perm[x] == x) continue;
        const int c = find(x), c2 = find(perm[x]);
        if (c == c2) return false;
        if (done.count(c)) continue;
        done.insert(c);
        done.insert(c2);
        if (comp_min[c] < comp_min[c2]) pairs.emplace_back(c, c2);
        else pairs.emplace_back(c2, c);
    }
    std::sort(pairs.begin(), pairs.end(),
              [&](auto a, auto b) { return comp_min[a.first] < comp_min[b.first]; });
    if (pairs.size() > 16) return false;
    for (unsigned mask = 0; mask < (1u << pairs.size()); ++mask) {
        std::vector<Side> side(n, Side::Delta);
        for (size_t i = 0; i < pairs.size(); ++i) {
            const int cside = (mask >> i & 1) ? pairs[i].second : pairs[i].first;
            for (int x = 0; x < n; ++x) {
                if (perm[x] == x) continue;
                const int c = find(x);
                if (c == pairs[i].first || c == pairs[i].second) side[x] = (c == cside) ? Side::C : Side::D;
            }
        }
        bool sep = false;
        if (reflection_defect(s, perm, side, &sep).empty()) {
            *side_out = side;
            if (separative) *separative = sep;
            return true;
        }
    }
    return false;
}

namespace {

std::vector<std::vector<int>> level1_adjacency(const IgsSpec& s) {
    std::vector<std::vector<int>> adj(s.num_symbols());
    for (const auto& e : s.edges) {
        adj[e.from].push_back(e.to);
        adj[e.to].push_back(e.from);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return adj;
}

// Standard partitions for built-in families, when the permutation matches.
std::optional<SymbolMap> known_reflection(const IgsSpec& s, const std::vector<int>& perm) {
    std::vector<SymbolMap> cands;
    if (s.family == Family::Pentagon) {
        for (int i = 0; i < 5; ++i) cands.push_back(pentagon_reflection(s, i));
    } else if (s.family == Family::Gasket) {
        for (int i = 0; i < 3; ++i) cands.push_back(gasket_reflection(s, i));
    } else if (s.family == Family::Cubical && s.cubical) {
        const int d = s.cubical->d;
        for (int j = 0; j < d; ++j) {
            cands.push_back(cubical_map(s, 'e', j));
            for (int k = j + 1; k < d; ++k) {
                cands.push_back(cubical_map(s, '+', j, k));
                cands.push_back(cubical_map(s, '-', j, k));
            }
        }
    }
    for (auto& c : cands)
        if (c.perm == perm && c.reflection) return c;
    return std::nullopt;
}

}  // namespace

Symmetries find_symmetries(const IgsSpec& s, const SymmetryOptions& opts) {
    const int n = s.num_symbols();
    if (n > opts.max_symbols)
        throw Error(ErrorCode::SearchBudgetExceeded, "symbol count exceeds the search bound");
    const auto adj = level1_adjacency(s);
    std::vector<std::pair<int, int>> sig(n);
    for (int x = 0; x < n; ++x) {
        int faces = 0;
        for (int t = 0; t < s.num_types(); ++t)
            for (Star st : {-1, +1}) faces += b_count(s, t, st, x) > 0;
        sig[x] = {static_cast<int>(adj[x].size()), faces};
    }
    // Assign symbols in BFS order so each new symbol has an assigned neighbor.
    std::vector<int> order, seen(n, 0);
    for (int root = 0; root < n; ++root) {
        if (seen[root]) continue;
        std::queue<int> q;
        q.push(root);
        seen[root] = 1;
        while (!q.empty()) {
            int x = q.front();
            q.pop();
            order.push_back(x);
            for (int y : adj[x])
                if (!seen[y]) {
                    seen[y] = 1;
                    q.push(y);
                }
        }
    }
    Symmetries out;
    std::vector<int> perm(n, -1), used(n, 0);
    long long nodes = 0;
    std::function<void(int)> rec = [&](int idx) {
        if (++nodes > opts.node_budget) {
            out.truncated = true;
            return;
        }
        if (idx == n) {
            if (check_igs_morphism(s, s, perm).is_isomorphism) {
                SymbolMap m;
                m.perm = perm;
                out.automorphisms.push_back(m);
            }
            return;
        }
        const int x = order[idx];
        for (int y = 0; y < n && !out.truncated; ++y) {
            if (used[y] || sig[y] != sig[x]) continue;
            bool ok = true;
            for (int z : adj[x]) {
                if (perm[z] < 0) continue;
                if (!std::binary_search(adj[y].begin(), adj[y].end(), perm[z])) {
                    ok = false;
                    break;
                }
            }
            // Non-adjacent assigned pairs must stay non-adjacent.
            for (int z = 0; z < n && ok; ++z) {
                if (perm[z] < 0 || std::binary_search(adj[x].begin(), adj[x].end(), z)) continue;
                if (std::binary_search(adj[y].begin(), adj[y].end(), perm[z])) ok = false;
            }
            if (!ok) continue;
            perm[x] = y;
            used[y] = 1;
            rec(idx + 1);
            perm[x] = -1;
            used[y] = 0;
        }
    };
    rec(0);
    std::sort(out.automorphisms.begin(), out.automorphisms.end(),
              [](const SymbolMap& a, const SymbolMap& b) { return a.perm < b.perm; });

    out.flipping.assign(s.num_types(), -1);
    for (size_t i = 0; i < out.automorphisms.size(); ++i) {
        SymbolMap& m = out.automorphisms[i];
        for (int t = 0; t < s.num_types(); ++t)
            if (is_flipping(s, m.perm, t)) {
                m.flipping = true;
                m.flip_types.push_back(t);
                if (out.flipping[t] < 0) out.flipping[t] = static_cast<int>(i);
            }
        if (auto known = known_reflection(s, m.perm)) {
            m.reflection = true;
            m.side = known->side;
            m.separative = known->separative;
        } else if (find_reflection_partition(s, m.perm, &m.side, &m.separative)) {
            m.reflection = true;
        }
        if (m.reflection) out.reflections.push_back(static_cast<int>(i));
    }

    std::set<std::vector<int>> group;
    std::vector<int> id(n);
    std::iota(id.begin(), id.end(), 0);
    group.insert(id);
    std::queue<std::vector<int>> q;
    q.push(id);
    while (!q.empty()) {
        auto g = q.front();
        q.pop();
        for (int fi : out.flipping) {
            if (fi < 0) continue;
            auto h = compose(out.automorphisms[fi].perm, g);
            if (group.insert(h).second) q.push(h);
        }
    }
    out.group.assign(group.begin(), group.end());
    return out;
}

// ---------------------------------------------------------------- faces

std::vector<std::pair<int, int>> antipodal_pairs(const IgsSpec& s) {
    std::vector<std::pair<int, int>> out;
    const int K = 2 * s.num_types();
    for (int a = 0; a < K; ++a)
        for (int b = a + 1; b < K; ++b)
            if (disjoint_sorted(s.side(face_key_type(a), face_key_star(a)),
                                s.side(face_key_type(b), face_key_star(b))))
                out.emplace_back(a, b);
    return out;
}

FaceTable face_table(const IgsSpec& s) {
    FaceTable ft;
    const int K = 2 * s.num_types();
    ft.of_key.assign(K, -1);
    for (int k = 0; k < K; ++k) {
        auto set = s.side(face_key_type(k), face_key_star(k));
        auto it = std::find(ft.sets.begin(), ft.sets.end(), set);
        if (it == ft.sets.end()) {
            ft.of_key[k] = static_cast<int>(ft.sets.size());
            ft.sets.push_back(set);
            ft.key_of.push_back(k);
        } else {
            ft.of_key[k] = static_cast<int>(it - ft.sets.begin());
        }
    }
    return ft;
}

std::vector<std::pair<int, int>> antipodal_face_pairs(const IgsSpec& s) {
    const FaceTable ft = face_table(s);
    std::set<std::pair<int, int>> out;
    for (auto [a, b] : antipodal_pairs(s)) {
        int fa = ft.of_key[a], fb = ft.of_key[b];
        if (fa > fb) std::swap(fa, fb);
        out.insert({fa, fb});
    }
    return {out.begin(), out.end()};
}

int map_face(const FaceTable& ft, const std::vector<int>& perm, int face) {
    std::vector<int> img;
    for (int x : ft.sets[face]) img.push_back(perm[x]);
    std::sort(img.begin(), img.end());
    auto it = std::find(ft.sets.begin(), ft.sets.end(), img);
    return it == ft.sets.end() ? -1 : static_cast<int>(it - ft.sets.begin());
}

// ---------------------------------------------------------------- named maps

SymbolMap cubical_map(const IgsSpec& s, char kind, int j, int k) {
    if (!s.cubical) throw Error(ErrorCode::NotCubical, "spec has no cubical coordinates");
    const CubicalInfo& ci = *s.cubical;
    const int n = s.num_symbols();
    SymbolMap m;
    m.perm.assign(n, -1);
    m.side.assign(n, Side::Delta);
    for (int a = 0; a < n; ++a) {
        auto img = cube_image(ci.coords[a], kind, j, k, ci.L);
        for (int b = 0; b < n; ++b)
            if (ci.coords[b] == img && ci.sheet[b] == ci.sheet[a]) m.perm[a] = b;
        if (m.perm[a] < 0) throw Error(ErrorCode::CubicalViolation, "symbol set not closed under symmetry");
        const auto& c = ci.coords[a];
        bool in_c = false, fixed = false;
        if (kind == 'e') {
            in_c = c[j] < ci.L + 1 - c[j];
            fixed = 2 * c[j] == ci.L + 1;
        } else if (kind == '+') {
            in_c = c[j] < c[k];
            fixed = c[j] == c[k];
        } else {
            in_c = c[j] + c[k] < ci.L + 1;
            fixed = c[j] + c[k] == ci.L + 1;
        }
        m.side[a] = fixed ? Side::Delta : (in_c ? Side::C : Side::D);
    }
    if (kind == 'e') {
        m.flipping = is_flipping(s, m.perm, j);
        if (m.flipping) m.flip_types.push_back(j);
    }
    bool sep = false;
    m.reflection = reflection_defect(s, m.perm, m.side, &sep).empty() &&
                   check_igs_morphism(s, s, m.perm).is_isomorphism;
    m.separative = m.reflection && sep;
    return m;
}

SymbolMap pentagon_reflection(const IgsSpec& s, int i) {
    SymbolMap m;
    m.perm.assign(5, 0);
    m.side.assign(5, Side::Delta);
    auto md = [](int x) { return ((x % 5) + 5) % 5; };
    m.perm[md(i)] = md(i);
    m.perm[md(i + 1)] = md(i - 1);
    m.perm[md(i - 1)] = md(i + 1);
    m.perm[md(i + 2)] = md(i + 3);
    m.perm[md(i + 3)] = md(i + 2);
    m.side[md(i - 1)] = m.side[md(i - 2)] = Side::C;
    m.side[md(i + 1)] = m.side[md(i + 2)] = Side::D;
    bool sep = false;
    m.reflection = reflection_defect(s, m.perm, m.side, &sep).empty();
    m.separative = m.reflection && sep;
    for (int t = 0; t < s.num_types(); ++t)
        if (is_flipping(s, m.perm, t)) {
            m.flipping = true;
            m.flip_types.push_back(t);
        }
    return m;
}

SymbolMap gasket_reflection(const IgsSpec& s, int i) {
    SymbolMap m;
    m.perm.assign(3, 0);
    m.side.assign(3, Side::Delta);
    auto md = [](int x) { return ((x % 3) + 3) % 3; };
    m.perm[md(i)] = md(i);
    m.perm[md(i + 1)] = md(i - 1);
    m.perm[md(i - 1)] = md(i + 1);
    m.side[md(i - 1)] = Side::C;
    m.side[md(i + 1)] = Side::D;
    bool sep = false;
    m.reflection = reflection_defect(s, m.perm, m.side, &sep).empty();
    m.separative = m.reflection && sep;
    for (int t = 0; t < s.num_types(); ++t)
        if (is_flipping(s, m.perm, t)) {
            m.flipping = true;
            m.flip_types.push_back(t);
        }
    return m;
}

}  // namespace igs
