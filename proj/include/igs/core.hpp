#pragma once

// Iterated graph system definitions: spec data, validation, built-in systems
// and symmetry detection.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "igs/error.hpp"

namespace igs {

// Selects the OpenMP kernels or their serial reference versions. Both give
// identical results; the serial path exists for testing and benchmarks.
struct Exec {
    bool parallel = true;
};

// Orientation of an edge relative to one of its endpoints: +1 when the
// endpoint is the tail of the stored edge, -1 when it is the head.
using Star = int;

enum class Family { Generic, Cubical, Gasket, Pentagon };

struct SpecEdge {
    int from = 0;
    int to = 0;
    int type = 0;
};

struct CubicalInfo {
    int d = 0;
    int L = 0;
    int s = 0;
    std::vector<std::vector<int>> coords;  // 1-based coordinates per symbol
    std::vector<int> sheet;                // 1-based sheet per symbol
};

struct IgsSpec {
    std::string name;
    std::string notes;
    std::vector<std::string> symbols;
    std::vector<std::string> types;
    std::vector<SpecEdge> edges;
    std::vector<std::vector<std::pair<int, int>>> gluings;  // indexed by type
    Family family = Family::Generic;
    std::optional<CubicalInfo> cubical;
    int scale = 0;  // declared scaling factor L*, 0 if unknown

    int num_symbols() const { return static_cast<int>(symbols.size()); }
    int num_types() const { return static_cast<int>(types.size()); }

    // I_{t,+} (first components) or I_{t,-} (second components), sorted.
    std::vector<int> side(int t, Star star) const;
    bool glued(int t, int a, int b) const;
    // Level-1 edge between a and b: (type, orientation of a).
    std::optional<std::pair<int, Star>> edge_between(int a, int b) const;
    int type_index(const std::string& name) const;
    int symbol_index(const std::string& label) const;

    bool single_char_labels() const;
    std::string word_label(const std::vector<int>& word) const;
    std::vector<int> parse_word(const std::string& text) const;
};

// Face index helpers: face key k = 2*t + (star > 0).
inline int face_key(int t, Star star) { return 2 * t + (star > 0 ? 1 : 0); }
inline int face_key_type(int k) { return k / 2; }
inline Star face_key_star(int k) { return (k % 2) ? +1 : -1; }

IgsSpec parse_igs_spec(const std::string& text);
IgsSpec load_igs_file(const std::string& path);
// Canonical serialization: symbols, edges and gluing pairs sorted by label.
std::string serialize_igs_spec(const IgsSpec& spec);

struct GrWitness {
    int type = 0;
    Star star = 0;
    int symbol = 0;
};

struct ValidationReport {
    bool gr1_ok = true;
    bool gr2_ok = true;
    bool gr3_ok = true;
    bool corner_ok = true;
    bool connectivity_ok = true;
    std::vector<GrWitness> gr1_witnesses;
    std::vector<GrWitness> gr2_witnesses;
    std::vector<GrWitness> gr3_witnesses;
    std::vector<std::vector<int>> corner_witnesses;  // face-key families
    int c_deg = 0;

    bool ok() const { return gr1_ok && gr2_ok && gr3_ok && corner_ok && connectivity_ok; }
};

int b_count(const IgsSpec& spec, int t, Star star, int w);
int deg_count(const IgsSpec& spec, int t, Star star, int w);
ValidationReport validate_structure(const IgsSpec& spec);

// Built-in systems. Names: sierpinski-carpet, menger-sponge, pillow, gasket,
// pentagon, interval (params {L}), cubical (params {d, L, s}; kept symbols
// given as coordinate+sheet tuples, empty means the full grid).
IgsSpec builtin_system(const std::string& name, const std::vector<int>& params = {},
                       const std::vector<std::vector<int>>& kept = {});
IgsSpec cubical_system(int d, int L, int s, const std::vector<std::vector<int>>& kept,
                       const std::string& name = "cubical");
std::vector<std::string> builtin_names();

struct MorphismCheck {
    bool is_mapping = false;
    bool is_isomorphism = false;
    std::string witness;
};

MorphismCheck check_igs_morphism(const IgsSpec& a, const IgsSpec& b, const std::vector<int>& map);

// Side assignment per symbol for reflections.
enum class Side : std::uint8_t { Delta = 0, C = 1, D = 2 };

struct SymbolMap {
    std::vector<int> perm;
    bool flipping = false;
    std::vector<int> flip_types;
    bool reflection = false;
    bool separative = false;
    std::vector<Side> side;  // set when reflection

    bool is_identity() const;
};

struct Symmetries {
    std::vector<SymbolMap> automorphisms;  // sorted by perm
    std::vector<int> flipping;             // per type: index into automorphisms, -1 if none
    std::vector<int> reflections;          // indices into automorphisms
    std::vector<std::vector<int>> group;   // closure of the chosen flippings, sorted
    bool truncated = false;

    const SymbolMap& flip(int t) const { return automorphisms.at(flipping.at(t)); }
    bool has_all_flippings() const;
};

struct SymmetryOptions {
    int max_symbols = 64;
    long long node_budget = 20000000;
};

Symmetries find_symmetries(const IgsSpec& spec, const SymmetryOptions& opts = {});

// Classification helpers, usable on arbitrary permutations.
bool is_flipping(const IgsSpec& spec, const std::vector<int>& perm, int t);
// Checks D1-D5/D5* for a given partition; returns empty string when valid.
std::string reflection_defect(const IgsSpec& spec, const std::vector<int>& perm,
                              const std::vector<Side>& side, bool* separative);
// Finds a valid partition for an involution, preferring C to contain the
// smallest non-fixed symbol. Returns false if none exists.
bool find_reflection_partition(const IgsSpec& spec, const std::vector<int>& perm,
                               std::vector<Side>* side, bool* separative);

std::vector<int> compose(const std::vector<int>& a, const std::vector<int>& b);  // a after b
std::vector<int> inverse(const std::vector<int>& a);

// Antipodal pairs: unordered pairs of face keys whose level-1 sides are disjoint.
std::vector<std::pair<int, int>> antipodal_pairs(const IgsSpec& spec);

// Distinct faces at level 1 and the map face key -> distinct face index.
struct FaceTable {
    std::vector<std::vector<int>> sets;  // sorted symbol sets
    std::vector<int> of_key;             // size 2|T|
    std::vector<int> key_of;             // a representative key per face
};
FaceTable face_table(const IgsSpec& spec);
// Antipodal pairs deduplicated by face sets, as distinct-face index pairs.
std::vector<std::pair<int, int>> antipodal_face_pairs(const IgsSpec& spec);
// Image of a distinct face under a symbol permutation, -1 if not a face.
int map_face(const FaceTable& ft, const std::vector<int>& perm, int face);

// Cubical symmetry maps of the full grid restricted to the symbols.
// kind: 'e' flip eta_j, '+' diagonal swap (j,k), '-' anti-diagonal (j,k).
SymbolMap cubical_map(const IgsSpec& spec, char kind, int j, int k = -1);
// Pentagon reflection eta_i with the partition C = {i-1,i-2}, D = {i+1,i+2}.
SymbolMap pentagon_reflection(const IgsSpec& spec, int i);
// Gasket reflection fixing i with C = {i-1}, D = {i+1}.
SymbolMap gasket_reflection(const IgsSpec& spec, int i);

}  // namespace igs
