#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace kgsf {

// K x K integer matrix with entries in {-k,...,k}.  Entry a[i][j] = s*m
// selects relation chunk m with sign s for the (head chunk i, tail chunk j)
// product; 0 means the cell is inactive.
struct StructureMatrix {
    int k = 4;
    std::vector<int> cells;  // row-major, k*k entries

    StructureMatrix() : cells(16, 0) {}
    explicit StructureMatrix(int kk) : k(kk), cells(static_cast<size_t>(kk) * kk, 0) {}
    StructureMatrix(int kk, std::vector<int> c) : k(kk), cells(std::move(c)) {}

    int at(int i, int j) const { return cells[static_cast<size_t>(i) * k + j]; }
    int& at(int i, int j) { return cells[static_cast<size_t>(i) * k + j]; }

    int nonzero_count() const;
    void validate() const;  // throws ConfigError on bad k or out-of-range entries

    bool operator==(const StructureMatrix& o) const { return k == o.k && cells == o.cells; }

    std::string to_json_string() const;
    static StructureMatrix from_json_string(const std::string& text);
};

// Length-k integer vector with entries in {-k,...,k}; index 0 of the
// conceptual chunk list is pinned to zero, so value m refers to chunk m.
using RelationPattern = std::vector<int>;

// Scalar (chunk width 1) realization of the relation operator:
// out[i][j] = sign(a[i][j]) * r[|a[i][j]|], row-major, with r[0] == 0.
std::vector<int> signature_matrix(const StructureMatrix& a, const RelationPattern& r);

// Exact rank over the rationals (fraction-free elimination on int64).
int rank_exact(const StructureMatrix& a);

// True unless rank(a) == k and every value 1..k appears among |a[i][j]|.
bool is_degenerate(const StructureMatrix& a);

// --- the three score-preserving transform families ---------------------
// perm maps new index -> old index (0-based): out[i][j] = a[perm[i]][perm[j]]
StructureMatrix permute_axes(const StructureMatrix& a, const std::vector<int>& perm);
// value_perm maps value m -> value_perm[m-1]+1 over {1..k}; signs kept
StructureMatrix permute_values(const StructureMatrix& a, const std::vector<int>& value_perm);
// signs[m-1] in {-1,+1} multiplies every entry of absolute value m
StructureMatrix flip_signs(const StructureMatrix& a, const std::vector<int>& signs);

// All matrices reachable by composing the three families, deduplicated.
std::vector<StructureMatrix> equivalence_orbit(const StructureMatrix& a);

// Lexicographically minimal row-major byte encoding (entry + k per byte)
// over the orbit.  Equal keys <=> equivalent structures.
std::string canonical_key(const StructureMatrix& a);

// Raw (untransformed) byte encoding; orbit members share min over these.
std::string encode_raw(const StructureMatrix& a);

// True iff a is non-degenerate and its canonical key is unseen.  Pure.
bool filter_check(const StructureMatrix& a, const std::unordered_set<std::string>& history);

// Searches all (2k+1)^k - 1 patterns for a symmetric and a skew-symmetric
// nonzero signature realization.  Presence of both certifies the structure
// fully expressive; absence certifies nothing.
std::optional<std::pair<RelationPattern, RelationPattern>>
expressiveness_witnesses(const StructureMatrix& a);

// k=4 chunk decompositions of the classical bilinear models.
// name in {distmult, complex, simple, analogy, quate}.
StructureMatrix builtin_structure(const std::string& name);
const std::vector<std::string>& builtin_names();

// Enumerates every nonzero pattern r in {-k..k}^k in a fixed order that
// prefers zeros and small magnitudes, so first-found witnesses are sparse.
template <class F>
void for_each_pattern(int k, F&& fn) {
    // per-coordinate value order: 0, 1, -1, 2, -2, ..., k, -k
    std::vector<int> digits(static_cast<size_t>(k), 0);
    auto value_of = [](int digit) { return digit == 0 ? 0 : (digit % 2 ? (digit + 1) / 2 : -digit / 2); };
    std::vector<int> r(static_cast<size_t>(k));
    const int base = 2 * k + 1;
    for (;;) {
        bool all_zero = true;
        for (size_t i = 0; i < r.size(); ++i) {
            r[i] = value_of(digits[i]);
            if (r[i] != 0) all_zero = false;
        }
        if (!all_zero) fn(const_cast<const std::vector<int>&>(r));
        int i = k - 1;
        while (i >= 0 && digits[static_cast<size_t>(i)] == base - 1) digits[static_cast<size_t>(i--)] = 0;
        if (i < 0) break;
        ++digits[static_cast<size_t>(i)];
    }
}

}  // namespace kgsf
