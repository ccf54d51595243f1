#include "kgsf/structure.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "kgsf/errors.hpp"

namespace kgsf {

namespace {

int sign_of(int v) { return (v > 0) - (v < 0); }

}  // namespace

int StructureMatrix::nonzero_count() const {
    int n = 0;
    for (int v : cells) n += (v != 0);
    return n;
}

void StructureMatrix::validate() const {
    if (k < 2 || k > 8) throw ConfigError("structure matrix: k must be in [2, 8], got " + std::to_string(k));
    if (cells.size() != static_cast<size_t>(k) * k)
        throw ConfigError("structure matrix: expected " + std::to_string(k * k) + " entries");
    for (int v : cells)
        if (v < -k || v > k)
            throw ConfigError("structure matrix: entry " + std::to_string(v) + " out of range for k=" + std::to_string(k));
}

std::string StructureMatrix::to_json_string() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < k; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < k; ++j) row.push_back(at(i, j));
        rows.push_back(row);
    }
    nlohmann::json j{{"k", k}, {"entries", rows}};
    return j.dump();
}

StructureMatrix StructureMatrix::from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("structure json: ") + e.what());
    }
    if (!j.contains("k") || !j.contains("entries")) throw DataError("structure json: missing 'k' or 'entries'");
    StructureMatrix a(j.at("k").get<int>());
    const auto& rows = j.at("entries");
    if (!rows.is_array() || static_cast<int>(rows.size()) != a.k) throw DataError("structure json: bad row count");
    for (int i = 0; i < a.k; ++i) {
        if (static_cast<int>(rows[i].size()) != a.k) throw DataError("structure json: bad column count");
        for (int jj = 0; jj < a.k; ++jj) a.at(i, jj) = rows[i][jj].get<int>();
    }
    a.validate();
    return a;
}

std::vector<int> signature_matrix(const StructureMatrix& a, const RelationPattern& r) {
    if (static_cast<int>(r.size()) != a.k)
        throw ConfigError("signature_matrix: pattern length " + std::to_string(r.size()) +
                          " does not match k=" + std::to_string(a.k));
    for (int v : r)
        if (v < -a.k || v > a.k) throw ConfigError("signature_matrix: pattern entry out of range");
    const int k = a.k;
    std::vector<int> out(static_cast<size_t>(k) * k, 0);
    for (size_t c = 0; c < out.size(); ++c) {
        const int v = a.cells[c];
        if (v != 0) out[c] = sign_of(v) * r[static_cast<size_t>(std::abs(v)) - 1];
    }
    return out;
}

int rank_exact(const StructureMatrix& a) {
    const int k = a.k;
    std::vector<long long> m(a.cells.begin(), a.cells.end());
    // Bareiss fraction-free elimination; exact over the integers.
    long long prev = 1;
    int rank = 0;
    int row = 0;
    for (int col = 0; col < k && row < k; ++col) {
        int pivot = -1;
        for (int i = row; i < k; ++i)
            if (m[static_cast<size_t>(i) * k + col] != 0) { pivot = i; break; }
        if (pivot < 0) continue;
        if (pivot != row)
            for (int j = 0; j < k; ++j)
                std::swap(m[static_cast<size_t>(pivot) * k + j], m[static_cast<size_t>(row) * k + j]);
        const long long p = m[static_cast<size_t>(row) * k + col];
        for (int i = row + 1; i < k; ++i) {
            for (int j = col + 1; j < k; ++j) {
                long long& x = m[static_cast<size_t>(i) * k + j];
                x = (x * p - m[static_cast<size_t>(i) * k + col] * m[static_cast<size_t>(row) * k + j]) / prev;
            }
            m[static_cast<size_t>(i) * k + col] = 0;
        }
        prev = p;
        ++rank;
        ++row;
    }
    return rank;
}

bool is_degenerate(const StructureMatrix& a) {
    const int k = a.k;
    std::array<bool, 9> seen{};
    for (int v : a.cells) seen[static_cast<size_t>(std::abs(v))] = true;
    for (int m = 1; m <= k; ++m)
        if (!seen[static_cast<size_t>(m)]) return true;
    return rank_exact(a) < k;
}

StructureMatrix permute_axes(const StructureMatrix& a, const std::vector<int>& perm) {
    StructureMatrix out(a.k);
    for (int i = 0; i < a.k; ++i)
        for (int j = 0; j < a.k; ++j) out.at(i, j) = a.at(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    return out;
}

StructureMatrix permute_values(const StructureMatrix& a, const std::vector<int>& value_perm) {
    StructureMatrix out(a.k);
    for (size_t c = 0; c < a.cells.size(); ++c) {
        const int v = a.cells[c];
        out.cells[c] = v == 0 ? 0 : sign_of(v) * (value_perm[static_cast<size_t>(std::abs(v)) - 1] + 1);
    }
    return out;
}

StructureMatrix flip_signs(const StructureMatrix& a, const std::vector<int>& signs) {
    StructureMatrix out(a.k);
    for (size_t c = 0; c < a.cells.size(); ++c) {
        const int v = a.cells[c];
        out.cells[c] = v == 0 ? 0 : signs[static_cast<size_t>(std::abs(v)) - 1] * v;
    }
    return out;
}

std::string encode_raw(const StructureMatrix& a) {
    std::string key(a.cells.size(), '\0');
    for (size_t c = 0; c < a.cells.size(); ++c) key[c] = static_cast<char>(a.cells[c] + a.k);
    return key;
}

namespace {

// Enumerates all (k!)^2 * 2^k compositions: axis permutation, then value
// permutation, then sign flip.  The families commute up to reindexing, so
// this fixed order covers the whole group.
template <class F>
void for_each_orbit_member(const StructureMatrix& a, F&& fn) {
    const int k = a.k;
    std::vector<int> axis(static_cast<size_t>(k));
    std::iota(axis.begin(), axis.end(), 0);
    std::vector<int> vperm(static_cast<size_t>(k));
    std::vector<int> signs(static_cast<size_t>(k));
    do {
        const StructureMatrix ap = permute_axes(a, axis);
        std::iota(vperm.begin(), vperm.end(), 0);
        do {
            const StructureMatrix av = permute_values(ap, vperm);
            for (unsigned mask = 0; mask < (1u << k); ++mask) {
                for (int m = 0; m < k; ++m) signs[static_cast<size_t>(m)] = (mask >> m) & 1u ? -1 : 1;
                fn(flip_signs(av, signs));
            }
        } while (std::next_permutation(vperm.begin(), vperm.end()));
    } while (std::next_permutation(axis.begin(), axis.end()));
}

}  // namespace

std::vector<StructureMatrix> equivalence_orbit(const StructureMatrix& a) {
    std::unordered_set<std::string> seen;
    std::vector<StructureMatrix> orbit;
    for_each_orbit_member(a, [&](const StructureMatrix& m) {
        if (seen.insert(encode_raw(m)).second) orbit.push_back(m);
    });
    return orbit;
}

std::string canonical_key(const StructureMatrix& a) {
    std::string best = encode_raw(a);
    for_each_orbit_member(a, [&](const StructureMatrix& m) {
        std::string key = encode_raw(m);
        if (key < best) best = std::move(key);
    });
    return best;
}

bool filter_check(const StructureMatrix& a, const std::unordered_set<std::string>& history) {
    if (is_degenerate(a)) return false;
    return history.find(canonical_key(a)) == history.end();
}

std::optional<std::pair<RelationPattern, RelationPattern>>
expressiveness_witnesses(const StructureMatrix& a) {
    a.validate();
    const int k = a.k;
    std::optional<RelationPattern> sym, skew;
    for_each_pattern(k, [&](const RelationPattern& r) {
        if (sym && skew) return;
        const std::vector<int> g = signature_matrix(a, r);
        bool nonzero = false;
        bool is_sym = true, is_skew = true;
        for (int i = 0; i < k && (is_sym || is_skew); ++i) {
            for (int j = i; j < k; ++j) {
                const int x = g[static_cast<size_t>(i) * k + j];
                const int y = g[static_cast<size_t>(j) * k + i];
                nonzero = nonzero || x != 0 || y != 0;
                if (x != y) is_sym = false;
                if (x != -y) is_skew = false;
                if (!is_sym && !is_skew) break;
            }
        }
        // The expressiveness construction needs a nonzero realization; an
        // identically-zero signature certifies nothing.
        if (!nonzero) return;
        if (is_sym && !sym) sym = r;
        if (is_skew && !skew) skew = r;
    });
    if (sym && skew) return std::make_pair(*sym, *skew);
    return std::nullopt;
}

namespace {

StructureMatrix make4(std::initializer_list<int> entries) {
    StructureMatrix a(4);
    std::copy(entries.begin(), entries.end(), a.cells.begin());
    return a;
}

}  // namespace

StructureMatrix builtin_structure(const std::string& name) {
    if (name == "distmult")
        return make4({1, 0, 0, 0,
                      0, 2, 0, 0,
                      0, 0, 3, 0,
                      0, 0, 0, 4});
    if (name == "complex")
        return make4({1, 0, 3, 0,
                      0, 2, 0, 4,
                      -3, 0, 1, 0,
                      0, -4, 0, 2});
    if (name == "simple")
        return make4({0, 0, 1, 0,
                      0, 0, 0, 2,
                      3, 0, 0, 0,
                      0, 4, 0, 0});
    if (name == "analogy")
        return make4({1, 0, 0, 0,
                      0, 2, 0, 0,
                      0, 0, 3, 4,
                      0, 0, -4, 3});
    if (name == "quate")
        return make4({1, -2, -3, -4,
                      2, 1, 4, -3,
                      3, -4, 1, 2,
                      4, 3, -2, 1});
    throw ConfigError("unknown builtin structure: " + name);
}

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"distmult", "complex", "simple", "analogy", "quate"};
    return names;
}

}  // namespace kgsf
