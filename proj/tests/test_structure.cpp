#include <algorithm>
#include <set>

#include "doctest.h"
#include "kgsf/errors.hpp"
#include "kgsf/structure.hpp"
#include "oracles.hpp"

using namespace kgsf;
using namespace kgsf::testing;

namespace {

StructureMatrix diag4(int a, int b, int c, int d) {
    StructureMatrix m(4);
    m.at(0, 0) = a;
    m.at(1, 1) = b;
    m.at(2, 2) = c;
    m.at(3, 3) = d;
    return m;
}

}  // namespace

TEST_SUITE_BEGIN("structure");

TEST_CASE("signature matrix substitutes pattern values") {
    const StructureMatrix dm = builtin_structure("distmult");
    const auto sig = signature_matrix(dm, {1, 2, 3, 4});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(sig[static_cast<size_t>(i) * 4 + j] == (i == j ? i + 1 : 0));

    const StructureMatrix cx = builtin_structure("complex");
    const auto sig_cx = signature_matrix(cx, {1, 2, 0, 0});
    const std::vector<int> want{1, 0, 0, 0, 0, 2, 0, 0, 0, 0, 1, 0, 0, 0, 0, 2};
    CHECK(sig_cx == want);
}

TEST_CASE("signature matrix keeps zero rows zero") {
    StructureMatrix a(4);
    a.at(1, 0) = 2;
    a.at(2, 3) = -1;
    const auto sig = signature_matrix(a, {4, 3, 2, 1});
    for (int j = 0; j < 4; ++j) {
        CHECK(sig[static_cast<size_t>(0) * 4 + j] == 0);
        CHECK(sig[static_cast<size_t>(3) * 4 + j] == 0);
    }
    CHECK(sig[static_cast<size_t>(1) * 4 + 0] == 3);
    CHECK(sig[static_cast<size_t>(2) * 4 + 3] == -4);
}

TEST_CASE("signature matrix rejects wrong pattern length") {
    CHECK_THROWS_AS(signature_matrix(builtin_structure("distmult"), {1, 2, 3}), ConfigError);
}

TEST_CASE("degeneracy on hand-checked cases") {
    CHECK_FALSE(is_degenerate(diag4(1, 2, 3, 4)));
    CHECK(is_degenerate(diag4(1, 1, 1, 1)));  // values 2,3,4 absent

    StructureMatrix column_only(4);  // all nonzeros in one column: rank 1
    column_only.at(0, 0) = 1;
    column_only.at(1, 0) = 2;
    column_only.at(2, 0) = 3;
    column_only.at(3, 0) = 4;
    CHECK(is_degenerate(column_only));

    CHECK(is_degenerate(StructureMatrix(4)));  // all zero
    for (const auto& name : builtin_names()) CHECK_FALSE(is_degenerate(builtin_structure(name)));
}

TEST_CASE("rank_exact agrees with a numeric rank on random matrices") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + trial % 4;
        const StructureMatrix a = random_structure(k, rng);
        std::vector<double> m(a.cells.begin(), a.cells.end());
        CHECK(rank_exact(a) == numeric_rank(m, k, k, 1e-9));
    }
}

TEST_CASE("exhaustive k=2 degeneracy matches the brute-force oracle") {
    Rng rng(123);
    int degenerate_count = 0;
    for (int code = 0; code < 625; ++code) {
        StructureMatrix a(2);
        int c = code;
        for (int i = 0; i < 4; ++i) {
            a.cells[static_cast<size_t>(i)] = c % 5 - 2;
            c /= 5;
        }
        const bool got = is_degenerate(a);
        const bool want = oracle_degenerate(a, rng);
        CHECK_MESSAGE(got == want, "disagreement on ", a.to_json_string());
        degenerate_count += got;
    }
    CHECK(degenerate_count > 0);
    CHECK(degenerate_count < 625);
}

TEST_CASE("value-coincidental singularity is still pruned by the rank test") {
    // rows (1,2,3) + (3,2,1) = 4 * (1,1,1): singular through the specific
    // integer values, although the signature operator is invertible for
    // generic real patterns.  The filter follows the rank condition.
    StructureMatrix a(3, {1, 2, 3, 3, 2, 1, 1, 1, 1});
    CHECK(rank_exact(a) == 2);
    CHECK(is_degenerate(a));
    Rng rng(2);
    CHECK_FALSE(oracle_degenerate(a, rng));  // the nullspace property alone would keep it
}

TEST_CASE("orbit contains the identity and closes under the key") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const StructureMatrix a = random_structure(3, rng);
        const auto orbit = equivalence_orbit(a);
        CHECK(std::find(orbit.begin(), orbit.end(), a) != orbit.end());
        const std::string key = canonical_key(a);
        for (const auto& member : orbit) CHECK(canonical_key(member) == key);
        // orbit size divides the transform-group order
        const size_t group = 6ull * 6ull * 8ull;  // (3!)^2 * 2^3
        CHECK(group % orbit.size() == 0);
    }
}

TEST_CASE("axis permutation of analogy stays in its orbit") {
    const StructureMatrix a = builtin_structure("analogy");
    // block indices [1,2,3,4] -> [3,4,1,2]
    const StructureMatrix b = permute_axes(a, {2, 3, 0, 1});
    CHECK(b.at(0, 0) == 3);
    CHECK(b.at(0, 1) == 4);
    CHECK(b.at(1, 0) == -4);
    CHECK(canonical_key(a) == canonical_key(b));
    const auto orbit = equivalence_orbit(a);
    CHECK(std::find(orbit.begin(), orbit.end(), b) != orbit.end());
}

TEST_CASE("all-plus-one and all-minus-one matrices share an orbit") {
    StructureMatrix plus(4), minus(4);
    for (auto& v : plus.cells) v = 1;
    for (auto& v : minus.cells) v = -1;
    CHECK(canonical_key(plus) == canonical_key(minus));
    const auto orbit = equivalence_orbit(plus);
    CHECK(std::find(orbit.begin(), orbit.end(), minus) != orbit.end());
}

TEST_CASE("value permutation maps diag(1,2,3,4) onto diag(2,1,3,4)") {
    CHECK(canonical_key(diag4(1, 2, 3, 4)) == canonical_key(diag4(2, 1, 3, 4)));
}

TEST_CASE("canonical key is constant across every orbit member") {
    Rng rng(11);
    for (int trial = 0; trial < 3; ++trial) {
        const StructureMatrix a = random_structure(4, rng);
        const std::string key = canonical_key(a);
        const auto orbit = equivalence_orbit(a);
        CHECK(9216 % orbit.size() == 0);  // (4!)^2 * 2^4
        for (size_t i = 0; i < orbit.size(); i += 97) CHECK(canonical_key(orbit[i]) == key);
    }
}

TEST_CASE("filter_check accepts fresh structures and rejects equivalents") {
    std::unordered_set<std::string> history;
    CHECK(filter_check(diag4(1, 2, 3, 4), history));
    history.insert(canonical_key(diag4(2, 1, 3, 4)));
    CHECK_FALSE(filter_check(diag4(1, 2, 3, 4), history));

    StructureMatrix rank1(4);
    for (int j = 0; j < 4; ++j) rank1.at(0, j) = j + 1;
    CHECK_FALSE(filter_check(rank1, std::unordered_set<std::string>{}));
    // pure: history unchanged by calls
    CHECK(history.size() == 1);
}

TEST_CASE("builtins pass the filter against an empty history") {
    const std::unordered_set<std::string> empty;
    for (const auto& name : builtin_names()) CHECK(filter_check(builtin_structure(name), empty));
}

namespace {

bool signature_is(const StructureMatrix& a, const RelationPattern& r, bool want_skew, bool* nonzero_out) {
    const auto g = signature_matrix(a, r);
    bool ok = true, nonzero = false;
    const int k = a.k;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            const int x = g[static_cast<size_t>(i) * k + j];
            const int y = g[static_cast<size_t>(j) * k + i];
            nonzero = nonzero || x != 0;
            if (want_skew ? (x != -y) : (x != y)) ok = false;
        }
    if (nonzero_out) *nonzero_out = nonzero;
    return ok;
}

}  // namespace

TEST_CASE("published witness pairs verify for the four expressive builtins") {
    const std::vector<std::pair<std::string, std::pair<RelationPattern, RelationPattern>>> table{
        {"complex", {{1, 2, 0, 0}, {0, 0, 3, 4}}},
        {"analogy", {{1, 2, 3, 0}, {0, 0, 0, 4}}},
        {"simple", {{1, 2, 1, 2}, {1, 2, -1, -2}}},
        {"quate", {{1, 0, 0, 0}, {0, 2, 3, 4}}},
    };
    for (const auto& [name, pair] : table) {
        const StructureMatrix a = builtin_structure(name);
        bool nonzero = false;
        CHECK_MESSAGE(signature_is(a, pair.first, false, &nonzero), name, " symmetric witness");
        CHECK(nonzero);
        CHECK_MESSAGE(signature_is(a, pair.second, true, &nonzero), name, " skew witness");
        CHECK(nonzero);
    }
}

TEST_CASE("witness search finds pairs for expressive builtins, none for distmult") {
    for (const std::string name : {"complex", "simple", "analogy", "quate"}) {
        const auto w = expressiveness_witnesses(builtin_structure(name));
        REQUIRE_MESSAGE(w.has_value(), name);
        bool nonzero = false;
        CHECK(signature_is(builtin_structure(name), w->first, false, &nonzero));
        CHECK(nonzero);
        CHECK(signature_is(builtin_structure(name), w->second, true, &nonzero));
        CHECK(nonzero);
    }
    // a diagonal signature can never be skew-symmetric and nonzero
    CHECK_FALSE(expressiveness_witnesses(builtin_structure("distmult")).has_value());
}

TEST_CASE("builtin table matches the chunk decompositions") {
    CHECK(builtin_structure("distmult") == diag4(1, 2, 3, 4));
    StructureMatrix simple(4);
    simple.at(0, 2) = 1;
    simple.at(1, 3) = 2;
    simple.at(2, 0) = 3;
    simple.at(3, 1) = 4;
    CHECK(builtin_structure("simple") == simple);
    CHECK(builtin_structure("quate").nonzero_count() == 16);
    CHECK_THROWS_AS(builtin_structure("rescal"), ConfigError);
}

TEST_CASE("json round trip") {
    const StructureMatrix a = builtin_structure("complex");
    CHECK(StructureMatrix::from_json_string(a.to_json_string()) == a);
    CHECK_THROWS_AS(StructureMatrix::from_json_string("{\"k\": 4}"), DataError);
    CHECK_THROWS_AS(StructureMatrix::from_json_string("not json"), DataError);
}

TEST_SUITE_END();
