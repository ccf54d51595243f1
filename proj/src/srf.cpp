#include "kgsf/srf.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "kgsf/errors.hpp"

namespace kgsf {

int srf_length(int k) { return k * (k + 1); }

int srf_group_count(int k) { return k * (k + 1) / 2; }

int srf_group_index(int k, int x, int y) {
    if (x < 0 || x > k - 1 || y < 1 || y > k - x) throw ConfigError("srf_group_index: invalid (x, y) pair");
    return x * k - x * (x - 1) / 2 + (y - 1);
}

namespace {

struct PatternTable {
    int k = 0;
    std::vector<int> values;  // all patterns, flattened, k per pattern
    std::vector<int> group;   // group index per pattern
};

// The (2k+1)^k - 1 enumeration is costly for k=5; built once per k.
const PatternTable& pattern_table(int k) {
    static std::mutex mu;
    static std::unordered_map<int, std::unique_ptr<PatternTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(k);
    if (it != cache.end()) return *it->second;

    auto table = std::make_unique<PatternTable>();
    table->k = k;
    for_each_pattern(k, [&](const RelationPattern& r) {
        int zeros = 0;
        std::array<bool, 9> present{};
        for (int v : r) {
            if (v == 0)
                ++zeros;
            else
                present[static_cast<size_t>(std::abs(v))] = true;
        }
        int distinct = 0;
        for (int m = 1; m <= k; ++m) distinct += present[static_cast<size_t>(m)];
        table->values.insert(table->values.end(), r.begin(), r.end());
        table->group.push_back(srf_group_index(k, zeros, distinct));
    });
    const PatternTable& ref = *table;
    cache.emplace(k, std::move(table));
    return ref;
}

}  // namespace

std::vector<uint8_t> srf_features(const StructureMatrix& a) {
    a.validate();
    const int k = a.k;
    const int groups = srf_group_count(k);
    const PatternTable& table = pattern_table(k);
    std::vector<uint8_t> bits(static_cast<size_t>(srf_length(k)), 0);

    const size_t n_patterns = table.group.size();
    for (size_t p = 0; p < n_patterns; ++p) {
        const int g = table.group[p];
        uint8_t& alpha = bits[static_cast<size_t>(g)];
        uint8_t& beta = bits[static_cast<size_t>(groups + g)];
        if (alpha && beta) continue;
        const int* r = &table.values[p * static_cast<size_t>(k)];
        bool is_sym = true, is_skew = true;
        for (int i = 0; i < k && (is_sym || is_skew); ++i) {
            for (int j = i; j < k; ++j) {
                const int vij = a.at(i, j);
                const int vji = a.at(j, i);
                const int x = vij == 0 ? 0 : ((vij > 0) - (vij < 0)) * r[std::abs(vij) - 1];
                const int y = vji == 0 ? 0 : ((vji > 0) - (vji < 0)) * r[std::abs(vji) - 1];
                if (x != y) is_sym = false;
                if (x != -y) is_skew = false;
                if (!is_sym && !is_skew) break;
            }
        }
        if (is_sym) alpha = 1;
        if (is_skew) beta = 1;
    }
    return bits;
}

}  // namespace kgsf
