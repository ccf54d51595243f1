#include "kgsf/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "kgsf/errors.hpp"
#include "kgsf/rng.hpp"

namespace kgsf {

namespace {

uint64_t pair_key(int32_t a, int32_t b) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) | static_cast<uint32_t>(b);
}

const std::vector<int32_t> kEmpty;

}  // namespace

int32_t TripleStore::add_entity(const std::string& name) {
    auto it = entity_ids.find(name);
    if (it != entity_ids.end()) return it->second;
    const int32_t id = static_cast<int32_t>(entity_names.size());
    entity_names.push_back(name);
    entity_ids.emplace(name, id);
    return id;
}

int32_t TripleStore::add_relation(const std::string& name) {
    auto it = relation_ids.find(name);
    if (it != relation_ids.end()) return it->second;
    const int32_t id = static_cast<int32_t>(relation_names.size());
    relation_names.push_back(name);
    relation_ids.emplace(name, id);
    return id;
}

namespace {

void load_split(TripleStore& store, const std::string& path, std::vector<Triple>& out) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::unordered_set<Triple, TripleHash> seen;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t tab1 = line.find('\t');
        const size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos || line.find('\t', tab2 + 1) != std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields");
        const std::string h = line.substr(0, tab1);
        const std::string r = line.substr(tab1 + 1, tab2 - tab1 - 1);
        const std::string t = line.substr(tab2 + 1);
        if (h.empty() || r.empty() || t.empty())
            throw DataError(path + ":" + std::to_string(line_no) + ": empty field");
        Triple triple{store.add_entity(h), store.add_relation(r), store.add_entity(t)};
        if (seen.insert(triple).second) out.push_back(triple);
    }
}

}  // namespace

TripleStore load_dataset(const std::string& dir) {
    TripleStore store;
    load_split(store, dir + "/train.txt", store.train);
    load_split(store, dir + "/valid.txt", store.valid);
    load_split(store, dir + "/test.txt", store.test);
    return store;
}

void save_dataset(const TripleStore& store, const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto write_split = [&](const char* name, const std::vector<Triple>& triples) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw DataError(std::string("cannot write ") + dir + "/" + name);
        for (const Triple& x : triples)
            out << store.entity_names[static_cast<size_t>(x.h)] << '\t'
                << store.relation_names[static_cast<size_t>(x.r)] << '\t'
                << store.entity_names[static_cast<size_t>(x.t)] << '\n';
    };
    write_split("train.txt", store.train);
    write_split("valid.txt", store.valid);
    write_split("test.txt", store.test);

    std::ofstream ents(dir + "/entities.dict");
    for (size_t i = 0; i < store.entity_names.size(); ++i) ents << store.entity_names[i] << '\t' << i << '\n';
    std::ofstream rels(dir + "/relations.dict");
    for (size_t i = 0; i < store.relation_names.size(); ++i) rels << store.relation_names[i] << '\t' << i << '\n';
}

const std::vector<int32_t>& FilterIndex::tails_of(int32_t h, int32_t r) const {
    auto it = tails_.find(pair_key(h, r));
    return it == tails_.end() ? kEmpty : it->second;
}

const std::vector<int32_t>& FilterIndex::heads_of(int32_t r, int32_t t) const {
    auto it = heads_.find(pair_key(r, t));
    return it == heads_.end() ? kEmpty : it->second;
}

bool FilterIndex::tail_known(int32_t h, int32_t r, int32_t t) const {
    const auto& v = tails_of(h, r);
    return std::binary_search(v.begin(), v.end(), t);
}

bool FilterIndex::head_known(int32_t h, int32_t r, int32_t t) const {
    const auto& v = heads_of(r, t);
    return std::binary_search(v.begin(), v.end(), h);
}

size_t FilterIndex::total_tail_entries() const {
    size_t n = 0;
    for (const auto& [k, v] : tails_) n += v.size();
    return n;
}

size_t FilterIndex::total_head_entries() const {
    size_t n = 0;
    for (const auto& [k, v] : heads_) n += v.size();
    return n;
}

FilterIndex build_filter_index(const TripleStore& store) {
    FilterIndex fi;
    auto add = [&](const std::vector<Triple>& triples) {
        for (const Triple& x : triples) {
            fi.tails_[pair_key(x.h, x.r)].push_back(x.t);
            fi.heads_[pair_key(x.r, x.t)].push_back(x.h);
        }
    };
    add(store.train);
    add(store.valid);
    add(store.test);
    for (auto& [k, v] : fi.tails_) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (auto& [k, v] : fi.heads_) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return fi;
}

RelationProfile profile_relations(const TripleStore& store, Split split) {
    const std::vector<Triple>& triples = store.split(split);
    const int32_t n_rel = store.num_relations();
    RelationProfile profile;
    profile.relations.resize(static_cast<size_t>(n_rel));

    std::unordered_set<Triple, TripleHash> present(triples.begin(), triples.end());
    // (t, h) -> relations r' with (t, r', h) in the split
    std::unordered_map<uint64_t, std::vector<int32_t>> by_pair;
    for (const Triple& x : triples) by_pair[pair_key(x.h, x.t)].push_back(x.r);

    // reverse_count[r][r'] over pairs that actually occur
    std::vector<std::unordered_map<int32_t, int64_t>> reverse_count(static_cast<size_t>(n_rel));
    for (const Triple& x : triples) {
        auto& stats = profile.relations[static_cast<size_t>(x.r)];
        ++stats.total;
        if (present.count(Triple{x.t, x.r, x.h})) ++stats.reversed;
        auto it = by_pair.find(pair_key(x.t, x.h));
        if (it != by_pair.end())
            for (int32_t rp : it->second) ++reverse_count[static_cast<size_t>(x.r)][rp];
    }

    for (int32_t r = 0; r < n_rel; ++r) {
        auto& stats = profile.relations[static_cast<size_t>(r)];
        if (stats.total == 0) {
            stats.type = RelationType::general_asymmetric;
            continue;
        }
        if (2 * stats.reversed > stats.total)
            stats.type = RelationType::symmetric;
        else if (stats.reversed == 0)
            stats.type = RelationType::anti_symmetric;
        else
            stats.type = RelationType::general_asymmetric;
        for (const auto& [rp, cnt] : reverse_count[static_cast<size_t>(r)]) {
            if (rp == r) continue;
            if (2 * cnt > stats.total) {
                stats.inverse = true;
                stats.inverse_partner = rp;
                break;
            }
        }
    }
    return profile;
}

TripleStore generate_synthetic_kg(const SyntheticSpec& spec, uint64_t seed) {
    if (spec.n_entities < 4) throw ConfigError("generate_synthetic_kg: need at least 4 entities");
    for (const auto& rel : spec.relations)
        if (rel.n_triples < 1) throw ConfigError("generate_synthetic_kg: each relation needs n_triples >= 1");

    TripleStore store;
    for (int e = 0; e < spec.n_entities; ++e) store.add_entity("e" + std::to_string(e));

    Rng rng(seed);
    const int n = spec.n_entities;
    // A group is a set of triples that must live in one split.
    std::vector<std::vector<Triple>> groups;

    int rel_counter = 0;
    for (const auto& rel : spec.relations) {
        const std::string base = "r" + std::to_string(rel_counter++);
        if (rel.type == SyntheticRelationType::inverse_pair) {
            const int32_t ra = store.add_relation(base);
            const int32_t rb = store.add_relation(base + "_inv");
            const int n_pairs = std::max(1, rel.n_triples / 2);
            std::unordered_set<uint64_t> used;
            int made = 0, attempts = 0;
            while (made < n_pairs && attempts < 100 * n_pairs + 1000) {
                ++attempts;
                const int32_t a = rng.uniform_int(0, n - 1);
                const int32_t b = rng.uniform_int(0, n - 1);
                if (a == b) continue;
                // one direction per unordered pair keeps both members anti-symmetric
                if (used.count(pair_key(b, a)) || !used.insert(pair_key(a, b)).second) continue;
                // the two members split independently, so a held-out query
                // usually has its partner triple observable in training
                groups.push_back({Triple{a, ra, b}});
                groups.push_back({Triple{b, rb, a}});
                ++made;
            }
        } else if (rel.type == SyntheticRelationType::symmetric) {
            const int32_t r = store.add_relation(base);
            const int n_pairs = std::max(1, rel.n_triples / 2);
            std::unordered_set<uint64_t> used;
            int made = 0, attempts = 0;
            while (made < n_pairs && attempts < 100 * n_pairs + 1000) {
                ++attempts;
                int32_t a = rng.uniform_int(0, n - 1);
                int32_t b = rng.uniform_int(0, n - 1);
                if (a == b) continue;
                if (a > b) std::swap(a, b);
                if (!used.insert(pair_key(a, b)).second) continue;
                groups.push_back({Triple{a, r, b}, Triple{b, r, a}});
                ++made;
            }
        } else {
            const int32_t r = store.add_relation(base);
            std::unordered_set<uint64_t> used;
            int made = 0, attempts = 0;
            while (made < rel.n_triples && attempts < 100 * rel.n_triples + 1000) {
                ++attempts;
                const int32_t a = rng.uniform_int(0, n - 1);
                const int32_t b = rng.uniform_int(0, n - 1);
                if (a == b) continue;
                // keep the relation strictly anti-symmetric: never emit both directions
                if (used.count(pair_key(b, a)) || !used.insert(pair_key(a, b)).second) continue;
                groups.push_back({Triple{a, r, b}});
                ++made;
            }
        }
    }

    for (const auto& group : groups) {
        const double u = rng.uniform();
        std::vector<Triple>& split = u < 0.8 ? store.train : (u < 0.9 ? store.valid : store.test);
        for (const Triple& x : group) split.push_back(x);
    }
    return store;
}

}  // namespace kgsf
