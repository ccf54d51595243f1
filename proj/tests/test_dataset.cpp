#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "kgsf/dataset.hpp"
#include "kgsf/errors.hpp"
#include "oracles.hpp"

using namespace kgsf;
using namespace kgsf::testing;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

void write_file(const std::filesystem::path& p, const std::string& body) {
    std::ofstream out(p);
    out << body;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("loads a tiny dataset with first-appearance ids") {
    TempDir dir("kgsf_ds_tiny");
    write_file(dir.path / "train.txt", "a\tlikes\tb\nb\tlikes\tc\na\tlikes\tc\n");
    write_file(dir.path / "valid.txt", "");
    write_file(dir.path / "test.txt", "c\tlikes\ta\n");
    const TripleStore store = load_dataset(dir.path.string());
    CHECK(store.num_entities() == 3);
    CHECK(store.num_relations() == 1);
    CHECK(store.train.size() == 3);
    CHECK(store.valid.empty());
    CHECK(store.test.size() == 1);
    CHECK(store.entity_ids.at("a") == 0);
    CHECK(store.entity_ids.at("b") == 1);
    CHECK(store.entity_ids.at("c") == 2);
}

TEST_CASE("duplicate lines within a split collapse") {
    TempDir dir("kgsf_ds_dup");
    write_file(dir.path / "train.txt", "a\tr\tb\na\tr\tb\nb\tr\ta\n");
    write_file(dir.path / "valid.txt", "a\tr\tb\n");  // cross-split duplicate survives
    write_file(dir.path / "test.txt", "");
    const TripleStore store = load_dataset(dir.path.string());
    CHECK(store.train.size() == 2);
    CHECK(store.valid.size() == 1);
}

TEST_CASE("missing and malformed files raise data errors") {
    TempDir dir("kgsf_ds_bad");
    write_file(dir.path / "train.txt", "a\tr\tb\n");
    write_file(dir.path / "valid.txt", "a\tr\n");
    write_file(dir.path / "test.txt", "");
    CHECK_THROWS_WITH_AS(load_dataset(dir.path.string()), doctest::Contains("valid.txt:1"), DataError);

    TempDir dir2("kgsf_ds_missing");
    write_file(dir2.path / "train.txt", "a\tr\tb\n");
    CHECK_THROWS_AS(load_dataset(dir2.path.string()), DataError);
}

TEST_CASE("save then load round-trips; a second save is byte-identical") {
    const TripleStore store = toy_kg(16, 3, 40);
    TempDir dir("kgsf_ds_rt");
    save_dataset(store, dir.path.string());
    const TripleStore again = load_dataset(dir.path.string());

    CHECK(again.num_entities() == store.num_entities());
    CHECK(again.num_relations() == store.num_relations());
    auto names = [](const TripleStore& s, const std::vector<Triple>& split) {
        std::vector<std::array<std::string, 3>> out;
        for (const Triple& x : split)
            out.push_back({s.entity_names[static_cast<size_t>(x.h)], s.relation_names[static_cast<size_t>(x.r)],
                           s.entity_names[static_cast<size_t>(x.t)]});
        return out;
    };
    CHECK(names(again, again.train) == names(store, store.train));
    CHECK(names(again, again.valid) == names(store, store.valid));
    CHECK(names(again, again.test) == names(store, store.test));

    TempDir dir2("kgsf_ds_rt2");
    save_dataset(again, dir2.path.string());
    for (const char* f : {"train.txt", "valid.txt", "test.txt"})
        CHECK(read_file(dir.path / f) == read_file(dir2.path / f));
}

TEST_CASE("filter index covers the union of splits") {
    TempDir dir("kgsf_ds_fi");
    write_file(dir.path / "train.txt", "a\tr\tb\nb\tr\ta\n");
    write_file(dir.path / "valid.txt", "a\tr\tc\n");
    write_file(dir.path / "test.txt", "c\tr\tb\n");
    const TripleStore store = load_dataset(dir.path.string());
    const FilterIndex fi = build_filter_index(store);

    const int32_t a = store.entity_ids.at("a"), b = store.entity_ids.at("b"), c = store.entity_ids.at("c");
    CHECK(fi.tail_known(a, 0, b));
    CHECK(fi.tail_known(b, 0, a));  // symmetric pair indexed both ways
    CHECK(fi.tail_known(a, 0, c));  // valid split included
    CHECK(fi.head_known(c, 0, b));  // test split included
    CHECK_FALSE(fi.tail_known(c, 0, a));
    CHECK(fi.tails_of(c, 1).empty());  // unseen key -> empty set

    // cardinality: sum over keys equals distinct triples in the union
    CHECK(fi.total_tail_entries() == 4);
    CHECK(fi.total_head_entries() == 4);
}

TEST_CASE("single triple filter index") {
    TripleStore store;
    store.add_entity("x");
    store.add_entity("y");
    store.add_relation("r");
    store.train.push_back({0, 0, 1});
    const FilterIndex fi = build_filter_index(store);
    CHECK(fi.tails_of(0, 0) == std::vector<int32_t>{1});
    CHECK(fi.heads_of(0, 1) == std::vector<int32_t>{0});
}

TEST_CASE("relation profiling recovers the generating types") {
    const TripleStore store = toy_kg(24, 9, 80);
    const RelationProfile prof = profile_relations(store);
    REQUIRE(prof.relations.size() == 4);
    CHECK(prof.relations[0].type == RelationType::symmetric);       // r0
    CHECK(prof.relations[1].type == RelationType::anti_symmetric);  // r1
    CHECK(prof.relations[2].type == RelationType::anti_symmetric);  // r2 (inverse pair)
    CHECK(prof.relations[3].type == RelationType::anti_symmetric);
    CHECK(prof.relations[2].inverse);
    CHECK(prof.relations[3].inverse);
    CHECK(prof.relations[2].inverse_partner == 3);
    CHECK(prof.relations[3].inverse_partner == 2);
    CHECK_FALSE(prof.relations[1].inverse);
}

TEST_CASE("profiling flags zero-count relations as general") {
    TripleStore store;
    store.add_entity("a");
    store.add_entity("b");
    store.add_relation("used");
    store.add_relation("unused");
    store.train.push_back({0, 0, 1});
    const RelationProfile prof = profile_relations(store);
    CHECK(prof.relations[1].type == RelationType::general_asymmetric);
    CHECK(prof.relations[1].total == 0);
    CHECK(prof.relations[0].type == RelationType::anti_symmetric);
}

TEST_CASE("synthetic generator is deterministic and honours pairing") {
    const TripleStore a = generate_synthetic_kg({30, {{SyntheticRelationType::symmetric, 60}}}, 77);
    const TripleStore b = generate_synthetic_kg({30, {{SyntheticRelationType::symmetric, 60}}}, 77);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    CHECK(a.test == b.test);
    const TripleStore c = generate_synthetic_kg({30, {{SyntheticRelationType::symmetric, 60}}}, 78);
    CHECK(a.train != c.train);

    // both directions of every symmetric edge share a split
    for (const auto* split : {&a.train, &a.valid, &a.test}) {
        std::unordered_set<Triple, TripleHash> set(split->begin(), split->end());
        for (const Triple& x : *split) CHECK(set.count(Triple{x.t, x.r, x.h}) == 1);
    }
    const size_t total = a.train.size() + a.valid.size() + a.test.size();
    CHECK(total == 60);
}

TEST_CASE("synthetic splits are disjoint") {
    const TripleStore store = toy_kg(40, 13, 120);
    std::unordered_set<Triple, TripleHash> seen;
    for (const auto* split : {&store.train, &store.valid, &store.test})
        for (const Triple& x : *split) CHECK(seen.insert(x).second);
}

TEST_SUITE_END();
