#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kgsf {

struct Triple {
    int32_t h = 0, r = 0, t = 0;
    bool operator==(const Triple& o) const { return h == o.h && r == o.r && t == o.t; }
};

struct TripleHash {
    size_t operator()(const Triple& x) const {
        uint64_t v = (static_cast<uint64_t>(static_cast<uint32_t>(x.h)) << 40) ^
                     (static_cast<uint64_t>(static_cast<uint32_t>(x.r)) << 20) ^
                     static_cast<uint32_t>(x.t);
        v *= 0x9e3779b97f4a7c15ULL;
        return static_cast<size_t>(v ^ (v >> 29));
    }
};

enum class Split { train, valid, test };

struct TripleStore {
    std::vector<std::string> entity_names;
    std::vector<std::string> relation_names;
    std::unordered_map<std::string, int32_t> entity_ids;
    std::unordered_map<std::string, int32_t> relation_ids;
    std::vector<Triple> train, valid, test;

    int32_t num_entities() const { return static_cast<int32_t>(entity_names.size()); }
    int32_t num_relations() const { return static_cast<int32_t>(relation_names.size()); }

    const std::vector<Triple>& split(Split s) const {
        return s == Split::train ? train : (s == Split::valid ? valid : test);
    }

    int32_t add_entity(const std::string& name);
    int32_t add_relation(const std::string& name);
};

// Reads train.txt / valid.txt / test.txt ("head<TAB>relation<TAB>tail" per
// line, UTF-8).  Vocabularies are assigned by first appearance over
// train, valid, test in that order; duplicate lines within a split are
// dropped.  Missing file -> DataError; malformed line -> DataError with
// the line number.
TripleStore load_dataset(const std::string& dir);

// Writes the three split files plus entities.dict / relations.dict
// ("name<TAB>id").
void save_dataset(const TripleStore& store, const std::string& dir);

// (h, r) -> known tails and (r, t) -> known heads over the union of all
// three splits; this is the exclusion set for filtered ranking.
class FilterIndex {
public:
    FilterIndex() = default;

    const std::vector<int32_t>& tails_of(int32_t h, int32_t r) const;
    const std::vector<int32_t>& heads_of(int32_t r, int32_t t) const;
    bool tail_known(int32_t h, int32_t r, int32_t t) const;
    bool head_known(int32_t h, int32_t r, int32_t t) const;

    size_t total_tail_entries() const;
    size_t total_head_entries() const;

    friend FilterIndex build_filter_index(const TripleStore& store);

private:
    std::unordered_map<uint64_t, std::vector<int32_t>> tails_;  // key (h, r)
    std::unordered_map<uint64_t, std::vector<int32_t>> heads_;  // key (r, t)
};

FilterIndex build_filter_index(const TripleStore& store);

enum class RelationType { symmetric, anti_symmetric, general_asymmetric };

struct RelationStats {
    int64_t total = 0;             // triples of this relation in the profiled split
    int64_t reversed = 0;          // of those, how many have the reversed triple present
    RelationType type = RelationType::general_asymmetric;
    bool inverse = false;          // some other relation reverses more than half
    int32_t inverse_partner = -1;  // one witness partner when inverse
};

struct RelationProfile {
    std::vector<RelationStats> relations;  // indexed by relation id
};

// Relation typing on one split (training split unless stated otherwise):
// symmetric when more than half of the triples have their reverse present,
// anti-symmetric when none do, general asymmetric otherwise.  A relation is
// additionally inverse when some *other* relation reverses more than half
// of its triples.  Relations absent from the split stay general asymmetric
// with zero counts.
RelationProfile profile_relations(const TripleStore& store, Split split = Split::train);

enum class SyntheticRelationType { symmetric, anti_symmetric, inverse_pair };

struct SyntheticRelationSpec {
    SyntheticRelationType type = SyntheticRelationType::symmetric;
    int n_triples = 100;  // total emitted triples for this spec entry
};

struct SyntheticSpec {
    int n_entities = 50;
    std::vector<SyntheticRelationSpec> relations;
};

// Deterministic toy-KG generator.  Each spec entry becomes one relation
// (inverse_pair becomes two).  Paired triples (both directions of a
// symmetric edge, both members of an inverse pair) always land in the same
// split; splits are 80/10/10 by seeded draw.
TripleStore generate_synthetic_kg(const SyntheticSpec& spec, uint64_t seed);

}  // namespace kgsf
