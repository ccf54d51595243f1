#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kgsf {

struct HyperParams {
    int d = 64;
    double eta = 0.1;
    double lambda = 1e-4;
    int batch_size = 256;
    int epochs = 100;
    uint64_t seed = 0;

    void validate(int k) const;  // throws ConfigError
};

// Entity and relation embeddings, row-major.  Each row splits into k
// contiguous chunks of width d/k; chunk m of a relation row is the
// diagonal block selected by structure entries of absolute value m.
struct EmbeddingStore {
    int32_t n_entities = 0;
    int32_t n_relations = 0;
    int d = 0;
    int k = 4;
    uint64_t seed = 0;
    std::vector<double> entity;    // n_entities x d
    std::vector<double> relation;  // n_relations x d

    int chunk_width() const { return d / k; }

    double* ent_row(int32_t i) { return &entity[static_cast<size_t>(i) * d]; }
    const double* ent_row(int32_t i) const { return &entity[static_cast<size_t>(i) * d]; }
    double* rel_row(int32_t i) { return &relation[static_cast<size_t>(i) * d]; }
    const double* rel_row(int32_t i) const { return &relation[static_cast<size_t>(i) * d]; }
};

// Entries i.i.d. uniform in [-0.5/sqrt(d), 0.5/sqrt(d)] from hp.seed.
EmbeddingStore init_embeddings(int32_t n_entities, int32_t n_relations, int k, const HyperParams& hp);

// Checkpoint layout: five little-endian u64 (|E|, |R|, d, k, seed)
// followed by entity then relation rows as little-endian binary64.
void save_checkpoint(const EmbeddingStore& store, const std::string& path);
EmbeddingStore load_checkpoint(const std::string& path);

}  // namespace kgsf
