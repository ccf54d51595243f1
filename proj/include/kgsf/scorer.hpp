#pragma once

#include <cstdint>
#include <vector>

#include "kgsf/embedding.hpp"
#include "kgsf/structure.hpp"

namespace kgsf {

// Nonzero cells of a structure matrix, unpacked for the scoring kernels.
// Scoring never materializes the d x d relation operator; every kernel
// walks this list and works on chunks, costing O(d * nnz / k).
struct ScorerOps {
    struct Cell {
        int8_t i, j;   // block row / column, 0-based
        int8_t m;      // relation chunk, 0-based
        int8_t sign;   // +1 or -1
    };
    int k = 4;
    std::vector<Cell> cells;

    ScorerOps() = default;
    explicit ScorerOps(const StructureMatrix& a);
};

// out = g(a, r) * t, blockwise: out chunk i += sign * (r chunk m ⊙ t chunk j).
void apply_relation(const ScorerOps& ops, const double* r_vec, const double* t_vec, double* out, int d);
// out = g(a, r)^T * h; same cell list with block indices swapped.
void apply_relation_t(const ScorerOps& ops, const double* r_vec, const double* h_vec, double* out, int d);

std::vector<double> apply_relation(const ScorerOps& ops, const std::vector<double>& r_vec,
                                   const std::vector<double>& t_vec);

double score_triple(const ScorerOps& ops, const EmbeddingStore& store, int32_t h, int32_t r, int32_t t);

// Scores against every entity via one operator application plus an
// entity-matrix product.  The _serial variants are the reference
// implementations the OpenMP kernels are tested against.
void score_all_tails(const ScorerOps& ops, const EmbeddingStore& store, int32_t h, int32_t r, double* out);
void score_all_heads(const ScorerOps& ops, const EmbeddingStore& store, int32_t r, int32_t t, double* out);
void score_all_tails_serial(const ScorerOps& ops, const EmbeddingStore& store, int32_t h, int32_t r, double* out);
void score_all_heads_serial(const ScorerOps& ops, const EmbeddingStore& store, int32_t r, int32_t t, double* out);

// Chains the relation operators right-to-left over the tail embedding:
// e0^T g(a, r1) ... g(a, rL) eL.  A single relation reduces to score_triple.
double score_path(const ScorerOps& ops, const EmbeddingStore& store, int32_t e0,
                  const std::vector<int32_t>& relations, int32_t eL);

// Terminal-side scores for a path prefix: out[e] = score_path(e0, relations, e).
void score_path_all_terminals(const ScorerOps& ops, const EmbeddingStore& store, int32_t e0,
                              const std::vector<int32_t>& relations, double* out);

// Chunk-product accumulation shared by the gradient paths: for each cell,
// rel_grad chunk m += sign * (row_side chunk i ⊙ col_side chunk j).
void accumulate_relation_grad(const ScorerOps& ops, const double* row_side, const double* col_side,
                              double* rel_grad, int d);

}  // namespace kgsf
