#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kgsf/dataset.hpp"
#include "kgsf/embedding.hpp"
#include "kgsf/scorer.hpp"

namespace kgsf {

// Dense gradient buffers matching an EmbeddingStore.  Every entity row
// receives softmax gradient from each batch triple; relation rows are
// touched only by the batch's relations (their gradients stay zero).
struct GradientBuffers {
    std::vector<double> entity;
    std::vector<double> relation;

    void resize_like(const EmbeddingStore& store);
    void clear();
};

// Full multi-class log-loss over both query directions plus an l2 penalty
// on the rows each triple touches.  Returns the summed batch loss and
// accumulates gradients into grad.  Parallelises over batch triples with
// per-thread buffers combined in thread order, so results are reproducible
// for a fixed thread count; parallel=false is the serial reference.
double batch_loss(const ScorerOps& ops, const EmbeddingStore& store, const std::vector<Triple>& batch,
                  double lambda, GradientBuffers& grad, bool parallel = true);

struct AdaGradState {
    std::vector<double> entity_acc;
    std::vector<double> relation_acc;
    double eps = 1e-10;

    void resize_like(const EmbeddingStore& store);
};

// G += g^2; theta -= eta * g / (sqrt(G) + eps), per parameter.
void adagrad_step(EmbeddingStore& store, AdaGradState& acc, const GradientBuffers& grad, double eta);

struct TrainReport {
    double final_train_loss = 0.0;  // mean per-triple loss over the last epoch
    double val_mrr = 0.0;
    double val_h1 = 0.0;
    double val_h10 = 0.0;
    int epochs_run = 0;
    double wall_clock_seconds = 0.0;
};

struct TrainOptions {
    bool parallel = true;           // inner-kernel OpenMP; nested calls serialise themselves
    int val_sample = 0;             // 0 = evaluate the full validation split
    std::string curve_path;         // when set, appends "epoch,loss,val_mrr,seconds" per epoch
    int curve_val_every = 0;        // 0 = skip per-epoch validation in the curve
};

// Inner loop of the bi-level search objective: epochs of shuffled
// mini-batches on the training split, then validation MRR on the frozen
// store.  Deterministic given hp.seed and a fixed thread count.  The
// caller is responsible for filtering degenerate structures first.
// Throws NumericError with (structure, epoch, batch) on non-finite loss.
std::pair<EmbeddingStore, TrainReport> train_structure(const StructureMatrix& a, EmbeddingStore init,
                                                       const TripleStore& data, const FilterIndex& filter,
                                                       const HyperParams& hp, const TrainOptions& opts = {});

// Convenience overload that draws the initial embeddings from hp.seed.
std::pair<EmbeddingStore, TrainReport> train_structure(const StructureMatrix& a, const TripleStore& data,
                                                       const FilterIndex& filter, const HyperParams& hp,
                                                       const TrainOptions& opts = {});

}  // namespace kgsf
