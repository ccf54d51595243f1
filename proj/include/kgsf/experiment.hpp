#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kgsf/dataset.hpp"
#include "kgsf/evaluator.hpp"
#include "kgsf/search.hpp"
#include "kgsf/trainer.hpp"

namespace kgsf {

struct StageOneConfig {
    int trials = 10;
    std::string probe = "simple";  // structure trained under each draw
    int probe_d = 64;
    int epochs = 100;
};

struct StageThreeConfig {
    int trials = 50;
    std::vector<int> dims = {256, 512, 1024, 2048};
    int epochs = 100;
};

struct ExperimentConfig {
    std::string data_dir;
    std::string out_dir;
    int k = 4;
    uint64_t seed = 0;
    SearchConfig search;
    StageOneConfig stage1;
    StageThreeConfig stage3;
};

struct HpTrial {
    HyperParams hp;
    double val_mrr = 0.0;
};

// Stage 1: random hyperparameter probe at small d on a fixed structure.
// eta uniform in (0, 1], lambda log-uniform in [1e-5, 1e-1], batch size
// from {256, 512, 1024} clamped to the training-set size.  Returns the
// draw with the best validation MRR; all trials go to `trials` when given.
HyperParams hpsearch(const ExperimentConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                     std::vector<HpTrial>* trials = nullptr);

struct FinalReport {
    StructureMatrix structure;
    HyperParams hp;
    double val_mrr = 0.0;
    EvalReport test;
    int test_evaluations = 0;  // protocol check: must be 1

    std::string to_json_string() const;
};

// Stage 3: samples (structure from the searched top set, eta, lambda,
// batch, d) per trial, trains at full dimension, picks the best validation
// MRR, and evaluates the winner on the test split exactly once.
FinalReport finetune(const ExperimentConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                     const std::vector<SearchRecord>& top);

// --- multi-hop queries ---------------------------------------------------

struct PathQuery {
    int32_t source = 0;
    std::vector<int32_t> relations;
    int32_t target = 0;
};

struct PathQuerySet {
    int length = 2;
    std::string split = "test";
    std::vector<PathQuery> queries;
};

// Samples n distinct random walks of length L over the training split.
// Throws DataError when no length-L path exists after bounded attempts.
PathQuerySet generate_path_queries(const TripleStore& data, int length, int n, uint64_t seed);

void save_path_queries(const PathQuerySet& qs, const TripleStore& data, const std::string& path);
PathQuerySet load_path_queries(const TripleStore& data, const std::string& path);

// Ranks the true terminal of each query against all entities, filtering
// every other terminal reachable from the source through the same relation
// sequence in the training split.  Tail-side ranks only.
EvalReport evaluate_path_queries(const ScorerOps& ops, const EmbeddingStore& store, const PathQuerySet& qs,
                                 const TripleStore& data, bool parallel = true);

// Trains embeddings on path queries with the same full multi-class
// log-loss over terminal entities (neg_samples > 0 switches to a sampled
// candidate set of that size plus the true terminal).
std::pair<EmbeddingStore, TrainReport> train_queries(const StructureMatrix& a, EmbeddingStore init,
                                                     const TripleStore& data, const PathQuerySet& train_qs,
                                                     const PathQuerySet& valid_qs, const HyperParams& hp,
                                                     int neg_samples = 0);

}  // namespace kgsf
