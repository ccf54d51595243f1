#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kgsf/dataset.hpp"
#include "kgsf/embedding.hpp"
#include "kgsf/scorer.hpp"

namespace kgsf {

struct EvalReport {
    double mrr = 0.0;
    std::map<int, double> h_at;            // k -> ratio, k in {1, 3, 10}
    std::vector<int32_t> head_ranks;       // per triple
    std::vector<int32_t> tail_ranks;

    double h1() const { return h_at.count(1) ? h_at.at(1) : 0.0; }
    double h3() const { return h_at.count(3) ? h_at.at(3) : 0.0; }
    double h10() const { return h_at.count(10) ? h_at.at(10) : 0.0; }

    std::string to_json_string() const;
};

// Filtered ranking: rank = 1 + |{e : f(e) >= f(true) and the corrupted
// triple is not known in any split}|.  Ties count against the true entity.
// Head and tail ranks of every triple enter MRR and H@k with equal weight.
// parallel=false is the serial reference used by the kernel tests.
EvalReport evaluate(const ScorerOps& ops, const EmbeddingStore& store, const std::vector<Triple>& triples,
                    const FilterIndex& filter, bool parallel = true);

// Aggregates ranks into MRR / H@k; exposed for the path-query evaluator.
EvalReport aggregate_ranks(std::vector<int32_t> head_ranks, std::vector<int32_t> tail_ranks);

}  // namespace kgsf
