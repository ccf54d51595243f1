#include "kgsf/evaluator.hpp"

#include <cmath>

#include "json.hpp"

namespace kgsf {

namespace {

int32_t filtered_rank(const double* scores, int32_t n_entities, double true_score,
                      const std::vector<int32_t>& known) {
    // Eq.-style pessimistic count: competitors score at least the true
    // score and are not known true triples in any split.
    int32_t rank = 1;
    size_t ki = 0;
    for (int32_t e = 0; e < n_entities; ++e) {
        while (ki < known.size() && known[ki] < e) ++ki;
        if (ki < known.size() && known[ki] == e) continue;
        if (scores[e] >= true_score) ++rank;
    }
    return rank;
}

}  // namespace

EvalReport aggregate_ranks(std::vector<int32_t> head_ranks, std::vector<int32_t> tail_ranks) {
    EvalReport report;
    report.h_at = {{1, 0.0}, {3, 0.0}, {10, 0.0}};
    const size_t n = head_ranks.size() + tail_ranks.size();
    if (n == 0) return report;
    double mrr = 0.0;
    auto tally = [&](const std::vector<int32_t>& ranks) {
        for (int32_t r : ranks) {
            mrr += 1.0 / static_cast<double>(r);
            for (auto& [k, v] : report.h_at)
                if (r <= k) v += 1.0;
        }
    };
    tally(head_ranks);
    tally(tail_ranks);
    report.mrr = mrr / static_cast<double>(n);
    for (auto& [k, v] : report.h_at) v /= static_cast<double>(n);
    report.head_ranks = std::move(head_ranks);
    report.tail_ranks = std::move(tail_ranks);
    return report;
}

EvalReport evaluate(const ScorerOps& ops, const EmbeddingStore& store, const std::vector<Triple>& triples,
                    const FilterIndex& filter, bool parallel) {
    const int n = static_cast<int>(triples.size());
    std::vector<int32_t> head_ranks(static_cast<size_t>(n)), tail_ranks(static_cast<size_t>(n));

#pragma omp parallel if (parallel)
    {
        std::vector<double> scores(static_cast<size_t>(store.n_entities));
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            const Triple& x = triples[static_cast<size_t>(i)];
            score_all_tails_serial(ops, store, x.h, x.r, scores.data());
            tail_ranks[static_cast<size_t>(i)] = filtered_rank(scores.data(), store.n_entities,
                                                               scores[static_cast<size_t>(x.t)],
                                                               filter.tails_of(x.h, x.r));
            score_all_heads_serial(ops, store, x.r, x.t, scores.data());
            head_ranks[static_cast<size_t>(i)] = filtered_rank(scores.data(), store.n_entities,
                                                               scores[static_cast<size_t>(x.h)],
                                                               filter.heads_of(x.r, x.t));
        }
    }
    return aggregate_ranks(std::move(head_ranks), std::move(tail_ranks));
}

std::string EvalReport::to_json_string() const {
    nlohmann::json j;
    j["mrr"] = mrr;
    for (const auto& [k, v] : h_at) j["h_at"][std::to_string(k)] = v;
    j["head_ranks"] = head_ranks;
    j["tail_ranks"] = tail_ranks;
    return j.dump();
}

}  // namespace kgsf
