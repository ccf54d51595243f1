// Times the OpenMP scoring/evaluation/gradient kernels against their serial
// reference implementations on a synthetic store.
#include <cstdio>
#include <string>
#include <vector>

#include <omp.h>

#include "kgsf/dataset.hpp"
#include "kgsf/evaluator.hpp"
#include "kgsf/scorer.hpp"
#include "kgsf/trainer.hpp"

using namespace kgsf;

namespace {

template <class F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const double t0 = omp_get_wtime();
        fn();
        best = std::min(best, omp_get_wtime() - t0);
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    int n_entities = 2000;
    int d = 64;
    int n_triples = 2000;
    if (argc > 1) n_entities = std::atoi(argv[1]);
    if (argc > 2) d = std::atoi(argv[2]);
    if (argc > 3) n_triples = std::atoi(argv[3]);

    SyntheticSpec spec;
    spec.n_entities = n_entities;
    spec.relations = {{SyntheticRelationType::symmetric, n_triples / 3},
                      {SyntheticRelationType::anti_symmetric, n_triples / 3},
                      {SyntheticRelationType::inverse_pair, n_triples / 3}};
    const TripleStore data = generate_synthetic_kg(spec, 7);
    const FilterIndex fi = build_filter_index(data);

    HyperParams hp;
    hp.d = d;
    hp.seed = 11;
    const StructureMatrix a = builtin_structure("complex");
    const ScorerOps ops(a);
    const EmbeddingStore store = init_embeddings(data.num_entities(), data.num_relations(), a.k, hp);

    std::printf("entities=%d  d=%d  train=%zu  valid=%zu  threads=%d\n", n_entities, d, data.train.size(),
                data.valid.size(), omp_get_max_threads());
    std::printf("%-28s %12s %12s %8s\n", "kernel", "serial (s)", "openmp (s)", "speedup");

    std::vector<double> scores(static_cast<size_t>(store.n_entities));
    const int queries = 200;
    const double t_serial = time_best_of(3, [&] {
        for (int q = 0; q < queries; ++q)
            score_all_tails_serial(ops, store, q % store.n_entities, 0, scores.data());
    });
    const double t_par = time_best_of(3, [&] {
        for (int q = 0; q < queries; ++q) score_all_tails(ops, store, q % store.n_entities, 0, scores.data());
    });
    std::printf("%-28s %12.4f %12.4f %7.2fx\n", "score_all_tails x200", t_serial, t_par, t_serial / t_par);

    const std::vector<Triple> eval_set(data.valid.begin(),
                                       data.valid.begin() + std::min<size_t>(data.valid.size(), 500));
    const double e_serial = time_best_of(3, [&] { evaluate(ops, store, eval_set, fi, false); });
    const double e_par = time_best_of(3, [&] { evaluate(ops, store, eval_set, fi, true); });
    std::printf("%-28s %12.4f %12.4f %7.2fx\n", "evaluate (filtered ranks)", e_serial, e_par, e_serial / e_par);

    const std::vector<Triple> batch(data.train.begin(), data.train.begin() + std::min<size_t>(data.train.size(), 256));
    GradientBuffers grad;
    grad.resize_like(store);
    const double b_serial = time_best_of(3, [&] {
        grad.clear();
        batch_loss(ops, store, batch, 1e-4, grad, false);
    });
    const double b_par = time_best_of(3, [&] {
        grad.clear();
        batch_loss(ops, store, batch, 1e-4, grad, true);
    });
    std::printf("%-28s %12.4f %12.4f %7.2fx\n", "batch_loss (256 triples)", b_serial, b_par, b_serial / b_par);
    return 0;
}
