#include <cmath>

#include "doctest.h"
#include "kgsf/errors.hpp"
#include "kgsf/evaluator.hpp"
#include "kgsf/trainer.hpp"
#include "oracles.hpp"

using namespace kgsf;
using namespace kgsf::testing;

namespace {

// loss-only evaluation used by the finite-difference oracle
double loss_only(const ScorerOps& ops, const EmbeddingStore& store, const std::vector<Triple>& batch,
                 double lambda) {
    GradientBuffers grad;
    grad.resize_like(store);
    return batch_loss(ops, store, batch, lambda, grad, false);
}

double max_grad_rel_err(const StructureMatrix& a, const EmbeddingStore& store, const std::vector<Triple>& batch,
                        double lambda) {
    const ScorerOps ops(a);
    GradientBuffers grad;
    grad.resize_like(store);
    batch_loss(ops, store, batch, lambda, grad, false);

    const double step = 1e-6;
    double worst = 0.0;
    auto probe = [&](std::vector<double> EmbeddingStore::*field, const std::vector<double>& analytic) {
        EmbeddingStore mutated = store;
        for (size_t i = 0; i < (store.*field).size(); ++i) {
            (mutated.*field)[i] = (store.*field)[i] + step;
            const double up = loss_only(ops, mutated, batch, lambda);
            (mutated.*field)[i] = (store.*field)[i] - step;
            const double down = loss_only(ops, mutated, batch, lambda);
            (mutated.*field)[i] = (store.*field)[i];
            const double numeric = (up - down) / (2.0 * step);
            worst = std::max(worst, std::abs(numeric - analytic[i]) /
                                        std::max({1.0, std::abs(numeric), std::abs(analytic[i])}));
        }
    };
    probe(&EmbeddingStore::entity, grad.entity);
    probe(&EmbeddingStore::relation, grad.relation);
    return worst;
}

TripleStore five_entity_kg() {
    TripleStore store;
    for (int e = 0; e < 5; ++e) store.add_entity("e" + std::to_string(e));
    store.add_relation("p");
    store.add_relation("q");
    store.train = {{0, 0, 1}, {1, 0, 2}, {2, 1, 3}, {3, 1, 4}, {4, 0, 0}, {0, 1, 2}};
    store.valid = {{1, 1, 3}};
    store.test = {{2, 0, 4}};
    return store;
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("uniform embeddings give the uniform cross entropy") {
    EmbeddingStore store;
    store.n_entities = 7;
    store.n_relations = 1;
    store.d = 8;
    store.k = 4;
    store.entity.assign(7 * 8, 0.25);
    store.relation.assign(8, 0.25);
    const ScorerOps ops(builtin_structure("distmult"));
    GradientBuffers grad;
    grad.resize_like(store);
    const std::vector<Triple> batch{{0, 0, 1}};
    const double loss = batch_loss(ops, store, batch, 0.0, grad, false);
    CHECK(loss == doctest::Approx(2.0 * std::log(7.0)).epsilon(1e-12));

    // with regularization the row norms are added once per triple
    const double reg_loss = batch_loss(ops, store, batch, 0.5, grad, false);
    const double norms = 3 * 8 * 0.25 * 0.25;
    CHECK(reg_loss == doctest::Approx(2.0 * std::log(7.0) + 0.5 * norms).epsilon(1e-12));
}

TEST_CASE("duplicated triple doubles its loss contribution") {
    const EmbeddingStore store = random_store(6, 2, 8, 4, 19);
    const ScorerOps ops(builtin_structure("complex"));
    GradientBuffers grad;
    grad.resize_like(store);
    const double once = batch_loss(ops, store, {{0, 0, 1}}, 1e-3, grad, false);
    grad.clear();
    const double twice = batch_loss(ops, store, {{0, 0, 1}, {0, 0, 1}}, 1e-3, grad, false);
    CHECK(twice == doctest::Approx(2.0 * once).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    const TripleStore data = five_entity_kg();
    std::vector<StructureMatrix> structures;
    for (const auto& name : builtin_names()) structures.push_back(builtin_structure(name));
    Rng rng(64);
    while (structures.size() < 10) {
        const StructureMatrix a = random_structure(4, rng);
        if (!is_degenerate(a)) structures.push_back(a);
    }
    int idx = 0;
    for (const auto& a : structures) {
        const EmbeddingStore store = random_store(5, 2, 8, 4, 400 + static_cast<uint64_t>(idx++));
        CHECK_MESSAGE(max_grad_rel_err(a, store, data.train, 0.0) < 1e-5, a.to_json_string());
    }
    // and once with the regularizer on
    CHECK(max_grad_rel_err(builtin_structure("simple"), random_store(5, 2, 8, 4, 999), data.train, 1e-2) < 1e-5);
}

TEST_CASE("parallel batch gradients equal the serial reference") {
    const TripleStore data = five_entity_kg();
    const EmbeddingStore store = random_store(5, 2, 16, 4, 21);
    const ScorerOps ops(builtin_structure("analogy"));
    GradientBuffers serial, parallel;
    serial.resize_like(store);
    parallel.resize_like(store);
    const double l1 = batch_loss(ops, store, data.train, 1e-3, serial, false);
    const double l2 = batch_loss(ops, store, data.train, 1e-3, parallel, true);
    CHECK(rel_err(l1, l2) < 1e-12);
    for (size_t i = 0; i < serial.entity.size(); ++i)
        CHECK(rel_err(serial.entity[i], parallel.entity[i]) < 1e-10);
    for (size_t i = 0; i < serial.relation.size(); ++i)
        CHECK(rel_err(serial.relation[i], parallel.relation[i]) < 1e-10);
}

TEST_CASE("adagrad closed forms") {
    EmbeddingStore store;
    store.n_entities = 1;
    store.n_relations = 1;
    store.d = 4;
    store.k = 4;
    store.entity.assign(4, 0.0);
    store.relation.assign(4, 0.0);
    AdaGradState acc;
    acc.resize_like(store);
    GradientBuffers grad;
    grad.resize_like(store);

    // zero gradient leaves parameters untouched
    adagrad_step(store, acc, grad, 0.1);
    for (double v : store.entity) CHECK(v == 0.0);

    // first unit-gradient step moves by ~eta
    grad.entity[0] = 1.0;
    adagrad_step(store, acc, grad, 0.1);
    CHECK(store.entity[0] == doctest::Approx(-0.1).epsilon(1e-9));

    // identical second step is strictly smaller
    const double before = store.entity[0];
    adagrad_step(store, acc, grad, 0.1);
    const double second_delta = std::abs(store.entity[0] - before);
    CHECK(second_delta < 0.1);
    CHECK(second_delta == doctest::Approx(0.1 / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("training reduces loss below the uniform baseline and memorizes a toy KG") {
    const TripleStore data = toy_kg(20, 5, 60);
    const FilterIndex fi = build_filter_index(data);
    HyperParams hp;
    hp.d = 16;
    hp.eta = 0.5;
    hp.lambda = 1e-5;
    hp.batch_size = 64;
    hp.epochs = 200;
    hp.seed = 17;
    auto [store, report] = train_structure(builtin_structure("complex"), data, fi, hp);
    CHECK(report.epochs_run == 200);
    CHECK(report.final_train_loss < 2.0 * std::log(20.0));

    const EvalReport on_train = evaluate(ScorerOps(builtin_structure("complex")), store, data.train, fi);
    CHECK(on_train.mrr > 0.9);
}

TEST_CASE("identical seeds give identical reports") {
    const TripleStore data = toy_kg(12, 3, 30);
    const FilterIndex fi = build_filter_index(data);
    HyperParams hp;
    hp.d = 8;
    hp.eta = 0.3;
    hp.lambda = 1e-4;
    hp.batch_size = 32;
    hp.epochs = 20;
    hp.seed = 23;
    TrainOptions opts;
    opts.parallel = false;
    auto [s1, r1] = train_structure(builtin_structure("simple"), data, fi, hp, opts);
    auto [s2, r2] = train_structure(builtin_structure("simple"), data, fi, hp, opts);
    CHECK(r1.val_mrr == r2.val_mrr);
    CHECK(r1.final_train_loss == r2.final_train_loss);
    CHECK(s1.entity == s2.entity);
    CHECK(s1.relation == s2.relation);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    const TripleStore data = toy_kg(10, 7, 24);
    const FilterIndex fi = build_filter_index(data);
    HyperParams hp;
    hp.d = 8;
    hp.epochs = 2;
    hp.seed = 3;
    EmbeddingStore init = init_embeddings(data.num_entities(), data.num_relations(), 4, hp);
    init.entity[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(train_structure(builtin_structure("distmult"), std::move(init), data, fi, hp),
                         doctest::Contains("epoch 0"), NumericError);
}

TEST_CASE("orbit transforms commute with training") {
    const TripleStore data = toy_kg(10, 11, 24);
    const FilterIndex fi = build_filter_index(data);
    HyperParams hp;
    hp.d = 8;
    hp.eta = 0.4;
    hp.lambda = 1e-4;
    hp.batch_size = 16;
    hp.epochs = 15;
    hp.seed = 31;
    TrainOptions opts;
    opts.parallel = false;

    const StructureMatrix a = builtin_structure("complex");
    EmbeddingStore init = init_embeddings(data.num_entities(), data.num_relations(), 4, hp);
    auto [store_a, report_a] = train_structure(a, init, data, fi, hp, opts);

    const int w = init.chunk_width();
    SUBCASE("axis permutation with permuted entity chunks") {
        const std::vector<int> perm{2, 0, 3, 1};  // new chunk i <- old chunk perm[i]
        const StructureMatrix b = permute_axes(a, perm);
        EmbeddingStore init_b = init;
        for (int32_t e = 0; e < init.n_entities; ++e)
            for (int c = 0; c < 4; ++c)
                for (int p = 0; p < w; ++p)
                    init_b.ent_row(e)[c * w + p] = init.ent_row(e)[perm[static_cast<size_t>(c)] * w + p];
        auto [store_b, report_b] = train_structure(b, init_b, data, fi, hp, opts);
        CHECK(std::abs(report_b.final_train_loss - report_a.final_train_loss) < 1e-8);
        CHECK(std::abs(report_b.val_mrr - report_a.val_mrr) < 1e-12);
    }
    SUBCASE("value permutation with reindexed relation chunks") {
        const std::vector<int> sigma{1, 0, 3, 2};  // value m+1 -> sigma[m]+1
        const StructureMatrix b = permute_values(a, sigma);
        EmbeddingStore init_b = init;
        for (int32_t r = 0; r < init.n_relations; ++r)
            for (int c = 0; c < 4; ++c)
                for (int p = 0; p < w; ++p)
                    init_b.rel_row(r)[sigma[static_cast<size_t>(c)] * w + p] = init.rel_row(r)[c * w + p];
        auto [store_b, report_b] = train_structure(b, init_b, data, fi, hp, opts);
        CHECK(std::abs(report_b.final_train_loss - report_a.final_train_loss) < 1e-8);
        CHECK(std::abs(report_b.val_mrr - report_a.val_mrr) < 1e-12);
    }
    SUBCASE("sign flips with negated relation chunks") {
        const std::vector<int> signs{-1, 1, -1, -1};
        const StructureMatrix b = flip_signs(a, signs);
        EmbeddingStore init_b = init;
        for (int32_t r = 0; r < init.n_relations; ++r)
            for (int c = 0; c < 4; ++c)
                for (int p = 0; p < w; ++p)
                    init_b.rel_row(r)[c * w + p] = signs[static_cast<size_t>(c)] * init.rel_row(r)[c * w + p];
        auto [store_b, report_b] = train_structure(b, init_b, data, fi, hp, opts);
        CHECK(std::abs(report_b.final_train_loss - report_a.final_train_loss) < 1e-8);
        CHECK(std::abs(report_b.val_mrr - report_a.val_mrr) < 1e-12);
    }
}

TEST_SUITE_END();
