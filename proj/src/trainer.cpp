#include "kgsf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <omp.h>

#include "kgsf/errors.hpp"
#include "kgsf/evaluator.hpp"
#include "kgsf/rng.hpp"

namespace kgsf {

void GradientBuffers::resize_like(const EmbeddingStore& store) {
    entity.assign(store.entity.size(), 0.0);
    relation.assign(store.relation.size(), 0.0);
}

void GradientBuffers::clear() {
    std::fill(entity.begin(), entity.end(), 0.0);
    std::fill(relation.begin(), relation.end(), 0.0);
}

void AdaGradState::resize_like(const EmbeddingStore& store) {
    entity_acc.assign(store.entity.size(), 0.0);
    relation_acc.assign(store.relation.size(), 0.0);
}

namespace {

double triple_loss_and_grad(const ScorerOps& ops, const EmbeddingStore& store, const Triple& x, double lambda,
                            double* ent_grad, double* rel_grad, std::vector<double>& w,
                            std::vector<double>& scores, std::vector<double>& u) {
    const int d = store.d;
    const int32_t n_ent = store.n_entities;
    const double* h_vec = store.ent_row(x.h);
    const double* r_vec = store.rel_row(x.r);
    const double* t_vec = store.ent_row(x.t);
    double loss = 0.0;

    for (int dir = 0; dir < 2; ++dir) {
        const bool tail_query = dir == 0;
        // tail query: scores_e = (g^T h) . E_e; head query: scores_e = (g t) . E_e
        if (tail_query)
            apply_relation_t(ops, r_vec, h_vec, w.data(), d);
        else
            apply_relation(ops, r_vec, t_vec, w.data(), d);

        for (int32_t e = 0; e < n_ent; ++e) {
            const double* row = store.ent_row(e);
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += row[i] * w[static_cast<size_t>(i)];
            scores[static_cast<size_t>(e)] = s;
        }
        const int32_t truth = tail_query ? x.t : x.h;
        double mx = scores[0];
        for (int32_t e = 1; e < n_ent; ++e) mx = std::max(mx, scores[static_cast<size_t>(e)]);
        double sum = 0.0;
        for (int32_t e = 0; e < n_ent; ++e) sum += std::exp(scores[static_cast<size_t>(e)] - mx);
        const double lse = mx + std::log(sum);
        loss += lse - scores[static_cast<size_t>(truth)];

        // softmax residual drives every entity row plus the query-side row
        std::fill(u.begin(), u.end(), 0.0);
        for (int32_t e = 0; e < n_ent; ++e) {
            double c = std::exp(scores[static_cast<size_t>(e)] - lse);
            if (e == truth) c -= 1.0;
            double* eg = ent_grad + static_cast<size_t>(e) * d;
            const double* row = store.ent_row(e);
            for (int i = 0; i < d; ++i) {
                eg[i] += c * w[static_cast<size_t>(i)];
                u[static_cast<size_t>(i)] += c * row[i];
            }
        }
        double* rg = rel_grad + static_cast<size_t>(x.r) * d;
        if (tail_query) {
            // w = g^T h: dL/dh = g u, dL/dr via (h, u) chunk products
            double* hg = ent_grad + static_cast<size_t>(x.h) * d;
            std::vector<double> back(static_cast<size_t>(d));
            apply_relation(ops, r_vec, u.data(), back.data(), d);
            for (int i = 0; i < d; ++i) hg[i] += back[static_cast<size_t>(i)];
            accumulate_relation_grad(ops, h_vec, u.data(), rg, d);
        } else {
            // w = g t: dL/dt = g^T u, dL/dr via (u, t) chunk products
            double* tg = ent_grad + static_cast<size_t>(x.t) * d;
            std::vector<double> back(static_cast<size_t>(d));
            apply_relation_t(ops, r_vec, u.data(), back.data(), d);
            for (int i = 0; i < d; ++i) tg[i] += back[static_cast<size_t>(i)];
            accumulate_relation_grad(ops, u.data(), t_vec, rg, d);
        }
    }

    if (lambda > 0.0) {
        double sq = 0.0;
        double* hg = ent_grad + static_cast<size_t>(x.h) * d;
        double* tg = ent_grad + static_cast<size_t>(x.t) * d;
        double* rg = rel_grad + static_cast<size_t>(x.r) * d;
        for (int i = 0; i < d; ++i) {
            sq += h_vec[i] * h_vec[i] + r_vec[i] * r_vec[i] + t_vec[i] * t_vec[i];
            hg[i] += 2.0 * lambda * h_vec[i];
            rg[i] += 2.0 * lambda * r_vec[i];
            tg[i] += 2.0 * lambda * t_vec[i];
        }
        loss += lambda * sq;
    }
    return loss;
}

}  // namespace

double batch_loss(const ScorerOps& ops, const EmbeddingStore& store, const std::vector<Triple>& batch,
                  double lambda, GradientBuffers& grad, bool parallel) {
    if (batch.empty()) throw ConfigError("batch_loss: empty batch");
    if (grad.entity.size() != store.entity.size() || grad.relation.size() != store.relation.size())
        grad.resize_like(store);

    const int n = static_cast<int>(batch.size());
    const int max_threads = parallel ? omp_get_max_threads() : 1;
    const int n_threads = std::max(1, std::min(max_threads, n));

    if (n_threads == 1) {
        std::vector<double> w(static_cast<size_t>(store.d));
        std::vector<double> scores(static_cast<size_t>(store.n_entities));
        std::vector<double> u(static_cast<size_t>(store.d));
        double loss = 0.0;
        for (const Triple& x : batch)
            loss += triple_loss_and_grad(ops, store, x, lambda, grad.entity.data(), grad.relation.data(), w,
                                         scores, u);
        return loss;
    }

    // Per-thread buffers merged in thread order keep the result stable for
    // a fixed thread count.
    std::vector<GradientBuffers> partial(static_cast<size_t>(n_threads));
    std::vector<double> losses(static_cast<size_t>(n_threads), 0.0);
#pragma omp parallel num_threads(n_threads)
    {
        const int tid = omp_get_thread_num();
        partial[static_cast<size_t>(tid)].resize_like(store);
        std::vector<double> w(static_cast<size_t>(store.d));
        std::vector<double> scores(static_cast<size_t>(store.n_entities));
        std::vector<double> u(static_cast<size_t>(store.d));
#pragma omp for schedule(static)
        for (int b = 0; b < n; ++b)
            losses[static_cast<size_t>(tid)] +=
                triple_loss_and_grad(ops, store, batch[static_cast<size_t>(b)], lambda,
                                     partial[static_cast<size_t>(tid)].entity.data(),
                                     partial[static_cast<size_t>(tid)].relation.data(), w, scores, u);
    }
    double loss = 0.0;
    for (int t = 0; t < n_threads; ++t) {
        loss += losses[static_cast<size_t>(t)];
        const auto& p = partial[static_cast<size_t>(t)];
        for (size_t i = 0; i < grad.entity.size(); ++i) grad.entity[i] += p.entity[i];
        for (size_t i = 0; i < grad.relation.size(); ++i) grad.relation[i] += p.relation[i];
    }
    return loss;
}

void adagrad_step(EmbeddingStore& store, AdaGradState& acc, const GradientBuffers& grad, double eta) {
    if (acc.entity_acc.size() != store.entity.size()) throw ConfigError("adagrad_step: accumulator shape mismatch");
    for (size_t i = 0; i < store.entity.size(); ++i) {
        const double g = grad.entity[i];
        acc.entity_acc[i] += g * g;
        store.entity[i] -= eta * g / (std::sqrt(acc.entity_acc[i]) + acc.eps);
    }
    for (size_t i = 0; i < store.relation.size(); ++i) {
        const double g = grad.relation[i];
        acc.relation_acc[i] += g * g;
        store.relation[i] -= eta * g / (std::sqrt(acc.relation_acc[i]) + acc.eps);
    }
}

std::pair<EmbeddingStore, TrainReport> train_structure(const StructureMatrix& a, EmbeddingStore init,
                                                       const TripleStore& data, const FilterIndex& filter,
                                                       const HyperParams& hp, const TrainOptions& opts) {
    hp.validate(init.k);
    if (data.train.empty()) throw DataError("train_structure: empty training split");
    const double t_start = omp_get_wtime();

    const ScorerOps ops(a);
    EmbeddingStore store = std::move(init);
    AdaGradState acc;
    acc.resize_like(store);
    GradientBuffers grad;
    grad.resize_like(store);

    std::ofstream curve;
    if (!opts.curve_path.empty()) {
        curve.open(opts.curve_path, std::ios::app);
        if (!curve) throw DataError("cannot open curve file " + opts.curve_path);
    }

    Rng shuffle_rng(mix_seed(hp.seed, 0x7368756646ULL));
    std::vector<int32_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    const size_t n_train = data.train.size();
    const size_t bs = static_cast<size_t>(hp.batch_size);
    std::vector<Triple> batch;
    double epoch_loss = 0.0;

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        epoch_loss = 0.0;
        size_t batch_index = 0;
        for (size_t start = 0; start < n_train; start += bs, ++batch_index) {
            const size_t end = std::min(n_train, start + bs);
            batch.assign(end - start, Triple{});
            for (size_t i = start; i < end; ++i) batch[i - start] = data.train[static_cast<size_t>(order[i])];
            grad.clear();
            const double loss = batch_loss(ops, store, batch, hp.lambda, grad, opts.parallel);
            if (!std::isfinite(loss))
                throw NumericError("non-finite loss for structure " + a.to_json_string() + " at epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(batch_index));
            epoch_loss += loss;
            adagrad_step(store, acc, grad, hp.eta);
        }
        report.epochs_run = epoch + 1;
        if (curve.is_open()) {
            double val_mrr = -1.0;
            if (opts.curve_val_every > 0 && (epoch + 1) % opts.curve_val_every == 0)
                val_mrr = evaluate(ops, store, data.valid, filter, opts.parallel).mrr;
            curve << epoch << ',' << epoch_loss / static_cast<double>(n_train) << ',' << val_mrr << ','
                  << omp_get_wtime() - t_start << '\n';
        }
    }
    report.final_train_loss = epoch_loss / static_cast<double>(n_train);

    std::vector<Triple> val = data.valid;
    if (opts.val_sample > 0 && static_cast<size_t>(opts.val_sample) < val.size()) {
        Rng val_rng(mix_seed(hp.seed, 0x76616cULL));
        val_rng.shuffle(val);
        val.resize(static_cast<size_t>(opts.val_sample));
    }
    if (!val.empty()) {
        const EvalReport ev = evaluate(ops, store, val, filter, opts.parallel);
        report.val_mrr = ev.mrr;
        report.val_h1 = ev.h1();
        report.val_h10 = ev.h10();
    }
    report.wall_clock_seconds = omp_get_wtime() - t_start;
    return {std::move(store), report};
}

std::pair<EmbeddingStore, TrainReport> train_structure(const StructureMatrix& a, const TripleStore& data,
                                                       const FilterIndex& filter, const HyperParams& hp,
                                                       const TrainOptions& opts) {
    EmbeddingStore init = init_embeddings(data.num_entities(), data.num_relations(), a.k, hp);
    return train_structure(a, std::move(init), data, filter, hp, opts);
}

}  // namespace kgsf
