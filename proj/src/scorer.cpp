#include "kgsf/scorer.hpp"

#include <cmath>
#include <cstring>

#include "kgsf/errors.hpp"

namespace kgsf {

namespace {

void check_ids(const EmbeddingStore& store, int32_t e, int32_t r) {
    if (e < 0 || e >= store.n_entities) throw ConfigError("entity id out of range: " + std::to_string(e));
    if (r < 0 || r >= store.n_relations) throw ConfigError("relation id out of range: " + std::to_string(r));
}

double dot(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

ScorerOps::ScorerOps(const StructureMatrix& a) : k(a.k) {
    a.validate();
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            const int v = a.at(i, j);
            if (v == 0) continue;
            cells.push_back(Cell{static_cast<int8_t>(i), static_cast<int8_t>(j),
                                 static_cast<int8_t>(std::abs(v) - 1), static_cast<int8_t>(v > 0 ? 1 : -1)});
        }
}

void apply_relation(const ScorerOps& ops, const double* r_vec, const double* t_vec, double* out, int d) {
    const int w = d / ops.k;
    std::memset(out, 0, static_cast<size_t>(d) * sizeof(double));
    for (const auto& c : ops.cells) {
        double* o = out + c.i * w;
        const double* rr = r_vec + c.m * w;
        const double* tt = t_vec + c.j * w;
        if (c.sign > 0)
            for (int p = 0; p < w; ++p) o[p] += rr[p] * tt[p];
        else
            for (int p = 0; p < w; ++p) o[p] -= rr[p] * tt[p];
    }
}

void apply_relation_t(const ScorerOps& ops, const double* r_vec, const double* h_vec, double* out, int d) {
    const int w = d / ops.k;
    std::memset(out, 0, static_cast<size_t>(d) * sizeof(double));
    for (const auto& c : ops.cells) {
        double* o = out + c.j * w;
        const double* rr = r_vec + c.m * w;
        const double* hh = h_vec + c.i * w;
        if (c.sign > 0)
            for (int p = 0; p < w; ++p) o[p] += rr[p] * hh[p];
        else
            for (int p = 0; p < w; ++p) o[p] -= rr[p] * hh[p];
    }
}

std::vector<double> apply_relation(const ScorerOps& ops, const std::vector<double>& r_vec,
                                   const std::vector<double>& t_vec) {
    if (r_vec.size() != t_vec.size() || r_vec.empty() || r_vec.size() % static_cast<size_t>(ops.k) != 0)
        throw ConfigError("apply_relation: vector lengths must match and divide by k");
    std::vector<double> out(r_vec.size());
    apply_relation(ops, r_vec.data(), t_vec.data(), out.data(), static_cast<int>(r_vec.size()));
    return out;
}

double score_triple(const ScorerOps& ops, const EmbeddingStore& store, int32_t h, int32_t r, int32_t t) {
    check_ids(store, h, r);
    check_ids(store, t, r);
    std::vector<double> v(static_cast<size_t>(store.d));
    apply_relation(ops, store.rel_row(r), store.ent_row(t), v.data(), store.d);
    return dot(store.ent_row(h), v.data(), store.d);
}

namespace {

void all_entity_scores(const EmbeddingStore& store, const double* w, double* out, bool parallel) {
    const int32_t n = store.n_entities;
    const int d = store.d;
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int32_t e = 0; e < n; ++e) out[e] = dot(store.ent_row(e), w, d);
    } else {
        for (int32_t e = 0; e < n; ++e) out[e] = dot(store.ent_row(e), w, d);
    }
}

}  // namespace

void score_all_tails(const ScorerOps& ops, const EmbeddingStore& store, int32_t h, int32_t r, double* out) {
    check_ids(store, h, r);
    std::vector<double> w(static_cast<size_t>(store.d));
    apply_relation_t(ops, store.rel_row(r), store.ent_row(h), w.data(), store.d);
    all_entity_scores(store, w.data(), out, true);
}

void score_all_heads(const ScorerOps& ops, const EmbeddingStore& store, int32_t r, int32_t t, double* out) {
    check_ids(store, t, r);
    std::vector<double> w(static_cast<size_t>(store.d));
    apply_relation(ops, store.rel_row(r), store.ent_row(t), w.data(), store.d);
    all_entity_scores(store, w.data(), out, true);
}

void score_all_tails_serial(const ScorerOps& ops, const EmbeddingStore& store, int32_t h, int32_t r, double* out) {
    check_ids(store, h, r);
    std::vector<double> w(static_cast<size_t>(store.d));
    apply_relation_t(ops, store.rel_row(r), store.ent_row(h), w.data(), store.d);
    all_entity_scores(store, w.data(), out, false);
}

void score_all_heads_serial(const ScorerOps& ops, const EmbeddingStore& store, int32_t r, int32_t t, double* out) {
    check_ids(store, t, r);
    std::vector<double> w(static_cast<size_t>(store.d));
    apply_relation(ops, store.rel_row(r), store.ent_row(t), w.data(), store.d);
    all_entity_scores(store, w.data(), out, false);
}

double score_path(const ScorerOps& ops, const EmbeddingStore& store, int32_t e0,
                  const std::vector<int32_t>& relations, int32_t eL) {
    if (relations.empty()) throw ConfigError("score_path: empty relation list");
    check_ids(store, e0, relations.front());
    check_ids(store, eL, relations.front());
    const int d = store.d;
    std::vector<double> v(store.ent_row(eL), store.ent_row(eL) + d);
    std::vector<double> tmp(static_cast<size_t>(d));
    for (size_t i = relations.size(); i-- > 0;) {
        check_ids(store, e0, relations[i]);
        apply_relation(ops, store.rel_row(relations[i]), v.data(), tmp.data(), d);
        v.swap(tmp);
    }
    return dot(store.ent_row(e0), v.data(), d);
}

void accumulate_relation_grad(const ScorerOps& ops, const double* row_side, const double* col_side,
                              double* rel_grad, int d) {
    const int w = d / ops.k;
    for (const auto& c : ops.cells) {
        double* g = rel_grad + c.m * w;
        const double* a = row_side + c.i * w;
        const double* b = col_side + c.j * w;
        if (c.sign > 0)
            for (int p = 0; p < w; ++p) g[p] += a[p] * b[p];
        else
            for (int p = 0; p < w; ++p) g[p] -= a[p] * b[p];
    }
}

void score_path_all_terminals(const ScorerOps& ops, const EmbeddingStore& store, int32_t e0,
                              const std::vector<int32_t>& relations, double* out) {
    if (relations.empty()) throw ConfigError("score_path_all_terminals: empty relation list");
    const int d = store.d;
    // w = (g(r1) ... g(rL))^T e0 applied left-to-right, then scores = E w.
    std::vector<double> w(store.ent_row(e0), store.ent_row(e0) + d);
    std::vector<double> tmp(static_cast<size_t>(d));
    for (int32_t rel : relations) {
        check_ids(store, e0, rel);
        apply_relation_t(ops, store.rel_row(rel), w.data(), tmp.data(), d);
        w.swap(tmp);
    }
    all_entity_scores(store, w.data(), out, true);
}

}  // namespace kgsf
