#include "kgsf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <omp.h>

#include "json.hpp"
#include "kgsf/errors.hpp"

namespace kgsf {

namespace {

HyperParams draw_hp(Rng& rng, int d, int epochs, size_t train_size) {
    HyperParams hp;
    hp.d = d;
    hp.eta = 1.0 - rng.uniform();  // (0, 1]
    hp.lambda = std::pow(10.0, rng.uniform(-5.0, -1.0));
    static const int kBatchChoices[3] = {256, 512, 1024};
    hp.batch_size = kBatchChoices[rng.uniform_int(0, 2)];
    if (static_cast<size_t>(hp.batch_size) > train_size)
        hp.batch_size = static_cast<int>(std::max<size_t>(1, train_size));
    hp.epochs = epochs;
    return hp;
}

}  // namespace

HyperParams hpsearch(const ExperimentConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                     std::vector<HpTrial>* trials) {
    if (cfg.stage1.trials < 1) throw ConfigError("hpsearch: trials must be >= 1");
    const StructureMatrix probe = builtin_structure(cfg.stage1.probe);
    if (probe.k != cfg.k)
        throw ConfigError("hpsearch: probe structure has k=" + std::to_string(probe.k) +
                          " but experiment k=" + std::to_string(cfg.k));
    Rng rng(mix_seed(cfg.seed, 0x687073ULL));
    HyperParams best;
    double best_mrr = -1.0;
    for (int i = 0; i < cfg.stage1.trials; ++i) {
        HyperParams hp = draw_hp(rng, cfg.stage1.probe_d, cfg.stage1.epochs, data.train.size());
        hp.seed = mix_seed(cfg.seed, 0x687073ULL, static_cast<uint64_t>(i));
        auto [store, report] = train_structure(probe, data, filter, hp);
        if (trials) trials->push_back(HpTrial{hp, report.val_mrr});
        if (report.val_mrr > best_mrr) {
            best_mrr = report.val_mrr;
            best = hp;
        }
    }
    return best;
}

FinalReport finetune(const ExperimentConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                     const std::vector<SearchRecord>& top) {
    if (top.empty()) throw ConfigError("finetune: no searched structures supplied");
    if (cfg.stage3.trials < 1) throw ConfigError("finetune: trials must be >= 1");
    if (cfg.stage3.dims.empty()) throw ConfigError("finetune: no dimension choices");
    Rng rng(mix_seed(cfg.seed, 0x6674ULL));

    FinalReport report;
    double best_mrr = -1.0;
    StructureMatrix best_structure;
    HyperParams best_hp;
    for (int j = 0; j < cfg.stage3.trials; ++j) {
        const SearchRecord& pick = top[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(top.size()) - 1))];
        int d = cfg.stage3.dims[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(cfg.stage3.dims.size()) - 1))];
        d -= d % cfg.k;
        HyperParams hp = draw_hp(rng, d, cfg.stage3.epochs, data.train.size());
        hp.seed = mix_seed(cfg.seed, 0x6674ULL, static_cast<uint64_t>(j));
        auto [store, train_report] = train_structure(pick.structure, data, filter, hp);
        if (train_report.val_mrr > best_mrr) {
            best_mrr = train_report.val_mrr;
            best_structure = pick.structure;
            best_hp = hp;
        }
    }

    // test metrics are computed exactly once, for the winner only
    auto [store, train_report] = train_structure(best_structure, data, filter, best_hp);
    const ScorerOps ops(best_structure);
    report.test = evaluate(ops, store, data.test, filter);
    report.test_evaluations = 1;
    report.structure = best_structure;
    report.hp = best_hp;
    report.val_mrr = train_report.val_mrr;
    return report;
}

std::string FinalReport::to_json_string() const {
    nlohmann::json j;
    j["structure"] = nlohmann::json::parse(structure.to_json_string());
    j["hyperparams"] = {{"d", hp.d},           {"eta", hp.eta},       {"lambda", hp.lambda},
                        {"batch_size", hp.batch_size}, {"epochs", hp.epochs}, {"seed", hp.seed}};
    j["val_mrr"] = val_mrr;
    j["test_mrr"] = test.mrr;
    j["test_h1"] = test.h1();
    j["test_h3"] = test.h3();
    j["test_h10"] = test.h10();
    j["test_evaluations"] = test_evaluations;
    return j.dump(2);
}

namespace {

// training-split adjacency: (h, r) -> tails
struct TrainAdjacency {
    std::unordered_map<uint64_t, std::vector<int32_t>> out_edges;
    std::vector<Triple> triples;

    explicit TrainAdjacency(const TripleStore& data) : triples(data.train) {
        for (const Triple& x : data.train)
            out_edges[key(x.h, x.r)].push_back(x.t);
    }
    static uint64_t key(int32_t h, int32_t r) {
        return (static_cast<uint64_t>(static_cast<uint32_t>(h)) << 32) | static_cast<uint32_t>(r);
    }
    const std::vector<int32_t>* tails(int32_t h, int32_t r) const {
        auto it = out_edges.find(key(h, r));
        return it == out_edges.end() ? nullptr : &it->second;
    }
};

std::vector<int32_t> reachable_terminals(const TrainAdjacency& adj, int32_t source,
                                         const std::vector<int32_t>& relations) {
    std::unordered_set<int32_t> frontier{source};
    for (int32_t r : relations) {
        std::unordered_set<int32_t> next;
        for (int32_t e : frontier)
            if (const auto* tails = adj.tails(e, r))
                next.insert(tails->begin(), tails->end());
        frontier = std::move(next);
        if (frontier.empty()) break;
    }
    std::vector<int32_t> out(frontier.begin(), frontier.end());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

PathQuerySet generate_path_queries(const TripleStore& data, int length, int n, uint64_t seed) {
    if (length < 1) throw ConfigError("generate_path_queries: length must be >= 1");
    if (n < 1) throw ConfigError("generate_path_queries: n must be >= 1");
    if (data.train.empty()) throw DataError("generate_path_queries: empty training split");
    const TrainAdjacency adj(data);
    Rng rng(mix_seed(seed, 0x70617468ULL));

    PathQuerySet qs;
    qs.length = length;
    std::unordered_set<std::string> seen;
    const long max_attempts = 200L * n + 10000;
    long attempts = 0;
    const int n_train = static_cast<int>(data.train.size());
    while (static_cast<int>(qs.queries.size()) < n && attempts < max_attempts) {
        ++attempts;
        const Triple& first = data.train[static_cast<size_t>(rng.uniform_int(0, n_train - 1))];
        PathQuery q;
        q.source = first.h;
        q.relations.push_back(first.r);
        int32_t cur = first.t;
        bool dead_end = false;
        for (int step = 1; step < length; ++step) {
            // continue the walk along a uniformly chosen outgoing edge
            std::vector<std::pair<int32_t, int32_t>> options;
            for (int32_t r = 0; r < data.num_relations(); ++r)
                if (const auto* tails = adj.tails(cur, r))
                    for (int32_t t : *tails) options.emplace_back(r, t);
            if (options.empty()) {
                dead_end = true;
                break;
            }
            const auto& [r, t] = options[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(options.size()) - 1))];
            q.relations.push_back(r);
            cur = t;
        }
        if (dead_end) continue;
        q.target = cur;
        std::string sig = std::to_string(q.source);
        for (int32_t r : q.relations) sig += "," + std::to_string(r);
        sig += ">" + std::to_string(q.target);
        if (seen.insert(sig).second) qs.queries.push_back(std::move(q));
    }
    if (static_cast<int>(qs.queries.size()) < n)
        throw DataError("generate_path_queries: could not sample " + std::to_string(n) + " length-" +
                        std::to_string(length) + " paths (found " + std::to_string(qs.queries.size()) + ")");
    return qs;
}

void save_path_queries(const PathQuerySet& qs, const TripleStore& data, const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& q : qs.queries) {
        nlohmann::json rels = nlohmann::json::array();
        for (int32_t r : q.relations) rels.push_back(data.relation_names[static_cast<size_t>(r)]);
        arr.push_back({{"source", data.entity_names[static_cast<size_t>(q.source)]},
                       {"relations", rels},
                       {"target", data.entity_names[static_cast<size_t>(q.target)]}});
    }
    nlohmann::json j{{"length", qs.length}, {"split", qs.split}, {"queries", arr}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << "\n";
}

PathQuerySet load_path_queries(const TripleStore& data, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("path query json: ") + e.what());
    }
    PathQuerySet qs;
    qs.length = j.at("length").get<int>();
    qs.split = j.value("split", "test");
    for (const auto& item : j.at("queries")) {
        PathQuery q;
        const std::string src = item.at("source").get<std::string>();
        const std::string tgt = item.at("target").get<std::string>();
        if (!data.entity_ids.count(src) || !data.entity_ids.count(tgt))
            throw DataError("path query references unknown entity");
        q.source = data.entity_ids.at(src);
        q.target = data.entity_ids.at(tgt);
        for (const auto& rel : item.at("relations")) {
            const std::string name = rel.get<std::string>();
            if (!data.relation_ids.count(name)) throw DataError("path query references unknown relation " + name);
            q.relations.push_back(data.relation_ids.at(name));
        }
        if (q.relations.empty()) throw DataError("path query with empty relation list");
        qs.queries.push_back(std::move(q));
    }
    return qs;
}

EvalReport evaluate_path_queries(const ScorerOps& ops, const EmbeddingStore& store, const PathQuerySet& qs,
                                 const TripleStore& data, bool parallel) {
    const TrainAdjacency adj(data);
    const int n = static_cast<int>(qs.queries.size());

    // known answers per query: train-reachable terminals plus targets of
    // identical prefixes inside the evaluated set
    std::unordered_map<std::string, std::vector<int32_t>> same_prefix;
    for (const auto& q : qs.queries) {
        std::string sig = std::to_string(q.source);
        for (int32_t r : q.relations) sig += "," + std::to_string(r);
        same_prefix[sig].push_back(q.target);
    }

    std::vector<int32_t> ranks(static_cast<size_t>(n));
#pragma omp parallel if (parallel)
    {
        std::vector<double> scores(static_cast<size_t>(store.n_entities));
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            const PathQuery& q = qs.queries[static_cast<size_t>(i)];
            score_path_all_terminals(ops, store, q.source, q.relations, scores.data());
            std::unordered_set<int32_t> known;
            for (int32_t e : reachable_terminals(adj, q.source, q.relations)) known.insert(e);
            std::string sig = std::to_string(q.source);
            for (int32_t r : q.relations) sig += "," + std::to_string(r);
            for (int32_t t : same_prefix.at(sig)) known.insert(t);
            known.insert(q.target);
            const double true_score = scores[static_cast<size_t>(q.target)];
            int32_t rank = 1;
            for (int32_t e = 0; e < store.n_entities; ++e) {
                if (known.count(e)) continue;
                if (scores[static_cast<size_t>(e)] >= true_score) ++rank;
            }
            ranks[static_cast<size_t>(i)] = rank;
        }
    }
    return aggregate_ranks({}, std::move(ranks));
}

std::pair<EmbeddingStore, TrainReport> train_queries(const StructureMatrix& a, EmbeddingStore init,
                                                     const TripleStore& data, const PathQuerySet& train_qs,
                                                     const PathQuerySet& valid_qs, const HyperParams& hp,
                                                     int neg_samples) {
    hp.validate(init.k);
    if (train_qs.queries.empty()) throw DataError("train_queries: empty query set");
    const double t_start = omp_get_wtime();
    const ScorerOps ops(a);
    EmbeddingStore store = std::move(init);
    AdaGradState acc;
    acc.resize_like(store);
    GradientBuffers grad;
    grad.resize_like(store);
    const int d = store.d;
    const int32_t n_ent = store.n_entities;

    Rng rng(mix_seed(hp.seed, 0x71747261696eULL));
    std::vector<int32_t> order(train_qs.queries.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> w(static_cast<size_t>(d)), tmp(static_cast<size_t>(d));
    std::vector<std::vector<double>> forward;  // a_0 .. a_L
    std::vector<double> scores(static_cast<size_t>(n_ent));
    std::vector<double> u(static_cast<size_t>(d));
    std::vector<int32_t> candidates;

    TrainReport report;
    double epoch_loss = 0.0;
    const size_t bs = static_cast<size_t>(hp.batch_size);
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        rng.shuffle(order);
        epoch_loss = 0.0;
        for (size_t start = 0; start < order.size(); start += bs) {
            const size_t end = std::min(order.size(), start + bs);
            grad.clear();
            double loss = 0.0;
            for (size_t qi = start; qi < end; ++qi) {
                const PathQuery& q = train_qs.queries[static_cast<size_t>(order[qi])];
                const int L = static_cast<int>(q.relations.size());
                forward.assign(static_cast<size_t>(L) + 1, std::vector<double>(static_cast<size_t>(d)));
                std::copy(store.ent_row(q.source), store.ent_row(q.source) + d, forward[0].begin());
                for (int i = 0; i < L; ++i)
                    apply_relation_t(ops, store.rel_row(q.relations[static_cast<size_t>(i)]),
                                     forward[static_cast<size_t>(i)].data(),
                                     forward[static_cast<size_t>(i) + 1].data(), d);
                const std::vector<double>& wq = forward.back();

                candidates.clear();
                size_t true_idx = 0;
                if (neg_samples > 0) {
                    candidates.push_back(q.target);  // true terminal always at index 0
                    for (int s = 0; s < neg_samples; ++s) {
                        int32_t e = rng.uniform_int(0, n_ent - 2);
                        if (e >= q.target) ++e;  // negatives never duplicate the target
                        candidates.push_back(e);
                    }
                } else {
                    candidates.resize(static_cast<size_t>(n_ent));
                    std::iota(candidates.begin(), candidates.end(), 0);
                    true_idx = static_cast<size_t>(q.target);
                }
                if (scores.size() < candidates.size()) scores.resize(candidates.size());
                double mx = -1e300;
                for (size_t c = 0; c < candidates.size(); ++c) {
                    const double* row = store.ent_row(candidates[c]);
                    double s = 0.0;
                    for (int i = 0; i < d; ++i) s += row[i] * wq[static_cast<size_t>(i)];
                    scores[c] = s;
                    mx = std::max(mx, s);
                }
                double sum = 0.0;
                for (size_t c = 0; c < candidates.size(); ++c) sum += std::exp(scores[c] - mx);
                const double lse = mx + std::log(sum);
                loss += lse - scores[true_idx];

                std::fill(u.begin(), u.end(), 0.0);
                for (size_t c = 0; c < candidates.size(); ++c) {
                    double coef = std::exp(scores[c] - lse);
                    if (c == true_idx) coef -= 1.0;
                    double* eg = &grad.entity[static_cast<size_t>(candidates[c]) * d];
                    const double* row = store.ent_row(candidates[c]);
                    for (int i = 0; i < d; ++i) {
                        eg[i] += coef * wq[static_cast<size_t>(i)];
                        u[static_cast<size_t>(i)] += coef * row[i];
                    }
                }
                // back through the operator chain
                std::vector<double> back = u;
                for (int i = L; i-- > 0;) {
                    accumulate_relation_grad(ops, forward[static_cast<size_t>(i)].data(), back.data(),
                                             &grad.relation[static_cast<size_t>(q.relations[static_cast<size_t>(i)]) * d],
                                             d);
                    apply_relation(ops, store.rel_row(q.relations[static_cast<size_t>(i)]), back.data(), tmp.data(), d);
                    back = tmp;
                }
                double* sg = &grad.entity[static_cast<size_t>(q.source) * d];
                for (int i = 0; i < d; ++i) sg[i] += back[static_cast<size_t>(i)];

                if (hp.lambda > 0.0) {
                    double sq = 0.0;
                    const double* src = store.ent_row(q.source);
                    const double* tgt = store.ent_row(q.target);
                    double* tg = &grad.entity[static_cast<size_t>(q.target) * d];
                    for (int i = 0; i < d; ++i) {
                        sq += src[i] * src[i] + tgt[i] * tgt[i];
                        sg[i] += 2.0 * hp.lambda * src[i];
                        tg[i] += 2.0 * hp.lambda * tgt[i];
                    }
                    for (int32_t r : q.relations) {
                        const double* rv = store.rel_row(r);
                        double* rg = &grad.relation[static_cast<size_t>(r) * d];
                        for (int i = 0; i < d; ++i) {
                            sq += rv[i] * rv[i];
                            rg[i] += 2.0 * hp.lambda * rv[i];
                        }
                    }
                    loss += hp.lambda * sq;
                }
            }
            if (!std::isfinite(loss))
                throw NumericError("non-finite query loss for structure " + a.to_json_string() + " at epoch " +
                                   std::to_string(epoch));
            epoch_loss += loss;
            adagrad_step(store, acc, grad, hp.eta);
        }
        report.epochs_run = epoch + 1;
    }
    report.final_train_loss = epoch_loss / static_cast<double>(train_qs.queries.size());
    if (!valid_qs.queries.empty()) {
        const EvalReport ev = evaluate_path_queries(ops, store, valid_qs, data);
        report.val_mrr = ev.mrr;
        report.val_h1 = ev.h1();
        report.val_h10 = ev.h10();
    }
    report.wall_clock_seconds = omp_get_wtime() - t_start;
    return {std::move(store), report};
}

}  // namespace kgsf
