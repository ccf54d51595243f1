#include "kgsf/search.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <omp.h>

#include "json.hpp"
#include "kgsf/errors.hpp"
#include "kgsf/srf.hpp"

namespace kgsf {

std::atomic<bool> g_stop_requested{false};

SearchAlgo parse_algo(const std::string& name) {
    if (name == "progressive") return SearchAlgo::progressive;
    if (name == "evolutionary") return SearchAlgo::evolutionary;
    if (name == "random") return SearchAlgo::random;
    throw ConfigError("unknown search algorithm: " + name);
}

const char* algo_name(SearchAlgo algo) {
    switch (algo) {
        case SearchAlgo::progressive: return "progressive";
        case SearchAlgo::evolutionary: return "evolutionary";
        default: return "random";
    }
}

void SearchConfig::validate() const {
    if (k < 2 || k > 8) throw ConfigError("search: k must be in [2, 8]");
    if (top_p > n_candidates) throw ConfigError("search: P must not exceed N");
    if (top_i < 1 || top_p < 1 || n_candidates < 1) throw ConfigError("search: N, P, I must be positive");
    if (effective_b0() < k) throw ConfigError("search: b0 must be at least k");
    if (effective_b0() > k * k) throw ConfigError("search: b0 must not exceed k*k");
    if (budget < top_i) throw ConfigError("search: budget must be at least I");
    const double pm = effective_pm();
    if (pm <= 0.0 || pm > 1.0) throw ConfigError("search: p_m must be in (0, 1]");
    hp.validate(k);
}

StructureMatrix sample_initial(int k, int b0, Rng& rng) {
    StructureMatrix a(k);
    std::vector<int> cells(static_cast<size_t>(k) * k);
    std::iota(cells.begin(), cells.end(), 0);
    // partial Fisher-Yates: first b0 entries are a uniform cell subset
    for (int i = 0; i < b0; ++i) {
        const int j = rng.uniform_int(i, k * k - 1);
        std::swap(cells[static_cast<size_t>(i)], cells[static_cast<size_t>(j)]);
    }
    for (int i = 0; i < b0; ++i) {
        const int mag = rng.uniform_int(1, k);
        const int sgn = rng.bernoulli(0.5) ? 1 : -1;
        a.cells[static_cast<size_t>(cells[static_cast<size_t>(i)])] = sgn * mag;
    }
    return a;
}

std::optional<StructureMatrix> progressive_step(const StructureMatrix& parent, Rng& rng) {
    std::vector<int> empty_cells;
    for (size_t c = 0; c < parent.cells.size(); ++c)
        if (parent.cells[c] == 0) empty_cells.push_back(static_cast<int>(c));
    if (empty_cells.empty()) return std::nullopt;
    StructureMatrix child = parent;
    const int cell = empty_cells[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(empty_cells.size()) - 1))];
    const int mag = rng.uniform_int(1, parent.k);
    const int sgn = rng.bernoulli(0.5) ? 1 : -1;
    child.cells[static_cast<size_t>(cell)] = sgn * mag;
    return child;
}

StructureMatrix mutate(const StructureMatrix& a, double p_m, Rng& rng) {
    if (p_m <= 0.0 || p_m > 1.0) throw ConfigError("mutate: p_m must be in (0, 1]");
    StructureMatrix out = a;
    const int span = 2 * a.k;  // number of values other than the current one
    for (int& v : out.cells) {
        if (!rng.bernoulli(p_m)) continue;
        // uniform over {-k..k} \ {v}
        int pick = rng.uniform_int(0, span - 1) - a.k;
        if (pick >= v) ++pick;
        v = pick;
    }
    return out;
}

StructureMatrix crossover(const StructureMatrix& a, const StructureMatrix& b, Rng& rng) {
    if (a.k != b.k) throw ConfigError("crossover: mismatched k");
    StructureMatrix out(a.k);
    for (size_t c = 0; c < out.cells.size(); ++c) out.cells[c] = rng.bernoulli(0.5) ? a.cells[c] : b.cells[c];
    return out;
}

std::string SearchRecord::to_json_line() const {
    nlohmann::json s = nlohmann::json::parse(structure.to_json_string());
    nlohmann::json j{{"round", round},
                     {"index", index},
                     {"structure", s},
                     {"srf", srf},
                     {"val_mrr", val_mrr},
                     {"hyperparams",
                      {{"d", hp.d},
                       {"eta", hp.eta},
                       {"lambda", hp.lambda},
                       {"batch_size", hp.batch_size},
                       {"epochs", hp.epochs},
                       {"seed", hp.seed}}}};
    return j.dump();
}

SearchRecord SearchRecord::from_json_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("search record: ") + e.what());
    }
    SearchRecord rec;
    rec.round = j.at("round").get<int>();
    rec.index = j.at("index").get<int>();
    rec.structure = StructureMatrix::from_json_string(j.at("structure").dump());
    rec.srf = j.at("srf").get<std::vector<uint8_t>>();
    rec.val_mrr = j.at("val_mrr").get<double>();
    const auto& h = j.at("hyperparams");
    rec.hp.d = h.at("d").get<int>();
    rec.hp.eta = h.at("eta").get<double>();
    rec.hp.lambda = h.at("lambda").get<double>();
    rec.hp.batch_size = h.at("batch_size").get<int>();
    rec.hp.epochs = h.at("epochs").get<int>();
    rec.hp.seed = h.at("seed").get<uint64_t>();
    return rec;
}

namespace {

class Driver {
public:
    Driver(const SearchConfig& cfg, const TripleStore& data, const FilterIndex& filter, const SearchSinks* sinks)
        : cfg_(cfg), data_(data), filter_(filter), t0_(omp_get_wtime()) {
        cfg.validate();
        if (sinks && !sinks->records_path.empty()) {
            records_out_.open(sinks->records_path, std::ios::app);
            if (!records_out_) throw DataError("cannot open " + sinks->records_path);
        }
        if (sinks && !sinks->curve_path.empty()) {
            curve_out_.open(sinks->curve_path, std::ios::app);
            if (!curve_out_) throw DataError("cannot open " + sinks->curve_path);
            curve_out_ << "wall_clock_seconds,best_val_mrr_so_far\n";
        }
    }

    int remaining_budget() const { return cfg_.budget - static_cast<int>(records_.size()); }
    bool exhausted() const { return remaining_budget() <= 0 || g_stop_requested.load(); }
    const std::vector<SearchRecord>& records() const { return records_; }

    // Degeneracy/equivalence gate against everything trained so far plus
    // this round's accepted candidates.  No-op acceptance when the filter
    // is disabled (ablation mode).
    bool try_accept(const StructureMatrix& a, std::unordered_set<std::string>& round_keys) {
        if (!cfg_.use_filter) return true;
        if (is_degenerate(a)) return false;
        std::string key = canonical_key(a);
        if (history_.count(key) || round_keys.count(key)) return false;
        round_keys.insert(std::move(key));
        return true;
    }

    // Trains candidates concurrently and appends records in index order.
    // Returns indices of the new records.
    std::vector<int> train_and_record(std::vector<StructureMatrix> batch, int round) {
        const int n = std::min(static_cast<int>(batch.size()), remaining_budget());
        batch.resize(static_cast<size_t>(n));
        std::vector<TrainReport> reports(static_cast<size_t>(n));
        std::vector<std::string> failures(static_cast<size_t>(n));
        const int workers = cfg_.workers > 0 ? cfg_.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, std::min(workers, n > 0 ? n : 1)))
        for (int i = 0; i < n; ++i) {
            HyperParams hp = cfg_.hp;
            hp.seed = mix_seed(cfg_.seed, static_cast<uint64_t>(round) * 1000003ULL + static_cast<uint64_t>(i),
                               0x747261696eULL);
            try {
                TrainOptions opts;
                opts.parallel = true;  // serialises automatically inside this parallel region
                auto [store, report] = train_structure(batch[static_cast<size_t>(i)], data_, filter_, hp, opts);
                reports[static_cast<size_t>(i)] = report;
            } catch (const std::exception& e) {
                failures[static_cast<size_t>(i)] = e.what();
            }
        }
        std::vector<int> new_indices;
        for (int i = 0; i < n; ++i) {
            if (!failures[static_cast<size_t>(i)].empty())
                std::fprintf(stderr, "[search] candidate failed, recorded with MRR 0: %s\n",
                             failures[static_cast<size_t>(i)].c_str());
            SearchRecord rec;
            rec.structure = batch[static_cast<size_t>(i)];
            rec.srf = srf_features(rec.structure);
            rec.val_mrr = reports[static_cast<size_t>(i)].val_mrr;
            rec.hp = cfg_.hp;
            rec.hp.seed = mix_seed(cfg_.seed, static_cast<uint64_t>(round) * 1000003ULL + static_cast<uint64_t>(i),
                                   0x747261696eULL);
            rec.wall_clock_seconds = reports[static_cast<size_t>(i)].wall_clock_seconds;
            rec.round = round;
            rec.index = i;
            if (cfg_.use_filter) history_.insert(canonical_key(rec.structure));
            best_so_far_ = std::max(best_so_far_, rec.val_mrr);
            if (records_out_.is_open()) records_out_ << rec.to_json_line() << '\n' << std::flush;
            if (curve_out_.is_open())
                curve_out_ << omp_get_wtime() - t0_ << ',' << best_so_far_ << '\n' << std::flush;
            new_indices.push_back(static_cast<int>(records_.size()));
            records_.push_back(std::move(rec));
        }
        return new_indices;
    }

    void refit_predictor(int round) {
        if (!cfg_.use_predictor || records_.empty()) return;
        std::vector<std::vector<uint8_t>> inputs;
        std::vector<double> targets;
        inputs.reserve(records_.size());
        for (const auto& rec : records_) {
            inputs.push_back(rec.srf);
            targets.push_back(rec.val_mrr);
        }
        predictor_ = fit_predictor(inputs, targets, mix_seed(cfg_.seed, 0x70726564ULL, static_cast<uint64_t>(round)));
        predictor_ready_ = true;
    }

    // Predictor pre-ranking, or a uniform draw when the predictor is off.
    std::vector<StructureMatrix> select_top_p(const std::vector<StructureMatrix>& candidates, Rng& rng) {
        const int p = std::min<int>(cfg_.top_p, static_cast<int>(candidates.size()));
        if (p == static_cast<int>(candidates.size())) return candidates;
        std::vector<StructureMatrix> out;
        out.reserve(static_cast<size_t>(p));
        if (cfg_.use_predictor && predictor_ready_) {
            std::vector<std::vector<uint8_t>> srfs;
            srfs.reserve(candidates.size());
            for (const auto& a : candidates) srfs.push_back(srf_features(a));
            for (int idx : rank_by_prediction(predictor_, srfs, p)) out.push_back(candidates[static_cast<size_t>(idx)]);
        } else {
            std::vector<int> order(candidates.size());
            std::iota(order.begin(), order.end(), 0);
            for (int i = 0; i < p; ++i) {
                const int j = rng.uniform_int(i, static_cast<int>(order.size()) - 1);
                std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
                out.push_back(candidates[static_cast<size_t>(order[static_cast<size_t>(i)])]);
            }
        }
        return out;
    }

    std::vector<int> top_by_mrr(const std::vector<int>& pool, int count) const {
        std::vector<int> order = pool;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return records_[static_cast<size_t>(a)].val_mrr > records_[static_cast<size_t>(b)].val_mrr;
        });
        if (static_cast<int>(order.size()) > count) order.resize(static_cast<size_t>(count));
        return order;
    }

    SearchResult finish(const std::vector<int>& top_indices) const {
        SearchResult result;
        result.all = records_;
        for (int idx : top_indices) result.top.push_back(records_[static_cast<size_t>(idx)]);
        return result;
    }

private:
    const SearchConfig& cfg_;
    const TripleStore& data_;
    const FilterIndex& filter_;
    std::unordered_set<std::string> history_;
    std::vector<SearchRecord> records_;
    Predictor predictor_;
    bool predictor_ready_ = false;
    std::ofstream records_out_, curve_out_;
    double t0_ = 0.0;
    double best_so_far_ = 0.0;
};

// The filtered space at b0 = k is small (k-nonzero non-degenerate
// structures are generalized permutation matrices, a handful of
// equivalence classes), so the tier may legitimately end up below I.
std::vector<StructureMatrix> gather_initial(const SearchConfig& cfg, Driver& driver, Rng& rng,
                                            std::unordered_set<std::string>& round_keys) {
    std::vector<StructureMatrix> init;
    const int cap = 100000;
    for (int attempts = 0; static_cast<int>(init.size()) < cfg.top_i && attempts < cap; ++attempts) {
        StructureMatrix a = sample_initial(cfg.k, cfg.effective_b0(), rng);
        if (driver.try_accept(a, round_keys)) init.push_back(std::move(a));
    }
    if (init.empty()) throw ConfigError("search: could not assemble any initial structures");
    return init;
}

}  // namespace

SearchResult progressive_search(const SearchConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                                const SearchSinks* sinks) {
    Driver driver(cfg, data, filter, sinks);
    Rng rng(mix_seed(cfg.seed, 0x67656eULL));

    std::unordered_set<std::string> round_keys;
    std::vector<int> parent_tier = driver.train_and_record(gather_initial(cfg, driver, rng, round_keys), 0);
    driver.refit_predictor(0);

    int round = 0;
    for (int b = cfg.effective_b0() + 1; b <= cfg.k * cfg.k && !driver.exhausted(); ++b) {
        ++round;
        const std::vector<int> parents = driver.top_by_mrr(parent_tier, cfg.top_i);
        if (parents.empty()) break;

        round_keys.clear();
        std::vector<StructureMatrix> candidates;
        const int cap = 10 * cfg.n_candidates;
        for (int attempts = 0; static_cast<int>(candidates.size()) < cfg.n_candidates && attempts < cap;
             ++attempts) {
            const int pick = parents[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(parents.size()) - 1))];
            auto child = progressive_step(driver.records()[static_cast<size_t>(pick)].structure, rng);
            if (!child) break;
            if (driver.try_accept(*child, round_keys)) candidates.push_back(std::move(*child));
        }
        if (candidates.empty()) continue;  // tier exhausted; move to the next nonzero count

        std::vector<int> tier = driver.train_and_record(driver.select_top_p(candidates, rng), round);
        if (!tier.empty()) parent_tier = std::move(tier);
        driver.refit_predictor(round);
    }

    std::vector<int> pool(driver.records().size());
    std::iota(pool.begin(), pool.end(), 0);
    return driver.finish(driver.top_by_mrr(pool, cfg.top_i));
}

SearchResult evolutionary_search(const SearchConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                                 const SearchSinks* sinks) {
    Driver driver(cfg, data, filter, sinks);
    Rng rng(mix_seed(cfg.seed, 0x67656eULL));

    std::unordered_set<std::string> round_keys;
    std::vector<int> population = driver.train_and_record(gather_initial(cfg, driver, rng, round_keys), 0);

    int round = 0;
    while (!driver.exhausted()) {
        ++round;
        driver.refit_predictor(round - 1);

        round_keys.clear();
        std::vector<StructureMatrix> candidates;
        const int cap = 10 * cfg.n_candidates;
        for (int attempts = 0; static_cast<int>(candidates.size()) < cfg.n_candidates && attempts < cap;
             ++attempts) {
            const auto& pop_struct = [&](int i) -> const StructureMatrix& {
                return driver.records()[static_cast<size_t>(population[static_cast<size_t>(i)])].structure;
            };
            const int psize = static_cast<int>(population.size());
            StructureMatrix child;
            if (psize >= 2 && rng.bernoulli(0.5)) {
                const int i = rng.uniform_int(0, psize - 1);
                int j = rng.uniform_int(0, psize - 2);
                if (j >= i) ++j;
                child = crossover(pop_struct(i), pop_struct(j), rng);
            } else {
                child = mutate(pop_struct(rng.uniform_int(0, psize - 1)), cfg.effective_pm(), rng);
            }
            if (driver.try_accept(child, round_keys)) candidates.push_back(std::move(child));
        }
        if (candidates.empty()) break;

        const std::vector<int> fresh = driver.train_and_record(driver.select_top_p(candidates, rng), round);
        // survival: strict improvement replaces exactly the current worst
        for (int idx : fresh) {
            int worst = population.front();
            for (int p : population)
                if (driver.records()[static_cast<size_t>(p)].val_mrr <
                    driver.records()[static_cast<size_t>(worst)].val_mrr)
                    worst = p;
            if (driver.records()[static_cast<size_t>(idx)].val_mrr >
                driver.records()[static_cast<size_t>(worst)].val_mrr)
                *std::find(population.begin(), population.end(), worst) = idx;
        }
    }
    return driver.finish(driver.top_by_mrr(population, cfg.top_i));
}

SearchResult random_search(const SearchConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                           const SearchSinks* sinks) {
    Driver driver(cfg, data, filter, sinks);
    Rng rng(mix_seed(cfg.seed, 0x67656eULL));

    int round = 0;
    std::unordered_set<std::string> round_keys;
    while (!driver.exhausted()) {
        round_keys.clear();
        std::vector<StructureMatrix> batch;
        const int want = std::min(cfg.top_p, driver.remaining_budget());
        const int cap = 10 * cfg.n_candidates;
        for (int attempts = 0; static_cast<int>(batch.size()) < want && attempts < cap; ++attempts) {
            StructureMatrix a(cfg.k);
            for (int& v : a.cells) v = rng.uniform_int(-cfg.k, cfg.k);
            if (driver.try_accept(a, round_keys)) batch.push_back(std::move(a));
        }
        if (batch.empty()) break;
        driver.train_and_record(std::move(batch), round);
        ++round;
    }
    std::vector<int> pool(driver.records().size());
    std::iota(pool.begin(), pool.end(), 0);
    return driver.finish(driver.top_by_mrr(pool, cfg.top_i));
}

SearchResult run_search(const SearchConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                        const SearchSinks* sinks) {
    switch (cfg.algo) {
        case SearchAlgo::progressive: return progressive_search(cfg, data, filter, sinks);
        case SearchAlgo::evolutionary: return evolutionary_search(cfg, data, filter, sinks);
        default: return random_search(cfg, data, filter, sinks);
    }
}

void write_top_structures(const SearchResult& result, const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rec : result.top) {
        nlohmann::json j = nlohmann::json::parse(rec.to_json_line());
        arr.push_back(j);
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << arr.dump(2) << "\n";
}

}  // namespace kgsf
