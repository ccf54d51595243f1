#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kgsf/dataset.hpp"
#include "kgsf/embedding.hpp"
#include "kgsf/predictor.hpp"
#include "kgsf/rng.hpp"
#include "kgsf/structure.hpp"
#include "kgsf/trainer.hpp"

namespace kgsf {

enum class SearchAlgo { progressive, evolutionary, random };

SearchAlgo parse_algo(const std::string& name);  // throws ConfigError
const char* algo_name(SearchAlgo algo);

struct SearchConfig {
    SearchAlgo algo = SearchAlgo::evolutionary;
    int k = 4;
    int n_candidates = 128;   // N: filtered candidates generated per round
    int top_p = 8;            // P: predictor-selected per round
    int top_i = 8;            // I: top structures / population size
    int b0 = 0;               // initial nonzero count; 0 means k
    double p_m = 0.0;         // mutation probability; 0 means 2/k^2
    int budget = 64;          // max structures trained
    uint64_t seed = 0;
    HyperParams hp;           // per-candidate training hyperparameters
    bool use_filter = true;
    bool use_predictor = true;
    int workers = 0;          // candidate-training threads; 0 = OpenMP default

    int effective_b0() const { return b0 > 0 ? b0 : k; }
    double effective_pm() const { return p_m > 0.0 ? p_m : 2.0 / (k * k); }
    void validate() const;
};

struct SearchRecord {
    StructureMatrix structure;
    std::vector<uint8_t> srf;
    double val_mrr = 0.0;
    HyperParams hp;
    double wall_clock_seconds = 0.0;
    int round = 0;
    int index = 0;

    // Timing is deliberately left out of the line format so identical runs
    // emit byte-identical records files; curve.csv carries wall clock.
    std::string to_json_line() const;
    static SearchRecord from_json_line(const std::string& line);
};

struct SearchSinks {
    std::string records_path;  // jsonl, appended and flushed per record
    std::string curve_path;    // csv: wall_clock_seconds,best_val_mrr_so_far
};

struct SearchResult {
    std::vector<SearchRecord> top;  // top-I by validation MRR (population for evolutionary)
    std::vector<SearchRecord> all;  // every trained structure, in record order
    int trained() const { return static_cast<int>(all.size()); }
};

// --- generation primitives ---------------------------------------------
// b0 distinct cells drawn uniformly, each assigned a value in {±1..±k}.
StructureMatrix sample_initial(int k, int b0, Rng& rng);
// Adds one nonzero entry at a uniformly chosen empty cell; empty optional
// when the parent is already full.
std::optional<StructureMatrix> progressive_step(const StructureMatrix& parent, Rng& rng);
// Each entry independently resamples, with probability p_m, to a uniform
// different value in {0, ±1..±k}.
StructureMatrix mutate(const StructureMatrix& a, double p_m, Rng& rng);
// Each entry picks one parent with probability 1/2.
StructureMatrix crossover(const StructureMatrix& a, const StructureMatrix& b, Rng& rng);

// --- drivers ------------------------------------------------------------
// Cooperative stop: set from a signal handler; searches finish the current
// round, flush, and return what they have.
extern std::atomic<bool> g_stop_requested;

SearchResult progressive_search(const SearchConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                                const SearchSinks* sinks = nullptr);
SearchResult evolutionary_search(const SearchConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                                 const SearchSinks* sinks = nullptr);
SearchResult random_search(const SearchConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                           const SearchSinks* sinks = nullptr);

SearchResult run_search(const SearchConfig& cfg, const TripleStore& data, const FilterIndex& filter,
                        const SearchSinks* sinks = nullptr);

void write_top_structures(const SearchResult& result, const std::string& path);

}  // namespace kgsf
