#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "kgsf/errors.hpp"
#include "kgsf/search.hpp"
#include "oracles.hpp"

using namespace kgsf;
using namespace kgsf::testing;

namespace {

SearchConfig small_config(SearchAlgo algo, uint64_t seed) {
    SearchConfig cfg;
    cfg.algo = algo;
    cfg.k = 4;
    cfg.n_candidates = 24;
    cfg.top_p = 4;
    cfg.top_i = 4;
    cfg.budget = 12;
    cfg.seed = seed;
    cfg.hp.d = 8;
    cfg.hp.eta = 0.5;
    cfg.hp.lambda = 1e-4;
    cfg.hp.batch_size = 64;
    cfg.hp.epochs = 10;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("search");

TEST_CASE("sample_initial places exactly b0 in-range values") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const StructureMatrix a = sample_initial(4, 6, rng);
        CHECK(a.nonzero_count() == 6);
        for (int v : a.cells) {
            CHECK(v >= -4);
            CHECK(v <= 4);
        }
    }
}

TEST_CASE("progressive_step adds one entry at an empty cell") {
    Rng rng(5);
    const StructureMatrix parent = builtin_structure("distmult");
    for (int trial = 0; trial < 30; ++trial) {
        const auto child = progressive_step(parent, rng);
        REQUIRE(child.has_value());
        CHECK(child->nonzero_count() == parent.nonzero_count() + 1);
        int hamming = 0;
        for (size_t c = 0; c < parent.cells.size(); ++c)
            if (parent.cells[c] != child->cells[c]) {
                ++hamming;
                CHECK(parent.cells[c] == 0);
            }
        CHECK(hamming == 1);
    }
    StructureMatrix full(4);
    for (int& v : full.cells) v = 1;
    CHECK_FALSE(progressive_step(full, rng).has_value());
}

TEST_CASE("mutate resamples to different values at roughly rate p_m") {
    Rng rng(7);
    const StructureMatrix a = builtin_structure("quate");
    int changed = 0;
    const int trials = 4000;
    for (int trial = 0; trial < trials; ++trial) {
        const StructureMatrix b = mutate(a, 2.0 / 16.0, rng);
        for (size_t c = 0; c < a.cells.size(); ++c)
            if (a.cells[c] != b.cells[c]) ++changed;
        for (size_t c = 0; c < a.cells.size(); ++c)
            if (a.cells[c] != b.cells[c]) CHECK(b.cells[c] != a.cells[c]);
    }
    // expectation: 16 entries * p_m = 2 per draw; allow 5 sigma
    const double mean = static_cast<double>(changed) / trials;
    const double sigma = std::sqrt(2.0 * (1.0 - 2.0 / 16.0) / trials);
    CHECK(std::abs(mean - 2.0) < 5.0 * sigma);

    // vanishing p_m returns an unchanged copy
    const StructureMatrix same = mutate(a, 1e-12, rng);
    CHECK(same == a);
}

TEST_CASE("crossover picks every entry from a parent") {
    Rng rng(9);
    const StructureMatrix a = builtin_structure("quate");
    const StructureMatrix b = builtin_structure("distmult");
    bool saw_a = false, saw_b = false;
    for (int trial = 0; trial < 20; ++trial) {
        const StructureMatrix c = crossover(a, b, rng);
        for (size_t i = 0; i < c.cells.size(); ++i) {
            const bool from_a = c.cells[i] == a.cells[i];
            const bool from_b = c.cells[i] == b.cells[i];
            CHECK((from_a || from_b));
            saw_a = saw_a || (from_a && !from_b);
            saw_b = saw_b || (from_b && !from_a);
        }
    }
    CHECK(saw_a);
    CHECK(saw_b);

    const StructureMatrix same = crossover(a, a, rng);
    CHECK(same == a);
    CHECK_THROWS_AS(crossover(a, StructureMatrix(3), rng), ConfigError);
}

TEST_CASE("uniform sampler covers all entry values evenly") {
    Rng rng(11);
    const int samples = 10000;
    std::vector<int> counts(9, 0);
    for (int s = 0; s < samples; ++s) ++counts[static_cast<size_t>(rng.uniform_int(-4, 4) + 4)];
    const double expected = samples / 9.0;
    const double sigma = std::sqrt(samples * (1.0 / 9.0) * (8.0 / 9.0));
    for (int c : counts) CHECK(std::abs(c - expected) < 3.0 * sigma + 1.0);
}

TEST_CASE("budget, tiers and filter soundness hold for all algorithms") {
    const TripleStore data = toy_kg(12, 3, 40);
    const FilterIndex fi = build_filter_index(data);
    for (SearchAlgo algo : {SearchAlgo::progressive, SearchAlgo::evolutionary, SearchAlgo::random}) {
        const SearchConfig cfg = small_config(algo, 13);
        const SearchResult result = run_search(cfg, data, fi);
        CHECK(result.trained() <= cfg.budget);
        CHECK(result.trained() >= cfg.top_i);
        CHECK(result.top.size() <= static_cast<size_t>(cfg.top_i));

        std::set<std::string> keys;
        for (const auto& rec : result.all) {
            CHECK_FALSE(is_degenerate(rec.structure));
            CHECK(keys.insert(canonical_key(rec.structure)).second);  // pairwise non-equivalent
        }
        if (algo == SearchAlgo::progressive) {
            // every structure trained in round b has b0 + b nonzeros
            for (const auto& rec : result.all) CHECK(rec.structure.nonzero_count() == cfg.k + rec.round);
        }
    }
}

TEST_CASE("budget equal to I returns exactly the initial tier") {
    const TripleStore data = toy_kg(12, 3, 40);
    const FilterIndex fi = build_filter_index(data);
    SearchConfig cfg = small_config(SearchAlgo::progressive, 17);
    cfg.budget = cfg.top_i;
    const SearchResult result = run_search(cfg, data, fi);
    CHECK(result.trained() == cfg.top_i);
    for (const auto& rec : result.all) {
        CHECK(rec.round == 0);
        CHECK(rec.structure.nonzero_count() == cfg.k);
    }
}

TEST_CASE("evolutionary population stays at I with non-decreasing worst member") {
    const TripleStore data = toy_kg(12, 3, 40);
    const FilterIndex fi = build_filter_index(data);
    SearchConfig cfg = small_config(SearchAlgo::evolutionary, 19);
    cfg.budget = 16;
    const SearchResult result = evolutionary_search(cfg, data, fi);
    CHECK(result.top.size() == static_cast<size_t>(cfg.top_i));

    // replay the survival rule over the recorded sequence
    std::vector<double> population;
    double prev_worst = -1.0;
    for (const auto& rec : result.all) {
        if (rec.round == 0) {
            population.push_back(rec.val_mrr);
            continue;
        }
        const auto worst_it = std::min_element(population.begin(), population.end());
        const double worst = *worst_it;
        CHECK(worst >= prev_worst - 1e-15);
        prev_worst = worst;
        if (rec.val_mrr > worst) *worst_it = rec.val_mrr;
    }
    // final population floor equals the replayed floor
    double floor = 1.0;
    for (const auto& rec : result.top) floor = std::min(floor, rec.val_mrr);
    CHECK(floor == doctest::Approx(*std::min_element(population.begin(), population.end())));
}

TEST_CASE("random search without the filter may train degenerate structures") {
    const TripleStore data = toy_kg(10, 3, 30);
    const FilterIndex fi = build_filter_index(data);
    SearchConfig cfg = small_config(SearchAlgo::random, 23);
    cfg.use_filter = false;
    cfg.budget = 20;
    const SearchResult result = random_search(cfg, data, fi);
    CHECK(result.trained() == 20);
    int degenerate = 0;
    for (const auto& rec : result.all) degenerate += is_degenerate(rec.structure);
    CHECK(degenerate > 0);  // unfiltered uniform sampling hits degenerate matrices with high probability
}

TEST_CASE("identical config and seed reproduce records byte for byte") {
    const TripleStore data = toy_kg(12, 3, 40);
    const FilterIndex fi = build_filter_index(data);
    const auto dir = std::filesystem::temp_directory_path() / "kgsf_search_det";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);

    for (int run = 0; run < 2; ++run) {
        SearchConfig cfg = small_config(SearchAlgo::evolutionary, 29);
        SearchSinks sinks;
        sinks.records_path = (dir / ("records" + std::to_string(run) + ".jsonl")).string();
        run_search(cfg, data, fi, &sinks);
    }
    const std::string a = slurp((dir / "records0.jsonl").string());
    const std::string b = slurp((dir / "records1.jsonl").string());
    CHECK(a == b);
    CHECK_FALSE(a.empty());

    // records reload through the line parser
    std::ifstream in((dir / "records0.jsonl").string());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const SearchRecord rec = SearchRecord::from_json_line(line);
        CHECK(rec.structure.k == 4);
        CHECK(rec.val_mrr >= 0.0);
        ++n;
    }
    CHECK(n > 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("config validation rejects inconsistent parameters") {
    SearchConfig cfg;
    cfg.top_p = 256;  // P > N
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    SearchConfig cfg2;
    cfg2.b0 = 2;  // below k
    CHECK_THROWS_AS(cfg2.validate(), ConfigError);
    SearchConfig cfg3;
    cfg3.budget = 2;  // below I
    CHECK_THROWS_AS(cfg3.validate(), ConfigError);
}

TEST_SUITE_END();
