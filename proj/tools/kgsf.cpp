#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgsf/dataset.hpp"
#include "kgsf/errors.hpp"
#include "kgsf/evaluator.hpp"
#include "kgsf/experiment.hpp"
#include "kgsf/search.hpp"
#include "kgsf/srf.hpp"
#include "kgsf/trainer.hpp"

namespace {

using namespace kgsf;

void handle_sigint(int) { g_stop_requested.store(true); }

StructureMatrix resolve_structure(const std::string& builtin, const std::string& file) {
    if (!builtin.empty() && !file.empty()) throw ConfigError("give either --builtin or --structure, not both");
    if (!builtin.empty()) return builtin_structure(builtin);
    if (file.empty()) throw ConfigError("a structure is required: --builtin <name> or --structure <file>");
    std::ifstream in(file);
    if (!in) throw DataError("cannot read structure file " + file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return StructureMatrix::from_json_string(text);
}

std::string hex_key(const std::string& key) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned char c : key) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xf]);
    }
    return out;
}

std::string pattern_str(const RelationPattern& r) {
    std::string s = "[";
    for (size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + std::to_string(r[i]);
    return s + "]";
}

void cmd_analyze(const std::string& builtin, const std::string& file) {
    const StructureMatrix a = resolve_structure(builtin, file);
    a.validate();
    std::cout << "structure: " << a.to_json_string() << "\n";
    const int rank = rank_exact(a);
    const bool degenerate = is_degenerate(a);
    std::cout << "degenerate: " << (degenerate ? "yes" : "no") << " (rank " << rank << ", nonzeros "
              << a.nonzero_count() << ")\n";
    const auto witnesses = expressiveness_witnesses(a);
    if (witnesses) {
        std::cout << "fully expressive: yes; witnesses " << pattern_str(witnesses->first) << " / "
                  << pattern_str(witnesses->second) << "\n";
    } else {
        std::cout << "fully expressive: not certified";
        // report which half is missing
        bool has_sym = false;
        for_each_pattern(a.k, [&](const RelationPattern& r) {
            if (has_sym) return;
            const auto g = signature_matrix(a, r);
            bool sym = true, nonzero = false;
            for (int i = 0; i < a.k && sym; ++i)
                for (int j = i; j < a.k; ++j) {
                    nonzero = nonzero || g[static_cast<size_t>(i) * a.k + j] != 0;
                    if (g[static_cast<size_t>(i) * a.k + j] != g[static_cast<size_t>(j) * a.k + i]) {
                        sym = false;
                        break;
                    }
                }
            has_sym = has_sym || (sym && nonzero);
        });
        std::cout << (has_sym ? " (skew witness: none)" : " (symmetric witness: none)") << "\n";
    }
    const auto srf = srf_features(a);
    std::cout << "srf:";
    for (uint8_t b : srf) std::cout << ' ' << static_cast<int>(b);
    std::cout << "\norbit size: " << equivalence_orbit(a).size() << "\n";
    std::cout << "canonical key: " << hex_key(canonical_key(a)) << "\n";
}

void write_json_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << body << "\n";
}

nlohmann::json hp_json(const HyperParams& hp) {
    return {{"d", hp.d},           {"eta", hp.eta},       {"lambda", hp.lambda},
            {"batch_size", hp.batch_size}, {"epochs", hp.epochs}, {"seed", hp.seed}};
}

int run(int argc, char** argv) {
    CLI::App app{"bilinear structure search for knowledge-graph embeddings"};
    app.set_config("--config", "", "flat key=value config file; command line overrides it");
    app.require_subcommand(1);

    std::string data_dir, out_dir = "out";
    int k = 4;
    uint64_t seed = 0;
    int threads = 0;
    app.add_option("--data", data_dir, "dataset directory (train.txt/valid.txt/test.txt)");
    app.add_option("--k", k, "number of embedding chunks");
    app.add_option("--seed", seed, "master random seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (0 = OpenMP default)");

    // training hyperparameters shared by several subcommands
    HyperParams hp;
    auto add_hp = [&](CLI::App* cmd) {
        cmd->add_option("--d", hp.d, "embedding dimension");
        cmd->add_option("--eta", hp.eta, "AdaGrad learning rate");
        cmd->add_option("--lambda", hp.lambda, "l2 penalty");
        cmd->add_option("--batch", hp.batch_size, "batch size");
        cmd->add_option("--epochs", hp.epochs, "training epochs");
    };

    std::string builtin, structure_file;
    auto add_structure = [&](CLI::App* cmd) {
        cmd->add_option("--builtin", builtin, "builtin structure name (distmult/complex/simple/analogy/quate)");
        cmd->add_option("--structure", structure_file, "structure JSON file");
    };

    auto* analyze = app.add_subcommand("analyze", "degeneracy, expressiveness, SRF and orbit of a structure");
    add_structure(analyze);

    auto* hps = app.add_subcommand("hpsearch", "stage 1: random hyperparameter probe");
    int s1_trials = 10, s1_epochs = 100, s1_d = 64;
    std::string s1_probe = "simple";
    hps->add_option("--trials", s1_trials, "number of random draws");
    hps->add_option("--probe", s1_probe, "probe structure");
    hps->add_option("--probe-d", s1_d, "probe embedding dimension");
    hps->add_option("--epochs", s1_epochs, "epochs per draw");

    auto* search = app.add_subcommand("search", "stage 2: structure search");
    std::string algo = "evolutionary";
    SearchConfig scfg;
    search->add_option("--algo", algo, "progressive | evolutionary | random");
    search->add_option("--budget", scfg.budget, "max structures trained");
    search->add_option("--N", scfg.n_candidates, "candidates generated per round");
    search->add_option("--P", scfg.top_p, "predictor-selected per round");
    search->add_option("--I", scfg.top_i, "top set / population size");
    search->add_option("--b0", scfg.b0, "initial nonzero count (default k)");
    search->add_option("--pm", scfg.p_m, "mutation probability (default 2/k^2)");
    bool no_filter = false, no_predictor = false;
    search->add_flag("--no-filter", no_filter, "disable the degeneracy/equivalence filter");
    search->add_flag("--no-predictor", no_predictor, "disable the SRF performance predictor");
    add_hp(search);

    auto* finetune_cmd = app.add_subcommand("finetune", "stage 3: retrain top structures at full dimension");
    std::string top_file;
    int s3_trials = 50, s3_epochs = 100;
    std::vector<int> s3_dims{256, 512, 1024, 2048};
    finetune_cmd->add_option("--top", top_file, "top_structures.json from a search run")->required();
    finetune_cmd->add_option("--trials", s3_trials, "number of random draws");
    finetune_cmd->add_option("--dims", s3_dims, "candidate dimensions");
    finetune_cmd->add_option("--epochs", s3_epochs, "epochs per draw");

    auto* train = app.add_subcommand("train", "train one structure");
    add_structure(train);
    add_hp(train);
    std::string checkpoint_out, curve_file, queries_file, val_queries_file;
    int neg_samples = 0;
    int val_sample = 0;
    train->add_option("--checkpoint", checkpoint_out, "write embeddings here");
    train->add_option("--curve", curve_file, "append per-epoch csv here");
    train->add_option("--queries", queries_file, "train on this path-query set instead of triples");
    train->add_option("--val-queries", val_queries_file, "validation query set (with --queries)");
    train->add_option("--neg-samples", neg_samples, "negative terminals per query; 0 = full softmax");
    train->add_option("--val-sample", val_sample, "validation triples sampled for MRR (0 = all)");

    auto* eval = app.add_subcommand("evaluate", "filtered MRR/H@k of a checkpoint");
    add_structure(eval);
    std::string checkpoint_in, split_name = "test";
    eval->add_option("--checkpoint", checkpoint_in, "embedding checkpoint")->required();
    eval->add_option("--split", split_name, "train | valid | test");

    auto* pathgen = app.add_subcommand("pathgen", "sample multi-hop path queries from the training split");
    int path_len = 2, path_n = 100;
    std::string path_split = "test", path_out;
    pathgen->add_option("--L", path_len, "path length (2 or 3)");
    pathgen->add_option("--n", path_n, "number of queries");
    pathgen->add_option("--split", path_split, "split tag stored in the file");
    pathgen->add_option("--queries-out", path_out, "output file (default <out>/queries.json)");

    auto* queryeval = app.add_subcommand("queryeval", "rank true terminals of multi-hop queries");
    add_structure(queryeval);
    queryeval->add_option("--checkpoint", checkpoint_in, "embedding checkpoint")->required();
    queryeval->add_option("--queries", queries_file, "path-query set")->required();

    auto* profile = app.add_subcommand("profile", "relation-type profile of a split");
    profile->add_option("--split", split_name, "train | valid | test");

    CLI11_PARSE(app, argc, argv);

    if (threads > 0) omp_set_num_threads(threads);
    std::signal(SIGINT, handle_sigint);

    auto need_data = [&]() -> TripleStore {
        if (data_dir.empty()) throw ConfigError("--data is required for this subcommand");
        return load_dataset(data_dir);
    };
    auto parse_split = [&](const std::string& name) {
        if (name == "train") return Split::train;
        if (name == "valid") return Split::valid;
        if (name == "test") return Split::test;
        throw ConfigError("unknown split: " + name);
    };

    if (*analyze) {
        cmd_analyze(builtin, structure_file);
        return 0;
    }

    std::filesystem::create_directories(out_dir);

    if (*hps) {
        const TripleStore data = need_data();
        const FilterIndex fi = build_filter_index(data);
        ExperimentConfig cfg;
        cfg.k = k;
        cfg.seed = seed;
        cfg.stage1 = {s1_trials, s1_probe, s1_d, s1_epochs};
        std::vector<HpTrial> trials;
        const HyperParams best = hpsearch(cfg, data, fi, &trials);
        std::ofstream log(out_dir + "/hp_trials.jsonl");
        for (const auto& t : trials) {
            nlohmann::json j{{"hyperparams", hp_json(t.hp)}, {"val_mrr", t.val_mrr}};
            log << j.dump() << "\n";
        }
        write_json_file(out_dir + "/hp_best.json", nlohmann::json{{"hyperparams", hp_json(best)}}.dump(2));
        std::cout << "best: " << hp_json(best).dump() << "\n";
        return 0;
    }

    if (*search) {
        const TripleStore data = need_data();
        const FilterIndex fi = build_filter_index(data);
        scfg.algo = parse_algo(algo);
        scfg.k = k;
        scfg.seed = seed;
        scfg.hp = hp;
        scfg.hp.seed = seed;
        scfg.use_filter = !no_filter;
        scfg.use_predictor = !no_predictor;
        scfg.workers = threads;
        SearchSinks sinks{out_dir + "/records.jsonl", out_dir + "/curve.csv"};
        const SearchResult result = run_search(scfg, data, fi, &sinks);
        write_top_structures(result, out_dir + "/top_structures.json");
        // persist the predictor fitted on everything trained, for resumes
        if (scfg.use_predictor && !result.all.empty()) {
            std::vector<std::vector<uint8_t>> inputs;
            std::vector<double> targets;
            for (const auto& rec : result.all) {
                inputs.push_back(rec.srf);
                targets.push_back(rec.val_mrr);
            }
            fit_predictor(inputs, targets, mix_seed(seed, 0x70726564ULL, 0xffffULL))
                .save(out_dir + "/predictor.json");
        }
        std::cout << "trained " << result.trained() << " structures; best val MRR "
                  << (result.top.empty() ? 0.0 : result.top.front().val_mrr) << "\n";
        for (const auto& rec : result.top)
            std::cout << "  val_mrr=" << rec.val_mrr << "  " << rec.structure.to_json_string() << "\n";
        return 0;
    }

    if (*finetune_cmd) {
        const TripleStore data = need_data();
        const FilterIndex fi = build_filter_index(data);
        std::ifstream in(top_file);
        if (!in) throw DataError("cannot read " + top_file);
        nlohmann::json arr;
        in >> arr;
        std::vector<SearchRecord> top;
        for (const auto& item : arr) top.push_back(SearchRecord::from_json_line(item.dump()));
        ExperimentConfig cfg;
        cfg.k = k;
        cfg.seed = seed;
        cfg.stage3 = {s3_trials, s3_dims, s3_epochs};
        const FinalReport report = finetune(cfg, data, fi, top);
        write_json_file(out_dir + "/final_report.json", report.to_json_string());
        std::cout << report.to_json_string() << "\n";
        return 0;
    }

    if (*train) {
        const TripleStore data = need_data();
        const FilterIndex fi = build_filter_index(data);
        const StructureMatrix a = resolve_structure(builtin, structure_file);
        if (a.k != k && k != 4) throw ConfigError("structure k does not match --k");
        hp.seed = seed;
        TrainReport report;
        EmbeddingStore store;
        if (!queries_file.empty()) {
            const PathQuerySet train_qs = load_path_queries(data, queries_file);
            PathQuerySet valid_qs;
            if (!val_queries_file.empty()) valid_qs = load_path_queries(data, val_queries_file);
            EmbeddingStore init = init_embeddings(data.num_entities(), data.num_relations(), a.k, hp);
            std::tie(store, report) = train_queries(a, std::move(init), data, train_qs, valid_qs, hp, neg_samples);
        } else {
            TrainOptions opts;
            opts.curve_path = curve_file;
            opts.curve_val_every = curve_file.empty() ? 0 : 1;
            opts.val_sample = val_sample;
            std::tie(store, report) = train_structure(a, data, fi, hp, opts);
        }
        if (!checkpoint_out.empty()) save_checkpoint(store, checkpoint_out);
        nlohmann::json j{{"final_train_loss", report.final_train_loss},
                         {"val_mrr", report.val_mrr},
                         {"val_h1", report.val_h1},
                         {"val_h10", report.val_h10},
                         {"epochs_run", report.epochs_run},
                         {"wall_clock_seconds", report.wall_clock_seconds}};
        write_json_file(out_dir + "/train_report.json", j.dump(2));
        std::cout << j.dump() << "\n";
        return 0;
    }

    if (*eval) {
        const TripleStore data = need_data();
        const FilterIndex fi = build_filter_index(data);
        const StructureMatrix a = resolve_structure(builtin, structure_file);
        const EmbeddingStore store = load_checkpoint(checkpoint_in);
        if (store.n_entities != data.num_entities() || store.n_relations != data.num_relations())
            throw DataError("checkpoint does not match dataset vocabulary sizes");
        const EvalReport report = evaluate(ScorerOps(a), store, data.split(parse_split(split_name)), fi);
        nlohmann::json j{{"split", split_name}, {"mrr", report.mrr},   {"h1", report.h1()},
                         {"h3", report.h3()},   {"h10", report.h10()}, {"triples", report.tail_ranks.size()}};
        std::cout << j.dump() << "\n";
        return 0;
    }

    if (*pathgen) {
        const TripleStore data = need_data();
        PathQuerySet qs = generate_path_queries(data, path_len, path_n, seed);
        qs.split = path_split;
        const std::string out_file = path_out.empty() ? out_dir + "/queries.json" : path_out;
        save_path_queries(qs, data, out_file);
        std::cout << "wrote " << qs.queries.size() << " length-" << path_len << " queries to " << out_file << "\n";
        return 0;
    }

    if (*queryeval) {
        const TripleStore data = need_data();
        const StructureMatrix a = resolve_structure(builtin, structure_file);
        const EmbeddingStore store = load_checkpoint(checkpoint_in);
        if (store.n_entities != data.num_entities()) throw DataError("checkpoint does not match dataset");
        const PathQuerySet qs = load_path_queries(data, queries_file);
        const EvalReport report = evaluate_path_queries(ScorerOps(a), store, qs, data);
        nlohmann::json j{{"queries", qs.queries.size()}, {"mrr", report.mrr},
                         {"h1", report.h1()},            {"h3", report.h3()},
                         {"h10", report.h10()}};
        std::cout << j.dump() << "\n";
        return 0;
    }

    if (*profile) {
        const TripleStore data = need_data();
        const RelationProfile prof = profile_relations(data, parse_split(split_name));
        int sym = 0, anti = 0, general = 0, inverse = 0;
        for (int32_t r = 0; r < data.num_relations(); ++r) {
            const auto& s = prof.relations[static_cast<size_t>(r)];
            const char* type = s.type == RelationType::symmetric
                                   ? "symmetric"
                                   : (s.type == RelationType::anti_symmetric ? "anti-symmetric"
                                                                             : "general-asymmetric");
            sym += s.type == RelationType::symmetric;
            anti += s.type == RelationType::anti_symmetric;
            general += s.type == RelationType::general_asymmetric;
            inverse += s.inverse;
            std::cout << data.relation_names[static_cast<size_t>(r)] << "\t" << type << "\ttriples=" << s.total
                      << "\treversed=" << s.reversed;
            if (s.inverse) std::cout << "\tinverse-partner=" << data.relation_names[static_cast<size_t>(s.inverse_partner)];
            std::cout << "\n";
        }
        const double n = std::max(1, data.num_relations());
        std::printf("summary: symmetric %.1f%%  anti-symmetric %.1f%%  general %.1f%%  inverse %.1f%%\n",
                    100.0 * sym / n, 100.0 * anti / n, 100.0 * general / n, 100.0 * inverse / n);
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const kgsf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const kgsf::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const kgsf::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
