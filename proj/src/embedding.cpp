#include "kgsf/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "kgsf/errors.hpp"
#include "kgsf/rng.hpp"

namespace kgsf {

void HyperParams::validate(int k) const {
    if (d <= 0 || d % k != 0)
        throw ConfigError("hyperparams: d=" + std::to_string(d) + " must be positive and divisible by k=" +
                          std::to_string(k));
    if (eta <= 0.0 || eta > 1.0) throw ConfigError("hyperparams: eta must be in (0, 1]");
    if (lambda < 0.0) throw ConfigError("hyperparams: lambda must be nonnegative");
    if (batch_size <= 0) throw ConfigError("hyperparams: batch_size must be positive");
    if (epochs <= 0) throw ConfigError("hyperparams: epochs must be positive");
}

EmbeddingStore init_embeddings(int32_t n_entities, int32_t n_relations, int k, const HyperParams& hp) {
    if (n_entities <= 0 || n_relations <= 0) throw ConfigError("init_embeddings: sizes must be positive");
    hp.validate(k);
    EmbeddingStore store;
    store.n_entities = n_entities;
    store.n_relations = n_relations;
    store.d = hp.d;
    store.k = k;
    store.seed = hp.seed;
    store.entity.resize(static_cast<size_t>(n_entities) * hp.d);
    store.relation.resize(static_cast<size_t>(n_relations) * hp.d);
    const double scale = 0.5 / std::sqrt(static_cast<double>(hp.d));
    Rng rng(mix_seed(hp.seed, 0x656d62ULL));
    for (double& v : store.entity) v = rng.uniform(-scale, scale);
    for (double& v : store.relation) v = rng.uniform(-scale, scale);
    return store;
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian host");

void write_u64(std::ofstream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

uint64_t read_u64(std::ifstream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

}  // namespace

void save_checkpoint(const EmbeddingStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    write_u64(out, static_cast<uint64_t>(store.n_entities));
    write_u64(out, static_cast<uint64_t>(store.n_relations));
    write_u64(out, static_cast<uint64_t>(store.d));
    write_u64(out, static_cast<uint64_t>(store.k));
    write_u64(out, store.seed);
    out.write(reinterpret_cast<const char*>(store.entity.data()),
              static_cast<std::streamsize>(store.entity.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(store.relation.data()),
              static_cast<std::streamsize>(store.relation.size() * sizeof(double)));
    if (!out) throw DataError("short write on checkpoint " + path);
}

EmbeddingStore load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint " + path);
    EmbeddingStore store;
    store.n_entities = static_cast<int32_t>(read_u64(in));
    store.n_relations = static_cast<int32_t>(read_u64(in));
    store.d = static_cast<int>(read_u64(in));
    store.k = static_cast<int>(read_u64(in));
    store.seed = read_u64(in);
    if (!in || store.n_entities <= 0 || store.n_relations <= 0 || store.d <= 0 || store.k <= 0 ||
        store.d % store.k != 0)
        throw DataError("corrupt checkpoint header in " + path);
    store.entity.resize(static_cast<size_t>(store.n_entities) * store.d);
    store.relation.resize(static_cast<size_t>(store.n_relations) * store.d);
    in.read(reinterpret_cast<char*>(store.entity.data()),
            static_cast<std::streamsize>(store.entity.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(store.relation.data()),
            static_cast<std::streamsize>(store.relation.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint " + path);
    return store;
}

}  // namespace kgsf
