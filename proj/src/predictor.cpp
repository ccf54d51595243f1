#include "kgsf/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "kgsf/errors.hpp"
#include "kgsf/rng.hpp"
#include "kgsf/srf.hpp"

namespace kgsf {

Predictor::Predictor(int input_dim, int hidden, uint64_t seed, double init_scale)
    : input_dim_(input_dim), hidden_(hidden), seed_(seed) {
    Rng rng(seed);
    w1_.resize(static_cast<size_t>(hidden) * input_dim);
    b1_.resize(static_cast<size_t>(hidden));
    w2_.resize(static_cast<size_t>(hidden));
    for (double& w : w1_) w = rng.uniform(-init_scale, init_scale);
    for (double& w : b1_) w = rng.uniform(-init_scale, init_scale);
    for (double& w : w2_) w = rng.uniform(-init_scale, init_scale);
    b2_ = rng.uniform(-init_scale, init_scale);
}

double Predictor::predict(const std::vector<uint8_t>& bits) const {
    if (static_cast<int>(bits.size()) != input_dim_)
        throw ConfigError("predictor: input length " + std::to_string(bits.size()) + " != " +
                          std::to_string(input_dim_));
    double out = b2_;
    for (int h = 0; h < hidden_; ++h) {
        double z = b1_[static_cast<size_t>(h)];
        const double* row = &w1_[static_cast<size_t>(h) * input_dim_];
        for (int i = 0; i < input_dim_; ++i)
            if (bits[static_cast<size_t>(i)]) z += row[i];
        if (z > 0) out += w2_[static_cast<size_t>(h)] * z;
    }
    return out;
}

Predictor fit_predictor(const std::vector<std::vector<uint8_t>>& inputs, const std::vector<double>& targets,
                        uint64_t seed, const PredictorOptions& opts, std::vector<double>* loss_curve) {
    if (inputs.empty()) throw ConfigError("fit_predictor: need at least one record");
    if (inputs.size() != targets.size()) throw ConfigError("fit_predictor: inputs/targets size mismatch");
    const int in_dim = static_cast<int>(inputs.front().size());
    for (const auto& x : inputs)
        if (static_cast<int>(x.size()) != in_dim) throw ConfigError("fit_predictor: ragged inputs");

    Predictor p(in_dim, opts.hidden, seed, opts.init_scale);
    const size_t n = inputs.size();
    const int H = opts.hidden;
    std::vector<double> hidden_z(static_cast<size_t>(H));
    std::vector<double> gw1(p.w1_.size()), gb1(p.b1_.size()), gw2(p.w2_.size());

    for (int step = 0; step < opts.steps; ++step) {
        std::fill(gw1.begin(), gw1.end(), 0.0);
        std::fill(gb1.begin(), gb1.end(), 0.0);
        std::fill(gw2.begin(), gw2.end(), 0.0);
        double gb2 = 0.0;
        double loss = 0.0;
        for (size_t s = 0; s < n; ++s) {
            const auto& x = inputs[s];
            double out = p.b2_;
            for (int h = 0; h < H; ++h) {
                double z = p.b1_[static_cast<size_t>(h)];
                const double* row = &p.w1_[static_cast<size_t>(h) * in_dim];
                for (int i = 0; i < in_dim; ++i)
                    if (x[static_cast<size_t>(i)]) z += row[i];
                hidden_z[static_cast<size_t>(h)] = z;
                if (z > 0) out += p.w2_[static_cast<size_t>(h)] * z;
            }
            const double err = out - targets[s];
            loss += err * err;
            const double d_out = 2.0 * err / static_cast<double>(n);
            gb2 += d_out;
            for (int h = 0; h < H; ++h) {
                const double z = hidden_z[static_cast<size_t>(h)];
                if (z <= 0) continue;
                gw2[static_cast<size_t>(h)] += d_out * z;
                const double dz = d_out * p.w2_[static_cast<size_t>(h)];
                gb1[static_cast<size_t>(h)] += dz;
                double* grow = &gw1[static_cast<size_t>(h) * in_dim];
                for (int i = 0; i < in_dim; ++i)
                    if (x[static_cast<size_t>(i)]) grow[i] += dz;
            }
        }
        if (loss_curve) loss_curve->push_back(loss / static_cast<double>(n));
        const double lr = opts.learning_rate;
        for (size_t i = 0; i < p.w1_.size(); ++i) p.w1_[i] -= lr * gw1[i];
        for (size_t i = 0; i < p.b1_.size(); ++i) p.b1_[i] -= lr * gb1[i];
        for (size_t i = 0; i < p.w2_.size(); ++i) p.w2_[i] -= lr * gw2[i];
        p.b2_ -= lr * gb2;
    }
    return p;
}

std::vector<int> rank_by_prediction(const Predictor& p, const std::vector<std::vector<uint8_t>>& srfs, int top_p) {
    std::vector<std::pair<double, int>> scored;
    scored.reserve(srfs.size());
    for (size_t i = 0; i < srfs.size(); ++i) scored.emplace_back(p.predict(srfs[i]), static_cast<int>(i));
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const size_t take = std::min<size_t>(scored.size(), top_p < 0 ? 0 : static_cast<size_t>(top_p));
    std::vector<int> order;
    order.reserve(take);
    for (size_t i = 0; i < take; ++i) order.push_back(scored[i].second);
    return order;
}

std::vector<StructureMatrix> predictor_rank(const Predictor& p, const std::vector<StructureMatrix>& candidates,
                                            int top_p) {
    std::vector<std::vector<uint8_t>> srfs;
    srfs.reserve(candidates.size());
    for (const auto& a : candidates) srfs.push_back(srf_features(a));
    std::vector<int> order = rank_by_prediction(p, srfs, top_p);
    std::vector<StructureMatrix> out;
    out.reserve(order.size());
    for (int idx : order) out.push_back(candidates[static_cast<size_t>(idx)]);
    return out;
}

std::string Predictor::to_json_string() const {
    nlohmann::json j{{"input_dim", input_dim_}, {"hidden", hidden_}, {"seed", seed_},
                     {"w1", w1_},               {"b1", b1_},         {"w2", w2_},
                     {"b2", b2_}};
    return j.dump();
}

Predictor Predictor::from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("predictor json: ") + e.what());
    }
    Predictor p;
    p.input_dim_ = j.at("input_dim").get<int>();
    p.hidden_ = j.at("hidden").get<int>();
    p.seed_ = j.at("seed").get<uint64_t>();
    p.w1_ = j.at("w1").get<std::vector<double>>();
    p.b1_ = j.at("b1").get<std::vector<double>>();
    p.w2_ = j.at("w2").get<std::vector<double>>();
    p.b2_ = j.at("b2").get<double>();
    if (p.w1_.size() != static_cast<size_t>(p.hidden_) * p.input_dim_ ||
        p.b1_.size() != static_cast<size_t>(p.hidden_) || p.w2_.size() != static_cast<size_t>(p.hidden_))
        throw DataError("predictor json: inconsistent shapes");
    return p;
}

void Predictor::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << to_json_string() << "\n";
}

Predictor Predictor::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_string(text);
}

}  // namespace kgsf
