#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgsf/structure.hpp"

namespace kgsf {

struct PredictorOptions {
    int hidden = 64;
    double learning_rate = 1e-2;
    int steps = 4000;
    double init_scale = 0.1;
};

// Two-layer MLP (rectifier hidden, linear output) mapping an SRF bit
// vector to a predicted validation MRR.  Immutable once fitted.
class Predictor {
public:
    Predictor() = default;
    Predictor(int input_dim, int hidden, uint64_t seed, double init_scale);

    double predict(const std::vector<uint8_t>& bits) const;

    int input_dim() const { return input_dim_; }
    int hidden() const { return hidden_; }
    uint64_t seed() const { return seed_; }

    std::string to_json_string() const;
    static Predictor from_json_string(const std::string& text);

    void save(const std::string& path) const;
    static Predictor load(const std::string& path);

private:
    friend Predictor fit_predictor(const std::vector<std::vector<uint8_t>>&, const std::vector<double>&,
                                   uint64_t, const PredictorOptions&, std::vector<double>*);
    int input_dim_ = 0;
    int hidden_ = 0;
    uint64_t seed_ = 0;
    std::vector<double> w1_;  // hidden x input, row-major
    std::vector<double> b1_;  // hidden
    std::vector<double> w2_;  // hidden
    double b2_ = 0.0;
};

// Full-batch gradient descent on mean squared error; deterministic given
// the seed.  loss_curve, when non-null, receives the loss after every step.
Predictor fit_predictor(const std::vector<std::vector<uint8_t>>& inputs, const std::vector<double>& targets,
                        uint64_t seed, const PredictorOptions& opts = {},
                        std::vector<double>* loss_curve = nullptr);

// Top-p candidates by predicted score, descending; stable, so ties keep
// insertion order.  p >= |candidates| returns everything.
std::vector<StructureMatrix> predictor_rank(const Predictor& p, const std::vector<StructureMatrix>& candidates,
                                            int top_p);

// Index-based variant for callers that already hold SRF vectors.
std::vector<int> rank_by_prediction(const Predictor& p, const std::vector<std::vector<uint8_t>>& srfs, int top_p);

}  // namespace kgsf
