#pragma once

#include <tagcomp/conv_repr.hpp>
#include <tagcomp/similarity_graph.hpp>
#include <tagcomp/types.hpp>

#include <optional>

namespace tagcomp {

// Completed scores T, observed assignments T_hat and observation mask Phi,
// all m x n. T_hat is ignored wherever Phi is 0.
struct TagState {
    Matrix T;
    Matrix T_hat;
    Matrix Phi;

    Index tags() const { return T.rows(); }
    Index images() const { return T.cols(); }
};

// Linear tag predictor t = U y - b.
struct Predictor {
    Matrix U;  // m x r
    Vector b;  // m
};

struct HyperParams {
    double lambda1 = 1.0;
    double lambda2 = 0.5;
    double lambda3 = 0.05;
    std::optional<double> gamma;  // unset: median heuristic on every rebuild
    int k = 5;
    double eta = 1e-2;
    double epsilon_l1 = 1e-6;
    int max_outer = 200;
    int max_inner = 5;
    double tol = 1e-5;

    // Model shape and ingestion.
    Nonlinearity nonlinearity = Nonlinearity::tanh;
    int filters = 8;
    int window = 8;
    int stride = 4;

    // Drop the S(i', i) half of the smoothness gradient. Off means the exact
    // gradient of the objective.
    bool one_sided_smoothness = false;

    // Throws InvalidArgument on out-of-range fields.
    void validate() const;
};

struct ObjectiveBreakdown {
    double total = 0.0;
    double consistency = 0.0;
    double prediction = 0.0;
    double smoothness = 0.0;
    double sparsity = 0.0;
};

// sum_ji phi_ji (t_ji - t_hat_ji)^2
double consistency_term(const TagState& state);

// sum_i || t_i - (U y_i - b) ||^2, with Y of shape r x n
double prediction_term(const TagState& state, const Matrix& Y, const Predictor& pred);

// sum over stored pairs S(i,i') || t_i - t_i' ||^2
double smoothness_term(const TagState& state, const SimilarityGraph& graph);

// Smoothed L1: sum_ji sqrt(t_ji^2 + eps^2) - eps
double sparsity_term(const TagState& state, double epsilon_l1);

ObjectiveBreakdown objective_total(const TagState& state, const Matrix& Y,
                                   const Predictor& pred, const SimilarityGraph& graph,
                                   const HyperParams& hp);

// Prediction residuals t_i - (U y_i - b) as an m x n matrix.
Matrix prediction_residual(const TagState& state, const Matrix& Y, const Predictor& pred);

}  // namespace tagcomp
