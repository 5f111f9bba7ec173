#include <tagcomp/error.hpp>
#include <tagcomp/objective.hpp>

#include <cmath>
#include <string>

namespace tagcomp {

void HyperParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(what);
    };
    require(lambda1 >= 0.0 && std::isfinite(lambda1), "lambda1 must be non-negative");
    require(lambda2 >= 0.0 && std::isfinite(lambda2), "lambda2 must be non-negative");
    require(lambda3 >= 0.0 && std::isfinite(lambda3), "lambda3 must be non-negative");
    require(!gamma || (*gamma > 0.0 && std::isfinite(*gamma)), "gamma must be positive");
    require(k >= 1, "k must be at least 1");
    require(eta > 0.0 && std::isfinite(eta), "eta must be positive");
    require(epsilon_l1 > 0.0 && std::isfinite(epsilon_l1), "epsilon_l1 must be positive");
    require(max_outer >= 0, "max_outer must be non-negative");
    require(max_inner >= 1, "max_inner must be at least 1");
    require(tol >= 0.0, "tol must be non-negative");
    require(filters >= 1, "filters must be at least 1");
    require(window >= 1, "window must be at least 1");
    require(stride >= 1, "stride must be at least 1");
}

namespace {

void check_tag_shapes(const TagState& s) {
    if (s.T_hat.rows() != s.T.rows() || s.T_hat.cols() != s.T.cols() ||
        s.Phi.rows() != s.T.rows() || s.Phi.cols() != s.T.cols()) {
        throw InvalidArgument("tag matrices T, T_hat and Phi differ in shape");
    }
}

}  // namespace

double consistency_term(const TagState& state) {
    check_tag_shapes(state);
    return (state.Phi.array() * (state.T - state.T_hat).array().square()).sum();
}

Matrix prediction_residual(const TagState& state, const Matrix& Y, const Predictor& pred) {
    if (Y.cols() != state.images() || pred.U.rows() != state.tags() ||
        pred.U.cols() != Y.rows() || pred.b.size() != state.tags()) {
        throw InvalidArgument("prediction: shape mismatch between T, Y, U and b");
    }
    Matrix res = state.T - pred.U * Y;
    res.colwise() += pred.b;
    return res;
}

double prediction_term(const TagState& state, const Matrix& Y, const Predictor& pred) {
    return prediction_residual(state, Y, pred).squaredNorm();
}

double smoothness_term(const TagState& state, const SimilarityGraph& graph) {
    if (graph.size() != state.images()) {
        throw InvalidArgument("similarity graph size does not match image count");
    }
    double total = 0.0;
    for (Index i = 0; i < graph.size(); ++i) {
        const auto& nb = graph.neighbors[static_cast<size_t>(i)];
        const auto& w = graph.weights[static_cast<size_t>(i)];
        for (size_t p = 0; p < nb.size(); ++p) {
            total += w[p] * (state.T.col(i) - state.T.col(nb[p])).squaredNorm();
        }
    }
    return total;
}

double sparsity_term(const TagState& state, double epsilon_l1) {
    // sqrt(t^2 + e^2) - e rewritten as t^2 / (sqrt(t^2 + e^2) + e): exact zero
    // at t = 0 and no cancellation for small |t|.
    const double e2 = epsilon_l1 * epsilon_l1;
    const auto t2 = state.T.array().square();
    return (t2 / ((t2 + e2).sqrt() + epsilon_l1)).sum();
}

ObjectiveBreakdown objective_total(const TagState& state, const Matrix& Y,
                                   const Predictor& pred, const SimilarityGraph& graph,
                                   const HyperParams& hp) {
    ObjectiveBreakdown o;
    o.consistency = consistency_term(state);
    o.prediction = prediction_term(state, Y, pred);
    o.smoothness = smoothness_term(state, graph);
    o.sparsity = sparsity_term(state, hp.epsilon_l1);
    o.total = o.consistency + hp.lambda1 * o.prediction + hp.lambda2 * o.smoothness +
              hp.lambda3 * o.sparsity;
    return o;
}

}  // namespace tagcomp
