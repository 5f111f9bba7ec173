#include <doctest.h>

#include "support.hpp"

#include <tagcomp/error.hpp>
#include <tagcomp/objective.hpp>

#include <cmath>

using namespace tagcomp;
using namespace tagcomp::testing;

namespace {

double loop_consistency(const TagState& s) {
    double total = 0.0;
    for (Index j = 0; j < s.T.rows(); ++j)
        for (Index i = 0; i < s.T.cols(); ++i)
            total += s.Phi(j, i) * (s.T(j, i) - s.T_hat(j, i)) * (s.T(j, i) - s.T_hat(j, i));
    return total;
}

double loop_prediction(const Matrix& T, const Matrix& Y, const Matrix& U, const Vector& b) {
    double total = 0.0;
    for (Index i = 0; i < T.cols(); ++i) {
        for (Index j = 0; j < T.rows(); ++j) {
            double p = -b[j];
            for (Index k = 0; k < Y.rows(); ++k) p += U(j, k) * Y(k, i);
            total += (T(j, i) - p) * (T(j, i) - p);
        }
    }
    return total;
}

double loop_smoothness(const Matrix& T, const Matrix& S) {
    double total = 0.0;
    for (Index i = 0; i < T.cols(); ++i)
        for (Index q = 0; q < T.cols(); ++q)
            for (Index j = 0; j < T.rows(); ++j)
                total += S(i, q) * (T(j, i) - T(j, q)) * (T(j, i) - T(j, q));
    return total;
}

double loop_sparsity(const Matrix& T, double eps) {
    double total = 0.0;
    for (Index e = 0; e < T.size(); ++e) {
        const double t = T.data()[e];
        total += std::sqrt(t * t + eps * eps) - eps;
    }
    return total;
}

struct Instance {
    TagState state;
    Matrix Y;
    Predictor pred;
    SimilarityGraph graph;
};

Instance random_instance(std::mt19937_64& rng, Index m, Index n, Index r) {
    Instance in;
    in.state.T = random_matrix(rng, m, n);
    in.state.Phi = random_binary(rng, m, n);
    in.state.T_hat = random_binary(rng, m, n).cwiseProduct(in.state.Phi);
    in.Y = random_matrix(rng, r, n);
    in.pred.U = random_matrix(rng, m, r);
    in.pred.b = random_matrix(rng, m, 1).col(0);
    const auto nb = knn_neighbors(in.Y, 2);
    in.graph = build_similarity(in.Y, nb, 0.9);
    return in;
}

}  // namespace

TEST_CASE("consistency term") {
    SUBCASE("exact agreement") {
        Matrix T(2, 2);
        T << 1, 0, 0, 1;
        CHECK(consistency_term({T, T, Matrix::Ones(2, 2)}) == 0.0);
    }
    SUBCASE("fully masked") {
        std::mt19937_64 rng(1);
        CHECK(consistency_term({random_matrix(rng, 3, 3), Matrix::Ones(3, 3), Matrix::Zero(3, 3)}) ==
              0.0);
    }
    SUBCASE("hand-summed 2x2") {
        Matrix T(2, 2), Th(2, 2), Phi(2, 2);
        T << 1, 0, 0, 1;
        Th << 0, 0, 0, 1;
        Phi << 1, 0, 1, 1;
        CHECK(consistency_term({T, Th, Phi}) == 1.0);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(consistency_term({Matrix::Zero(2, 2), Matrix::Zero(2, 3), Matrix::Zero(2, 2)}),
                        InvalidArgument);
    }
}

TEST_CASE("prediction term") {
    std::mt19937_64 rng(2);
    const Matrix Y = random_matrix(rng, 2, 4);
    Predictor pred{random_matrix(rng, 3, 2), random_matrix(rng, 3, 1).col(0)};

    SUBCASE("perfect predictor") {
        Matrix T = pred.U * Y;
        T.colwise() -= pred.b;
        CHECK(prediction_term({T, T, T}, Y, pred) < 1e-28);
    }
    SUBCASE("zero predictor gives squared Frobenius norm") {
        const Matrix T = random_matrix(rng, 3, 4);
        Predictor zero{Matrix::Zero(3, 2), Vector::Zero(3)};
        CHECK(prediction_term({T, T, T}, Y, zero) == doctest::Approx(T.squaredNorm()).epsilon(1e-14));
    }
    SUBCASE("matches a scalar triple loop") {
        const Matrix T = random_matrix(rng, 3, 4);
        CHECK(prediction_term({T, T, T}, Y, pred) ==
              doctest::Approx(loop_prediction(T, Y, pred.U, pred.b)).epsilon(1e-13));
    }
    SUBCASE("shape mismatch") {
        const Matrix T = random_matrix(rng, 3, 5);
        CHECK_THROWS_AS(prediction_term({T, T, T}, Y, pred), InvalidArgument);
    }
}

TEST_CASE("smoothness term") {
    std::mt19937_64 rng(3);
    const Matrix Y = random_matrix(rng, 2, 5);
    auto graph = build_similarity(Y, knn_neighbors(Y, 2), 1.0);

    SUBCASE("identical columns give zero") {
        Matrix T = Vector::LinSpaced(3, 0.0, 1.0).replicate(1, 5);
        CHECK(smoothness_term({T, T, T}, graph) == 0.0);
    }
    SUBCASE("linear in S") {
        const Matrix T = random_matrix(rng, 3, 5);
        const double base = smoothness_term({T, T, T}, graph);
        auto doubled = graph;
        for (auto& w : doubled.weights)
            for (double& v : w) v *= 2.0;
        CHECK(smoothness_term({T, T, T}, doubled) == doctest::Approx(2.0 * base).epsilon(1e-14));
    }
    SUBCASE("hand-set chain") {
        // 0 -> 1, 1 -> 2, 2 -> 1 with weights 1
        SimilarityGraph chain;
        chain.neighbors = {{1}, {2}, {1}};
        chain.weights = {{1.0}, {1.0}, {1.0}};
        Matrix T(1, 3);
        T << 0, 1, 3;
        // (0-1)^2 + (1-3)^2 + (3-1)^2 = 9
        CHECK(smoothness_term({T, T, T}, chain) == 9.0);
    }
    SUBCASE("matches the dense double sum") {
        const Matrix T = random_matrix(rng, 3, 5);
        CHECK(smoothness_term({T, T, T}, graph) ==
              doctest::Approx(loop_smoothness(T, graph.dense())).epsilon(1e-13));
    }
}

TEST_CASE("sparsity term") {
    CHECK(sparsity_term({Matrix::Zero(3, 4), {}, {}}, 1e-6) == 0.0);
    Matrix one(1, 1);
    one << 3.0;
    CHECK(std::abs(sparsity_term({one, {}, {}}, 1e-8) - 3.0) <= 1e-7);

    std::mt19937_64 rng(4);
    const double eps = 1e-3;
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix T = random_matrix(rng, 4, 5);
        const double smooth = sparsity_term({T, {}, {}}, eps);
        const double exact = T.cwiseAbs().sum();
        REQUIRE(std::abs(smooth - exact) <= eps * double(T.size()));
        REQUIRE(smooth == doctest::Approx(loop_sparsity(T, eps)).epsilon(1e-12));
    }
}

TEST_CASE("objective_total") {
    std::mt19937_64 rng(5);
    SUBCASE("zero weights at exact agreement") {
        auto in = random_instance(rng, 3, 4, 2);
        in.state.T = in.state.T_hat;
        in.state.Phi.setOnes();
        HyperParams hp;
        hp.lambda1 = hp.lambda2 = hp.lambda3 = 0.0;
        CHECK(objective_total(in.state, in.Y, in.pred, in.graph, hp).total == 0.0);
    }
    SUBCASE("total is the weighted sum of independently computed terms") {
        for (int trial = 0; trial < 10; ++trial) {
            auto in = random_instance(rng, 3, 5, 2);
            HyperParams hp;
            hp.lambda1 = 0.7;
            hp.lambda2 = 1.3;
            hp.lambda3 = 0.2;
            const auto o = objective_total(in.state, in.Y, in.pred, in.graph, hp);
            CHECK(o.consistency >= 0.0);
            CHECK(o.prediction >= 0.0);
            CHECK(o.smoothness >= 0.0);
            CHECK(o.sparsity >= 0.0);
            CHECK(std::abs(o.total - (o.consistency + 0.7 * o.prediction + 1.3 * o.smoothness +
                                      0.2 * o.sparsity)) <= 1e-12);
            const double oracle = loop_consistency(in.state) +
                                  0.7 * loop_prediction(in.state.T, in.Y, in.pred.U, in.pred.b) +
                                  1.3 * loop_smoothness(in.state.T, in.graph.dense()) +
                                  0.2 * loop_sparsity(in.state.T, hp.epsilon_l1);
            CHECK(o.total == doctest::Approx(oracle).epsilon(1e-12));
        }
    }
}

TEST_CASE("objective invariants") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        auto in = random_instance(rng, 4, 6, 3);

        // masked entries of T do not affect consistency
        TagState moved = in.state;
        for (Index e = 0; e < moved.T.size(); ++e)
            if (moved.Phi.data()[e] == 0.0) moved.T.data()[e] += 5.0;
        REQUIRE(consistency_term(moved) == doctest::Approx(consistency_term(in.state)));

        // smoothness ignores a common shift of every column
        TagState shifted = in.state;
        shifted.T.colwise() += random_matrix(rng, 4, 1).col(0);
        REQUIRE(smoothness_term(shifted, in.graph) ==
                doctest::Approx(smoothness_term(in.state, in.graph)).epsilon(1e-12));

        // linear in each lambda
        HyperParams hp;
        hp.lambda1 = hp.lambda2 = hp.lambda3 = 0.0;
        const double base = objective_total(in.state, in.Y, in.pred, in.graph, hp).total;
        for (double HyperParams::*field : {&HyperParams::lambda1, &HyperParams::lambda2,
                                           &HyperParams::lambda3}) {
            HyperParams a = hp, b = hp;
            a.*field = 1.0;
            b.*field = 3.0;
            const double fa = objective_total(in.state, in.Y, in.pred, in.graph, a).total;
            const double fb = objective_total(in.state, in.Y, in.pred, in.graph, b).total;
            REQUIRE((fb - base) == doctest::Approx(3.0 * (fa - base)).epsilon(1e-12));
        }
    }
}

TEST_CASE("hyper-parameter validation") {
    HyperParams hp;
    CHECK_NOTHROW(hp.validate());
    hp.lambda2 = -1.0;
    CHECK_THROWS_AS(hp.validate(), InvalidArgument);
    hp = {};
    hp.gamma = 0.0;
    CHECK_THROWS_AS(hp.validate(), InvalidArgument);
    hp = {};
    hp.eta = 0.0;
    CHECK_THROWS_AS(hp.validate(), InvalidArgument);
}
