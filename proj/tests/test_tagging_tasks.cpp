#include <doctest.h>

#include "support.hpp"

#include <tagcomp/error.hpp>
#include <tagcomp/tagging_tasks.hpp>

#include <algorithm>
#include <numeric>
#include <set>

using namespace tagcomp;
using namespace tagcomp::testing;

namespace {

std::vector<Index> sort_oracle(const Vector& v) {
    std::vector<std::pair<double, Index>> all;
    for (Index j = 0; j < v.size(); ++j) all.emplace_back(-v[j], j);
    std::sort(all.begin(), all.end());
    std::vector<Index> out;
    for (const auto& p : all) out.push_back(p.second);
    return out;
}

}  // namespace

TEST_CASE("mask_generate") {
    std::mt19937_64 rng(1);

    SUBCASE("tiny rho removes nothing") {
        const Matrix T = random_binary(rng, 5, 6);
        const auto m = mask_generate(T, 1e-9, 3);
        CHECK(m.Phi == Matrix::Ones(5, 6));
        CHECK(m.T_hat == T);
        CHECK(m.masked == 0);
    }
    SUBCASE("half of ten positives") {
        Matrix T = Matrix::Zero(4, 5);
        for (int e = 0; e < 10; ++e) T.data()[e * 2] = 1.0;
        const auto m = mask_generate(T, 0.5, 7);
        CHECK(m.masked == 5);
        CHECK((m.Phi.array() == 0.0).count() == 5);
    }
    SUBCASE("seeded determinism") {
        const Matrix T = random_binary(rng, 10, 20);
        REQUIRE(T.sum() >= 100);
        const auto a = mask_generate(T, 0.3, 11);
        const auto b = mask_generate(T, 0.3, 11);
        const auto c = mask_generate(T, 0.3, 12);
        CHECK(a.Phi == b.Phi);
        CHECK(a.Phi != c.Phi);
    }
    SUBCASE("never masks negatives; observed entries equal the truth") {
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix T = random_binary(rng, 6, 8, 0.4);
            const auto m = mask_generate(T, 0.6, Seed(trial));
            for (Index e = 0; e < T.size(); ++e) {
                if (m.Phi.data()[e] == 0.0) REQUIRE(T.data()[e] == 1.0);
                else REQUIRE(m.T_hat.data()[e] == T.data()[e]);
            }
        }
    }
    SUBCASE("reports rows and columns left without positives") {
        Matrix T = Matrix::Zero(2, 2);
        T(0, 0) = 1.0;
        T(1, 1) = 1.0;
        const auto m = mask_generate(T, 0.99, 1);
        CHECK(m.masked == 1);
        CHECK(m.rows_without_positives.size() == 1);
        CHECK(m.cols_without_positives.size() == 1);
    }
    SUBCASE("rho outside (0,1)") {
        CHECK_THROWS_AS(mask_generate(Matrix::Ones(2, 2), 0.0, 1), InvalidArgument);
        CHECK_THROWS_AS(mask_generate(Matrix::Ones(2, 2), 1.0, 1), InvalidArgument);
    }
}

TEST_CASE("annotate_topk and retrieve") {
    Vector s(3);
    s << 0.9, 0.1, 0.5;
    CHECK(annotate_topk(s, 2) == std::vector<Index>{0, 2});
    CHECK(annotate_topk(Vector::Constant(4, 0.3), 3) == std::vector<Index>{0, 1, 2});
    CHECK(retrieve(Vector::Constant(3, 1.0)) == std::vector<Index>{0, 1, 2});
    CHECK(retrieve(s) == std::vector<Index>{0, 2, 1});

    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector v = random_matrix(rng, 12, 1).col(0);
        const auto full = sort_oracle(v);
        REQUIRE(retrieve(v) == full);
        REQUIRE(annotate_topk(v, 5) == std::vector<Index>(full.begin(), full.begin() + 5));
    }
}

TEST_CASE("precision_at_k") {
    CHECK(precision_at_k({1, 2, 3}, {3, 2, 1, 7}, 3) == 1.0);
    CHECK(precision_at_k({1, 2, 3}, {4, 5}, 3) == 0.0);
    CHECK(precision_at_k({0, 1, 2, 3, 4}, {0, 2, 4, 9}, 5) == 0.6);
    CHECK_THROWS_AS(precision_at_k({0}, {0}, 0), InvalidArgument);
}

TEST_CASE("pos_at_top") {
    CHECK(*pos_at_top({2, 0, 1, 3}, {0, 2}) == 1.0);
    CHECK(*pos_at_top({3, 0, 1}, {0, 1}) == 0.0);
    CHECK(*pos_at_top({0, 1, 2, 3}, {0, 2, 3}) == doctest::Approx(1.0 / 3.0));
    CHECK(*pos_at_top({0, 1}, {0, 1}) == 1.0);
    CHECK_FALSE(pos_at_top({0, 1}, {}).has_value());
    CHECK_THROWS_AS(pos_at_top({}, {0}), InvalidArgument);
}

TEST_CASE("metrics depend only on the ranking") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector v = random_matrix(rng, 10, 1).col(0);
        const Vector w = (v.array() * 3.0 + 1.0).exp().matrix();  // strictly increasing map
        const std::vector<Index> truth{1, 4, 7};
        REQUIRE(precision_at_k(annotate_topk(v, 5), truth, 5) ==
                precision_at_k(annotate_topk(w, 5), truth, 5));
        REQUIRE(pos_at_top(retrieve(v), truth) == pos_at_top(retrieve(w), truth));
    }
}

TEST_CASE("pos_at_top is one exactly when relevant items lead") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Index> ranking(8);
        std::iota(ranking.begin(), ranking.end(), 0);
        std::shuffle(ranking.begin(), ranking.end(), rng);
        std::vector<Index> relevant;
        for (Index x = 0; x < 8; ++x)
            if (rng() % 3 == 0) relevant.push_back(x);
        if (relevant.empty()) continue;
        std::set<Index> rel(relevant.begin(), relevant.end());
        bool leading = true;
        for (size_t p = 0; p < rel.size(); ++p) leading = leading && rel.count(ranking[p]);
        REQUIRE((*pos_at_top(ranking, relevant) == 1.0) == leading);
    }
}

TEST_CASE("fold_assignment is a balanced partition") {
    for (Index n : {4, 7, 10, 50}) {
        for (int folds : {2, 3, 4}) {
            if (folds > n) continue;
            const auto f = fold_assignment(n, folds, 13);
            std::vector<int> sizes(size_t(folds), 0);
            for (int v : f) {
                REQUIRE(v >= 0);
                REQUIRE(v < folds);
                ++sizes[size_t(v)];
            }
            const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
            REQUIRE(*hi - *lo <= 1);
            REQUIRE(fold_assignment(n, folds, 13) == f);
        }
    }
    const auto loo = fold_assignment(4, 4, 1);
    CHECK(std::set<int>(loo.begin(), loo.end()).size() == 4);
    CHECK_THROWS_AS(fold_assignment(4, 1, 1), InvalidArgument);
    CHECK_THROWS_AS(fold_assignment(4, 5, 1), InvalidArgument);
}

TEST_CASE("synth_dataset") {
    SUBCASE("noiseless clusters share tags and patches") {
        SynthParams p;
        p.images = 10;
        p.tags = 8;
        p.clusters = 2;
        p.noise = 0.0;
        const auto sd = synth_dataset(p);
        for (int i = 0; i < p.images; ++i) {
            for (int q = 0; q < p.images; ++q) {
                if (sd.cluster_of[size_t(i)] != sd.cluster_of[size_t(q)]) continue;
                REQUIRE(sd.T_full.col(i) == sd.T_full.col(q));
                REQUIRE(sd.images[size_t(i)].data == sd.images[size_t(q)].data);
            }
        }
    }
    SUBCASE("tag matrix is the cluster block pattern") {
        SynthParams p;
        const auto sd = synth_dataset(p);
        for (int i = 0; i < p.images; ++i) {
            Vector expect = Vector::Zero(p.tags);
            for (Index j : cluster_tags(sd.cluster_of[size_t(i)], p.tags, p.clusters)) expect[j] = 1.0;
            REQUIRE(sd.T_full.col(i) == expect);
        }
        for (int c = 0; c < p.clusters; ++c) CHECK(cluster_tags(c, p.tags, p.clusters).size() >= 5);
    }
    SUBCASE("clusters are recoverable by nearest center on mean patches") {
        SynthParams p;
        p.noise = 0.1;
        p.seed = 5;
        const auto sd = synth_dataset(p);
        for (int i = 0; i < p.images; ++i) {
            const Vector mean = sd.images[size_t(i)].data.rowwise().mean();
            Index best = 0;
            (sd.centers.colwise() - mean).colwise().squaredNorm().minCoeff(&best);
            REQUIRE(best == sd.cluster_of[size_t(i)]);
        }
    }
    SUBCASE("seeded") {
        SynthParams p;
        CHECK(synth_dataset(p).images[3].data == synth_dataset(p).images[3].data);
    }
}

TEST_CASE("cross_validate leave-one-out and determinism") {
    SynthParams p;
    p.images = 4;
    p.tags = 6;
    p.dim = 4;
    p.clusters = 2;
    p.noise = 0.05;
    const auto sd = synth_dataset(p);
    HyperParams hp;
    hp.filters = 3;
    hp.k = 2;
    hp.max_outer = 10;
    const auto a = cross_validate(sd.images, sd.T_full, 4, 0.3, hp, 8);
    CHECK(std::set<int>(a.fold_of.begin(), a.fold_of.end()).size() == 4);
    CHECK(a.precision.per_fold.size() == 4);
    for (double v : a.precision.per_fold) CHECK((v >= 0.0 && v <= 1.0));
    const auto b = cross_validate(sd.images, sd.T_full, 4, 0.3, hp, 8);
    CHECK(a.fold_of == b.fold_of);
    CHECK(a.precision.per_fold == b.precision.per_fold);
    CHECK(a.pos_at_top.per_fold == b.pos_at_top.per_fold);
    CHECK(a.precision.mean == doctest::Approx(std::accumulate(a.precision.per_fold.begin(),
                                                              a.precision.per_fold.end(), 0.0) /
                                              4.0));
    CHECK_THROWS_AS(cross_validate(sd.images, sd.T_full, 5, 0.3, hp, 8), InvalidArgument);
}
