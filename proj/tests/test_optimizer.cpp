#include <doctest.h>

#include "support.hpp"

#include <tagcomp/error.hpp>
#include <tagcomp/gradients.hpp>
#include <tagcomp/optimizer.hpp>
#include <tagcomp/tagging_tasks.hpp>

#include <cmath>

using namespace tagcomp;
using namespace tagcomp::testing;

namespace {

Dataset small_dataset(Seed seed, double rho = 0.3, double noise = 0.1) {
    SynthParams p;
    p.images = 12;
    p.tags = 6;
    p.dim = 5;
    p.patches_per_image = 3;
    p.clusters = 2;
    p.noise = noise;
    p.seed = seed;
    const auto sd = synth_dataset(p);
    const auto mask = mask_generate(sd.T_full, rho, seed);
    return Dataset{sd.images, mask.T_hat, mask.Phi};
}

HyperParams small_hp() {
    HyperParams hp;
    hp.filters = 4;
    hp.k = 3;
    return hp;
}

}  // namespace

TEST_CASE("initialize with everything observed keeps T equal to T_hat") {
    Dataset data = small_dataset(1);
    data.Phi.setOnes();
    const auto ts = initialize(data, small_hp(), 3);
    CHECK(ts.state.T == data.T_hat);
    CHECK(ts.trace.size() == 1);
    CHECK(ts.Y.cols() == data.size());
    CHECK(ts.bank.W.rows() == 5);
    CHECK(ts.bank.W.cols() == 4);
}

TEST_CASE("initialize fills masked entries with the observed tag frequency") {
    Dataset data = small_dataset(2);
    // tag 0: every observed entry positive
    data.T_hat.row(0).setOnes();
    data.Phi.row(0).setOnes();
    data.Phi(0, 3) = 0.0;
    data.T_hat(0, 3) = 0.0;
    // tag 1: one of four observed entries positive
    data.Phi.row(1).setZero();
    data.T_hat.row(1).setZero();
    for (Index i : {0, 1, 2, 4}) data.Phi(1, i) = 1.0;
    data.T_hat(1, 4) = 1.0;

    const auto ts = initialize(data, small_hp(), 3);
    CHECK(ts.state.T(0, 3) == 1.0);
    CHECK(ts.state.T(1, 3) == 0.25);
    CHECK(ts.state.T(1, 11) == 0.25);
}

TEST_CASE("initialize is deterministic per seed") {
    const Dataset data = small_dataset(3);
    const auto a = initialize(data, small_hp(), 99);
    const auto b = initialize(data, small_hp(), 99);
    const auto c = initialize(data, small_hp(), 100);
    CHECK(a.bank.W == b.bank.W);
    CHECK(a.pred.U == b.pred.U);
    CHECK(a.pred.b == b.pred.b);
    CHECK(a.state.T == b.state.T);
    CHECK(a.Y == b.Y);
    CHECK(a.trace[0].objective.total == b.trace[0].objective.total);
    CHECK(a.bank.W != c.bank.W);
}

TEST_CASE("initialize errors") {
    Dataset data = small_dataset(4);
    Dataset none = data;
    none.Phi.setZero();
    CHECK_THROWS_WITH_AS(initialize(none, small_hp(), 1), "nothing observed", InvalidArgument);
    Dataset empty;
    CHECK_THROWS_AS(initialize(empty, small_hp(), 1), InvalidArgument);
    Dataset bad = data;
    bad.images[2].data.resize(4, 3);
    bad.images[2].data.setZero();
    CHECK_THROWS_AS(initialize(bad, small_hp(), 1), InvalidArgument);
}

TEST_CASE("outer_step at the global minimum leaves T in place") {
    Dataset data = small_dataset(5);
    data.Phi.setOnes();
    HyperParams hp = small_hp();
    hp.lambda1 = hp.lambda2 = hp.lambda3 = 0.0;
    auto ts = initialize(data, hp, 1);
    CHECK(ts.trace[0].objective.total == 0.0);
    outer_step(ts, data, hp);
    CHECK(ts.trace.back().objective.total == 0.0);
    CHECK(ts.state.T == data.T_hat);
}

TEST_CASE("accepted steps never increase the frozen-S objective") {
    const Dataset data = small_dataset(6);
    const HyperParams hp = small_hp();
    auto ts = initialize(data, hp, 2);
    for (int it = 0; it < 10; ++it) {
        double phase_start = NAN, phase_last = NAN;
        int steps = 0;
        outer_step(ts, data, hp, [&](const StepEvent& ev) {
            if (steps++ == 0) phase_start = ev.before;
            REQUIRE(ev.after <= ev.before);
            if (!std::isnan(phase_last)) REQUIRE(ev.before == phase_last);
            phase_last = ev.after;
        });
        CHECK(steps == hp.max_inner * 4);
        CHECK(phase_last <= phase_start);
        CHECK(ts.trace.back().objective.total == doctest::Approx(phase_last).epsilon(1e-12));
    }
}

TEST_CASE("run stopping rules") {
    const Dataset data = small_dataset(7);
    HyperParams hp = small_hp();

    hp.max_outer = 0;
    CHECK(run(data, hp, 1).trace.size() == 1);

    hp.max_outer = 50;
    hp.tol = INFINITY;
    CHECK(run(data, hp, 1).trace.size() == 2);

    hp.max_outer = 5;
    hp.tol = 0.0;
    const auto ts = run(data, hp, 1);
    CHECK(export_trace(ts).size() == 6);
    for (size_t r = 0; r < ts.trace.size(); ++r) CHECK(ts.trace[r].iteration == int(r));

    hp.max_outer = 500;
    hp.tol = 1e-3;
    const auto early = run(data, hp, 1);
    CHECK(early.trace.size() < 501);
    const auto& tr = early.trace;
    for (size_t r = tr.size() - 3; r < tr.size(); ++r) {
        CHECK(std::abs(tr[r].objective.total - tr[r - 1].objective.total) <
              1e-3 * std::abs(tr[r - 1].objective.total));
    }
}

TEST_CASE("trace rows equal the objective recomputed on each checkpoint") {
    const Dataset data = small_dataset(8);
    const HyperParams hp = small_hp();
    auto ts = initialize(data, hp, 4);
    for (int it = 0; it < 6; ++it) {
        // checkpoint after the step: parameters plus the graph the step used
        outer_step(ts, data, hp);
        std::vector<ConvRepr> reprs;
        for (const auto& img : data.images) reprs.push_back(conv_forward(img, ts.bank));
        const double total =
            objective_total(ts.state, stack_representations(reprs), ts.pred, ts.graph, hp).total;
        CHECK(std::abs(ts.trace.back().objective.total - total) <= 1e-9);
    }
}

TEST_CASE("run is deterministic") {
    const Dataset data = small_dataset(9);
    HyperParams hp = small_hp();
    hp.max_outer = 15;
    const auto a = run(data, hp, 5);
    const auto b = run(data, hp, 5);
    REQUIRE(a.trace.size() == b.trace.size());
    for (size_t r = 0; r < a.trace.size(); ++r) {
        CHECK(a.trace[r].objective.total == b.trace[r].objective.total);
    }
    CHECK(a.state.T == b.state.T);
    CHECK(a.bank.W == b.bank.W);
}

TEST_CASE("T-only descent reaches the closed-form minimizer") {
    const Dataset data = small_dataset(10);
    HyperParams hp = small_hp();
    hp.lambda2 = hp.lambda3 = 0.0;
    hp.lambda1 = 0.7;
    auto ts = initialize(data, hp, 6);

    Matrix P = ts.pred.U * ts.Y;
    P.colwise() -= ts.pred.b;
    const Matrix& phi = ts.state.Phi;
    const Matrix expect = ((phi.array() * ts.state.T_hat.array() + hp.lambda1 * P.array()) /
                           (phi.array() + hp.lambda1))
                              .matrix();
    for (int it = 0; it < 2000; ++it) {
        ts.state.T -= 0.2 * grad_T(ts.state, ts.Y, ts.pred, ts.graph, hp);
    }
    CHECK((ts.state.T - expect).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("noiseless blocks are completed") {
    const Dataset data = small_dataset(11, 0.3, 0.0);
    HyperParams hp = small_hp();
    const auto ts = run(data, hp, 1);
    int masked = 0, recovered = 0;
    for (Index i = 0; i < data.size(); ++i) {
        for (Index j = 0; j < data.T_hat.rows(); ++j) {
            if (data.Phi(j, i) == 0.0) {
                ++masked;
                recovered += ts.state.T(j, i) > 0.5 ? 1 : 0;
            }
        }
    }
    REQUIRE(masked > 0);
    CHECK(double(recovered) >= 0.95 * masked);
}
