#include <tagcomp/error.hpp>
#include <tagcomp/gradients.hpp>
#include <tagcomp/optimizer.hpp>

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace tagcomp {

namespace {

constexpr int kMaxHalvings = 20;
constexpr int kPatience = 3;
constexpr double kRidge = 1e-3;

bool is_binary(const Matrix& M) {
    return ((M.array() == 0.0) || (M.array() == 1.0)).all();
}

std::vector<ConvRepr> forward_all(const Dataset& data, const FilterBank& bank) {
    std::vector<ConvRepr> reprs;
    reprs.reserve(data.images.size());
    for (const auto& img : data.images) reprs.push_back(conv_forward(img, bank));
    return reprs;
}

void require_finite(const ObjectiveBreakdown& o, std::string_view where) {
    if (!std::isfinite(o.total)) {
        throw DivergenceError("diverged (reduce eta): objective is not finite after " +
                              std::string(where));
    }
}

}  // namespace

std::string_view to_string(Block block) {
    switch (block) {
        case Block::T: return "T";
        case Block::U: return "U";
        case Block::b: return "b";
        case Block::W: return "W";
    }
    return "?";
}

void Dataset::validate() const {
    if (images.empty()) throw InvalidArgument("empty dataset");
    const Index n = size();
    if (T_hat.cols() != n || Phi.cols() != n) {
        throw InvalidArgument("tag matrix has " + std::to_string(T_hat.cols()) +
                              " images but the dataset has " + std::to_string(n));
    }
    if (T_hat.rows() != Phi.rows() || T_hat.rows() < 1) {
        throw InvalidArgument("tag matrix and mask differ in shape");
    }
    if (!is_binary(T_hat) || !is_binary(Phi)) {
        throw InvalidArgument("observed tags and mask must be binary");
    }
    const Index d = images.front().dim();
    if (d < 1) throw InvalidArgument("patch dimension must be positive");
    for (const auto& img : images) {
        if (img.dim() != d) {
            throw InvalidArgument("image '" + img.image_id + "' has patch dimension " +
                                  std::to_string(img.dim()) + ", expected " +
                                  std::to_string(d));
        }
        if (img.count() < 1) throw InvalidArgument("image '" + img.image_id + "' has no patches");
        if (!img.data.allFinite()) {
            throw InvalidArgument("image '" + img.image_id + "' has non-finite features");
        }
    }
}

ObjectiveBreakdown evaluate(const TrainState& ts, const HyperParams& hp) {
    return objective_total(ts.state, ts.Y, ts.pred, ts.graph, hp);
}

void refresh_representations(TrainState& ts, const Dataset& data) {
    ts.reprs = forward_all(data, ts.bank);
    ts.Y = stack_representations(ts.reprs);
}

void refresh_graph(TrainState& ts, const HyperParams& hp) {
    const auto neighbors = knn_neighbors(ts.Y, hp.k);
    const double gamma = hp.gamma ? *hp.gamma : median_gamma(ts.Y, neighbors);
    ts.graph = build_similarity(ts.Y, neighbors, gamma);
    ts.graph.k = hp.k;
}

TrainState initialize(const Dataset& data, const HyperParams& hp, Seed seed) {
    hp.validate();
    data.validate();
    if ((data.Phi.array() != 0.0).count() == 0) throw InvalidArgument("nothing observed");
    if (data.size() < 2) throw InvalidArgument("need at least two images");

    const Index d = data.images.front().dim();
    const Index r = hp.filters;
    const Index m = data.T_hat.rows();
    const Index n = data.size();

    TrainState ts;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / double(d)));
    ts.bank.g = hp.nonlinearity;
    ts.bank.W.resize(d, r);
    for (Index c = 0; c < r; ++c) {
        for (Index row = 0; row < d; ++row) ts.bank.W(row, c) = normal(rng);
    }
    refresh_representations(ts, data);

    // Masked entries start at the tag's observed frequency; tags never
    // observed fall back to the frequency over all observed entries.
    ts.state.T_hat = data.T_hat.cwiseProduct(data.Phi);
    ts.state.Phi = data.Phi;
    ts.state.T = ts.state.T_hat;
    const double global_freq = ts.state.T_hat.sum() / data.Phi.sum();
    for (Index j = 0; j < m; ++j) {
        const double seen = data.Phi.row(j).sum();
        const double freq = seen > 0.0 ? ts.state.T_hat.row(j).sum() / seen : global_freq;
        for (Index i = 0; i < n; ++i) {
            if (data.Phi(j, i) == 0.0) ts.state.T(j, i) = freq;
        }
    }

    // Ridge fit of t ~ U y - b: regress T on [Y; -1].
    Matrix Z(r + 1, n);
    Z.topRows(r) = ts.Y;
    Z.row(r).setConstant(-1.0);
    Matrix A = Z * Z.transpose();
    A.diagonal().array() += kRidge;
    const Matrix theta = A.ldlt().solve(Z * ts.state.T.transpose());  // (r+1) x m
    ts.pred.U = theta.topRows(r).transpose();
    ts.pred.b = theta.row(r).transpose();
    if (!ts.pred.U.allFinite() || !ts.pred.b.allFinite()) {
        ts.pred.U.setZero();
        ts.pred.b.setZero();
    }

    refresh_graph(ts, hp);
    const auto obj = evaluate(ts, hp);
    require_finite(obj, "initialization");
    ts.trace.push_back({0, obj});
    return ts;
}

namespace {

// Gradient step on one block with backtracking against the frozen-S
// objective. Leaves the block unchanged when no trial step is non-increasing.
void step_block(TrainState& ts, const Dataset& data, const HyperParams& hp, Block block,
                double& current, StepEvent& ev) {
    ev.block = block;
    ev.before = current;
    ev.after = current;
    ev.halvings = 0;
    ev.accepted = false;

    Matrix grad;
    switch (block) {
        case Block::T: grad = grad_T(ts.state, ts.Y, ts.pred, ts.graph, hp); break;
        case Block::U: grad = grad_U(ts.state, ts.Y, ts.pred, hp); break;
        case Block::b: grad = grad_b(ts.state, ts.Y, ts.pred, hp); break;
        case Block::W:
            grad = grad_W(data.images, ts.bank, ts.reprs, ts.state, ts.pred, hp);
            break;
    }
    if (!grad.allFinite()) {
        throw DivergenceError("diverged (reduce eta): non-finite gradient for block " +
                              std::string(to_string(block)));
    }
    if (grad.isZero(0.0)) {
        ev.accepted = true;
        return;
    }

    double step = hp.eta;
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
        ObjectiveBreakdown obj;
        switch (block) {
            case Block::T: {
                TagState cand = ts.state;
                cand.T -= step * grad;
                obj = objective_total(cand, ts.Y, ts.pred, ts.graph, hp);
                if (std::isfinite(obj.total) && obj.total <= current) ts.state.T = cand.T;
                break;
            }
            case Block::U: {
                Predictor cand = ts.pred;
                cand.U -= step * grad;
                obj = objective_total(ts.state, ts.Y, cand, ts.graph, hp);
                if (std::isfinite(obj.total) && obj.total <= current) ts.pred.U = cand.U;
                break;
            }
            case Block::b: {
                Predictor cand = ts.pred;
                cand.b -= step * grad.col(0);
                obj = objective_total(ts.state, ts.Y, cand, ts.graph, hp);
                if (std::isfinite(obj.total) && obj.total <= current) ts.pred.b = cand.b;
                break;
            }
            case Block::W: {
                FilterBank cand = ts.bank;
                cand.W -= step * grad;
                auto reprs = forward_all(data, cand);
                Matrix Y = stack_representations(reprs);
                obj = objective_total(ts.state, Y, ts.pred, ts.graph, hp);
                if (std::isfinite(obj.total) && obj.total <= current) {
                    ts.bank = std::move(cand);
                    ts.reprs = std::move(reprs);
                    ts.Y = std::move(Y);
                }
                break;
            }
        }
        if (std::isfinite(obj.total) && obj.total <= current) {
            current = obj.total;
            ev.after = current;
            ev.halvings = h;
            ev.accepted = true;
            return;
        }
    }
    ev.halvings = kMaxHalvings;
}

}  // namespace

void outer_step(TrainState& ts, const Dataset& data, const HyperParams& hp,
                const StepObserver& observer) {
    hp.validate();
    refresh_representations(ts, data);
    refresh_graph(ts, hp);

    const int outer = ts.outer_iterations + 1;
    auto obj = evaluate(ts, hp);
    require_finite(obj, "similarity refresh");
    double current = obj.total;

    for (int inner = 0; inner < hp.max_inner; ++inner) {
        for (Block block : {Block::T, Block::U, Block::b, Block::W}) {
            StepEvent ev;
            ev.outer = outer;
            ev.inner = inner;
            step_block(ts, data, hp, block, current, ev);
            if (observer) observer(ev);
        }
    }

    obj = evaluate(ts, hp);
    require_finite(obj, "outer iteration " + std::to_string(outer));
    ts.outer_iterations = outer;
    ts.trace.push_back({outer, obj});
}

TrainState run(const Dataset& data, const HyperParams& hp, Seed seed,
               const StepObserver& observer) {
    TrainState ts = initialize(data, hp, seed);
    int calm = 0;
    for (int it = 0; it < hp.max_outer; ++it) {
        const double prev = ts.trace.back().objective.total;
        outer_step(ts, data, hp, observer);
        if (!std::isfinite(hp.tol)) break;
        const double now = ts.trace.back().objective.total;
        const double rel =
            std::abs(now - prev) / std::max(std::abs(prev), std::numeric_limits<double>::min());
        calm = rel < hp.tol ? calm + 1 : 0;
        if (calm >= kPatience) break;
    }
    return ts;
}

const std::vector<TraceRow>& export_trace(const TrainState& ts) { return ts.trace; }

}  // namespace tagcomp
