#include <tagcomp/error.hpp>
#include <tagcomp/gradients.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace tagcomp {

Matrix grad_T(const TagState& state, const Matrix& Y, const Predictor& pred,
              const SimilarityGraph& graph, const HyperParams& hp) {
    if (graph.size() != state.images()) {
        throw InvalidArgument("grad_T: graph size does not match image count");
    }
    const Matrix residual = prediction_residual(state, Y, pred);
    if (state.T_hat.rows() != state.tags() || state.T_hat.cols() != state.images() ||
        state.Phi.rows() != state.tags() || state.Phi.cols() != state.images()) {
        throw InvalidArgument("grad_T: tag matrices differ in shape");
    }

    Matrix g = 2.0 * (state.Phi.array() * (state.T - state.T_hat).array()).matrix();
    g += (2.0 * hp.lambda1) * residual;

    if (hp.lambda2 != 0.0) {
        const double c = 2.0 * hp.lambda2;
        for (Index i = 0; i < graph.size(); ++i) {
            const auto& nb = graph.neighbors[static_cast<size_t>(i)];
            const auto& w = graph.weights[static_cast<size_t>(i)];
            for (size_t p = 0; p < nb.size(); ++p) {
                const Index j = nb[p];
                const Vector diff = state.T.col(i) - state.T.col(j);
                g.col(i) += (c * w[p]) * diff;
                // S(i, j) also enters t_j's gradient through the pair term.
                if (!hp.one_sided_smoothness) g.col(j) -= (c * w[p]) * diff;
            }
        }
    }

    if (hp.lambda3 != 0.0) {
        const double e2 = hp.epsilon_l1 * hp.epsilon_l1;
        g.array() += hp.lambda3 * state.T.array() / (state.T.array().square() + e2).sqrt();
    }
    return g;
}

Matrix grad_U(const TagState& state, const Matrix& Y, const Predictor& pred,
              const HyperParams& hp) {
    if (hp.lambda1 == 0.0) return Matrix::Zero(pred.U.rows(), pred.U.cols());
    return (-2.0 * hp.lambda1) * prediction_residual(state, Y, pred) * Y.transpose();
}

Vector grad_b(const TagState& state, const Matrix& Y, const Predictor& pred,
              const HyperParams& hp) {
    if (hp.lambda1 == 0.0) return Vector::Zero(pred.b.size());
    return (2.0 * hp.lambda1) * prediction_residual(state, Y, pred).rowwise().sum();
}

Matrix stack_representations(const std::vector<ConvRepr>& reprs) {
    if (reprs.empty()) return Matrix();
    const Index r = reprs.front().y.size();
    Matrix Y(r, static_cast<Index>(reprs.size()));
    for (size_t i = 0; i < reprs.size(); ++i) {
        if (reprs[i].y.size() != r) {
            throw InvalidArgument("representations differ in length");
        }
        Y.col(Index(i)) = reprs[i].y;
    }
    return Y;
}

Matrix grad_W(const std::vector<PatchMatrix>& patches, const FilterBank& bank,
              const std::vector<ConvRepr>& reprs, const TagState& state,
              const Predictor& pred, const HyperParams& hp) {
    const Index n = state.images();
    if (static_cast<Index>(reprs.size()) != n || static_cast<Index>(patches.size()) != n) {
        throw InvalidArgument("grad_W: representations are stale (expected " +
                              std::to_string(n) + " images)");
    }
    Matrix g = Matrix::Zero(bank.dim(), bank.filters());
    if (hp.lambda1 == 0.0) return g;

    const Matrix Y = stack_representations(reprs);
    const Matrix residual = prediction_residual(state, Y, pred);
    for (Index i = 0; i < n; ++i) {
        const Vector upstream = (-2.0 * hp.lambda1) * (pred.U.transpose() * residual.col(i));
        g += filter_gradient(patches[size_t(i)], bank, reprs[size_t(i)], upstream);
    }
    return g;
}

FdReport finite_difference_check(const std::function<double(const Vector&)>& f,
                                 const Vector& x0, const Vector& analytic, double h,
                                 double tol, double scale_floor) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("step h must be positive");
    if (analytic.size() != x0.size()) {
        throw InvalidArgument("analytic gradient length does not match x0");
    }
    FdReport report;
    Vector x = x0;
    for (Index j = 0; j < x0.size(); ++j) {
        x[j] = x0[j] + h;
        const double fp = f(x);
        x[j] = x0[j] - h;
        const double fm = f(x);
        x[j] = x0[j];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw InvalidArgument("non-finite function value at coordinate " +
                                  std::to_string(j));
        }
        const double numeric = (fp - fm) / (2.0 * h);
        const double scale =
            std::max({std::abs(analytic[j]), std::abs(numeric), scale_floor});
        const double rel = std::abs(analytic[j] - numeric) / scale;
        if (rel > report.max_rel_err || report.worst_index < 0) {
            report.max_rel_err = std::max(report.max_rel_err, rel);
            report.worst_index = j;
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

}  // namespace tagcomp
