#include <tagcomp/gradcheck.hpp>

#include <algorithm>
#include <cmath>

namespace tagcomp {

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool pooling_is_tie_free(const PatchMatrix& img, const FilterBank& bank, double gap) {
    if (img.count() < 2) return true;
    for (Index k = 0; k < bank.filters(); ++k) {
        double best = -INFINITY, second = -INFINITY;
        for (Index j = 0; j < img.count(); ++j) {
            const double v = apply(bank.g, bank.W.col(k).dot(img.data.col(j)));
            if (v > best) {
                second = best;
                best = v;
            } else if (v > second) {
                second = v;
            }
        }
        if (best - second <= gap) return false;
    }
    return true;
}

Vector flatten(const Matrix& M) {
    return Eigen::Map<const Vector>(M.data(), M.size());
}

Matrix reshape(const Vector& v, Index rows, Index cols) {
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace

GradInstance random_grad_instance(std::mt19937_64& rng, const InstanceLimits& limits) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> tag_value(-1.5, 1.5);
    std::bernoulli_distribution coin(0.5);

    GradInstance inst;
    const int m = uniform_int(rng, 1, limits.max_tags);
    const int n = uniform_int(rng, 2, limits.max_images);
    const int r = uniform_int(rng, 1, limits.max_filters);
    const int d = uniform_int(rng, 1, limits.max_dim);

    inst.hp.nonlinearity = Nonlinearity::tanh;
    inst.hp.filters = r;
    inst.hp.lambda1 = coin(rng) ? 1.0 : 0.1;
    inst.hp.lambda2 = coin(rng) ? 1.0 : 0.1;
    inst.hp.lambda3 = coin(rng) ? 1.0 : 0.1;
    inst.hp.k = uniform_int(rng, 1, n - 1);

    // Redraw filters and patches until pooling has a clear winner everywhere.
    for (;;) {
        inst.bank.g = Nonlinearity::tanh;
        inst.bank.W.resize(d, r);
        for (Index e = 0; e < inst.bank.W.size(); ++e) inst.bank.W.data()[e] = normal(rng);
        inst.images.clear();
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            PatchMatrix img;
            img.data.resize(d, uniform_int(rng, 1, limits.max_patches));
            for (Index e = 0; e < img.data.size(); ++e) img.data.data()[e] = 0.5 * normal(rng);
            ok = pooling_is_tie_free(img, inst.bank, 1e-3);
            inst.images.push_back(std::move(img));
        }
        if (ok) break;
    }
    inst.reprs.clear();
    for (const auto& img : inst.images) inst.reprs.push_back(conv_forward(img, inst.bank));
    inst.Y = stack_representations(inst.reprs);

    inst.state.T.resize(m, n);
    inst.state.T_hat.resize(m, n);
    inst.state.Phi.resize(m, n);
    for (Index e = 0; e < inst.state.T.size(); ++e) {
        double t = 0.0;
        do t = tag_value(rng); while (std::abs(t) <= 1e-2);
        inst.state.T.data()[e] = t;
        inst.state.Phi.data()[e] = coin(rng) ? 1.0 : 0.0;
        inst.state.T_hat.data()[e] = inst.state.Phi.data()[e] * (coin(rng) ? 1.0 : 0.0);
    }
    inst.pred.U.resize(m, r);
    for (Index e = 0; e < inst.pred.U.size(); ++e) inst.pred.U.data()[e] = normal(rng);
    inst.pred.b.resize(m);
    for (Index e = 0; e < m; ++e) inst.pred.b[e] = normal(rng);

    const auto nb = knn_neighbors(inst.Y, inst.hp.k);
    inst.graph = build_similarity(inst.Y, nb, median_gamma(inst.Y, nb));
    return inst;
}

GradCheckResult run_gradient_check(Seed seed, int instances, const InstanceLimits& limits,
                                   double h, double tol) {
    std::mt19937_64 rng(seed);
    GradCheckResult out;
    for (int c = 0; c < instances; ++c) {
        const GradInstance inst = random_grad_instance(rng, limits);
        const auto& hp = inst.hp;
        const Index m = inst.state.tags(), n = inst.state.images();
        const Index r = inst.bank.filters(), d = inst.bank.dim();

        auto f_T = [&](const Vector& x) {
            TagState s = inst.state;
            s.T = reshape(x, m, n);
            return objective_total(s, inst.Y, inst.pred, inst.graph, hp).total;
        };
        auto f_U = [&](const Vector& x) {
            Predictor p = inst.pred;
            p.U = reshape(x, m, r);
            return objective_total(inst.state, inst.Y, p, inst.graph, hp).total;
        };
        auto f_b = [&](const Vector& x) {
            Predictor p = inst.pred;
            p.b = x;
            return objective_total(inst.state, inst.Y, p, inst.graph, hp).total;
        };
        auto f_W = [&](const Vector& x) {
            FilterBank bank = inst.bank;
            bank.W = reshape(x, d, r);
            std::vector<ConvRepr> reprs;
            for (const auto& img : inst.images) reprs.push_back(conv_forward(img, bank));
            return objective_total(inst.state, stack_representations(reprs), inst.pred,
                                   inst.graph, hp)
                .total;
        };

        const Matrix gT = grad_T(inst.state, inst.Y, inst.pred, inst.graph, hp);
        const Matrix gU = grad_U(inst.state, inst.Y, inst.pred, hp);
        const Vector gb = grad_b(inst.state, inst.Y, inst.pred, hp);
        const Matrix gW = grad_W(inst.images, inst.bank, inst.reprs, inst.state, inst.pred, hp);

        const auto rT = finite_difference_check(f_T, flatten(inst.state.T), flatten(gT), h, tol);
        const auto rU = finite_difference_check(f_U, flatten(inst.pred.U), flatten(gU), h, tol);
        const auto rb = finite_difference_check(f_b, inst.pred.b, gb, h, tol);
        const auto rW = finite_difference_check(f_W, flatten(inst.bank.W), flatten(gW), h, tol);

        out.max_rel_T = std::max(out.max_rel_T, rT.max_rel_err);
        out.max_rel_U = std::max(out.max_rel_U, rU.max_rel_err);
        out.max_rel_b = std::max(out.max_rel_b, rb.max_rel_err);
        out.max_rel_W = std::max(out.max_rel_W, rW.max_rel_err);
        out.pass = out.pass && rT.pass && rU.pass && rb.pass && rW.pass;
        ++out.instances;
    }
    return out;
}

}  // namespace tagcomp
