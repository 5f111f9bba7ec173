#include <tagcomp/error.hpp>
#include <tagcomp/similarity_graph.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace tagcomp {

namespace {

double squared_distance(const Matrix& Y, Index a, Index b) {
    return (Y.col(a) - Y.col(b)).squaredNorm();
}

}  // namespace

Matrix SimilarityGraph::dense() const {
    const Index n = size();
    Matrix S = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        const auto& nb = neighbors[static_cast<size_t>(i)];
        const auto& w = weights[static_cast<size_t>(i)];
        for (size_t p = 0; p < nb.size(); ++p) S(i, nb[p]) = w[p];
    }
    return S;
}

NeighborLists knn_neighbors(const Matrix& Y, int k) {
    const Index n = Y.cols();
    if (n < 2) throw InvalidArgument("need at least two images");
    if (k < 1) throw InvalidArgument("k must be at least 1");
    const size_t keep = static_cast<size_t>(std::min<Index>(k, n - 1));

    NeighborLists out(static_cast<size_t>(n));
    std::vector<std::pair<double, Index>> cand;
    cand.reserve(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
        cand.clear();
        for (Index j = 0; j < n; ++j) {
            if (j != i) cand.emplace_back(squared_distance(Y, i, j), j);
        }
        // pair ordering breaks distance ties by index
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep),
                          cand.end());
        auto& nb = out[static_cast<size_t>(i)];
        nb.reserve(keep);
        for (size_t p = 0; p < keep; ++p) nb.push_back(cand[p].second);
    }
    return out;
}

double median_gamma(const Matrix& Y, const NeighborLists& neighbors) {
    std::vector<double> d2;
    for (size_t i = 0; i < neighbors.size(); ++i) {
        for (Index j : neighbors[i]) d2.push_back(squared_distance(Y, Index(i), j));
    }
    if (d2.empty()) return 1.0;
    std::sort(d2.begin(), d2.end());
    const size_t mid = d2.size() / 2;
    const double median = d2.size() % 2 ? d2[mid] : 0.5 * (d2[mid - 1] + d2[mid]);
    if (!(median > 0.0) || !std::isfinite(1.0 / median)) return 1.0;
    return 1.0 / median;
}

SimilarityGraph build_similarity(const Matrix& Y, const NeighborLists& neighbors,
                                 double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw InvalidArgument("gamma must be a positive finite number");
    }
    if (static_cast<Index>(neighbors.size()) != Y.cols()) {
        throw InvalidArgument("neighbor lists do not match the number of images");
    }
    SimilarityGraph g;
    g.neighbors = neighbors;
    g.gamma = gamma;
    g.weights.resize(neighbors.size());
    size_t kmax = 0;
    for (size_t i = 0; i < neighbors.size(); ++i) {
        const auto& nb = neighbors[i];
        kmax = std::max(kmax, nb.size());
        auto& w = g.weights[i];
        w.resize(nb.size());
        if (nb.empty()) continue;

        // Shift by the smallest distance before exponentiating; the ratio is
        // unchanged and the normalizer stays >= 1.
        double dmin = std::numeric_limits<double>::infinity();
        for (size_t p = 0; p < nb.size(); ++p) {
            if (nb[p] < 0 || nb[p] >= Y.cols() || nb[p] == Index(i)) {
                throw InvalidArgument("invalid neighbor index for image " +
                                      std::to_string(i));
            }
            w[p] = squared_distance(Y, Index(i), nb[p]);
            dmin = std::min(dmin, w[p]);
        }
        double total = 0.0;
        for (double& v : w) {
            v = std::exp(-gamma * (v - dmin));
            total += v;
        }
        if (!(total > 0.0) || !std::isfinite(total)) {
            std::fill(w.begin(), w.end(), 1.0 / double(nb.size()));
            continue;
        }
        for (double& v : w) v /= total;
    }
    g.k = static_cast<int>(kmax);
    return g;
}

}  // namespace tagcomp
