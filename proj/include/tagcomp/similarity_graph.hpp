#pragma once

#include <tagcomp/types.hpp>

#include <vector>

namespace tagcomp {

using NeighborLists = std::vector<std::vector<Index>>;

// Row-normalized Gaussian weights over each image's k nearest neighbors.
// weights[i][p] is S(i, neighbors[i][p]); pairs outside the lists are zero.
// S is not symmetric in general.
struct SimilarityGraph {
    NeighborLists neighbors;
    std::vector<std::vector<double>> weights;
    double gamma = 1.0;
    int k = 0;

    Index size() const { return static_cast<Index>(neighbors.size()); }

    // Dense n x n view, mostly for tests and diagnostics.
    Matrix dense() const;
};

// For each column i of Y (r x n), the min(k, n-1) other columns closest in
// squared Euclidean distance, nearest first, ties to the smaller index.
NeighborLists knn_neighbors(const Matrix& Y, int k);

// Bandwidth from the median heuristic: 1 / median of squared distances over
// all stored neighbor pairs. Falls back to 1 when that median is zero.
double median_gamma(const Matrix& Y, const NeighborLists& neighbors);

SimilarityGraph build_similarity(const Matrix& Y, const NeighborLists& neighbors,
                                 double gamma);

}  // namespace tagcomp
