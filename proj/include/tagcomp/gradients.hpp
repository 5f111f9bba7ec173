#pragma once

#include <tagcomp/conv_repr.hpp>
#include <tagcomp/objective.hpp>
#include <tagcomp/similarity_graph.hpp>
#include <tagcomp/types.hpp>

#include <functional>
#include <vector>

namespace tagcomp {

// All gradients treat S as fixed: no gradient flows through the similarity
// weights or the neighbor lists.

// m x n. With hp.one_sided_smoothness the smoothness part keeps only the
// S(i, i') half; otherwise it is 2 lambda2 sum_i' (S(i,i') + S(i',i))(t_i - t_i').
Matrix grad_T(const TagState& state, const Matrix& Y, const Predictor& pred,
              const SimilarityGraph& graph, const HyperParams& hp);

// -2 lambda1 sum_i (t_i - U y_i + b) y_i^T
Matrix grad_U(const TagState& state, const Matrix& Y, const Predictor& pred,
              const HyperParams& hp);

// 2 lambda1 sum_i (t_i - U y_i + b)
Vector grad_b(const TagState& state, const Matrix& Y, const Predictor& pred,
              const HyperParams& hp);

// Sum over images of the chain rule through each image's pooled patches.
// `reprs` must be the current conv_forward outputs, one per image.
Matrix grad_W(const std::vector<PatchMatrix>& patches, const FilterBank& bank,
              const std::vector<ConvRepr>& reprs, const TagState& state,
              const Predictor& pred, const HyperParams& hp);

// Y matrix (r x n) assembled from per-image representations.
Matrix stack_representations(const std::vector<ConvRepr>& reprs);

struct FdReport {
    double max_rel_err = 0.0;
    Index worst_index = -1;
    bool pass = true;
};

// Central differences of f around x0, compared coordinate-wise against
// `analytic`. Relative error is |a - n| / max(|a|, |n|, scale_floor).
FdReport finite_difference_check(const std::function<double(const Vector&)>& f,
                                 const Vector& x0, const Vector& analytic, double h,
                                 double tol, double scale_floor = 1e-8);

}  // namespace tagcomp
