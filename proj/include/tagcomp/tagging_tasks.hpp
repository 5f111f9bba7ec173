#pragma once

#include <tagcomp/conv_repr.hpp>
#include <tagcomp/objective.hpp>
#include <tagcomp/optimizer.hpp>
#include <tagcomp/types.hpp>

#include <optional>
#include <string>
#include <vector>

namespace tagcomp {

struct MaskResult {
    Matrix T_hat;
    Matrix Phi;
    Index masked = 0;
    // Tags / images left with no observed positive (allowed, reported).
    std::vector<Index> rows_without_positives;
    std::vector<Index> cols_without_positives;
};

// Hides floor(rho * #positives) positive entries chosen uniformly at random.
// Negative entries always stay observed.
MaskResult mask_generate(const Matrix& T_full, double rho, Seed seed);

// Indices of the K largest scores, descending, ties to the smaller index.
std::vector<Index> annotate_topk(const Vector& scores, int K);

// All indices ranked by score, descending, ties to the smaller index.
std::vector<Index> retrieve(const Vector& scores);

double precision_at_k(const std::vector<Index>& predicted, const std::vector<Index>& truth,
                      int K);

// Fraction of relevant items ranked above the first non-relevant one.
// nullopt when no relevant item exists (undefined query).
std::optional<double> pos_at_top(const std::vector<Index>& ranking,
                                 const std::vector<Index>& relevant);

struct EvalReport {
    std::string metric;
    std::vector<double> per_fold;
    double mean = 0.0;
    int K = 0;
    double rho = 0.0;
    Seed seed = 0;
};

struct CrossValidation {
    EvalReport precision;
    EvalReport pos_at_top;
    std::vector<int> fold_of;  // fold index per image
};

// Seeded assignment of n images to `folds` groups whose sizes differ by <= 1.
std::vector<int> fold_assignment(Index n, int folds, Seed seed);

// Each fold: test images fully masked, training images rho-masked, the
// optimizer completes T, then Precision@K over test images and Pos@Top over
// tag queries ranking the test images.
CrossValidation cross_validate(const std::vector<PatchMatrix>& images, const Matrix& T_full,
                               int folds, double rho, const HyperParams& hp, Seed seed,
                               int K = 5);

struct SynthParams {
    int images = 50;
    int tags = 10;
    int dim = 16;
    int patches_per_image = 4;
    int clusters = 3;
    double noise = 0.1;
    Seed seed = 42;
};

struct SynthData {
    std::vector<PatchMatrix> images;
    Matrix T_full;                // m x n binary
    std::vector<int> cluster_of;  // per image
    Matrix centers;               // dim x clusters
};

// Tags implied by a cluster: a cyclic run of max(5, ceil(m / C)) tags
// (capped at m) starting at c * floor(m / C).
std::vector<Index> cluster_tags(int cluster, int tags, int clusters);

SynthData synth_dataset(const SynthParams& p);

}  // namespace tagcomp
