#pragma once

#include <tagcomp/gradients.hpp>
#include <tagcomp/objective.hpp>
#include <tagcomp/types.hpp>

#include <random>
#include <vector>

namespace tagcomp {

// A random problem small enough for coordinate-wise finite differences.
struct GradInstance {
    std::vector<PatchMatrix> images;
    FilterBank bank;
    std::vector<ConvRepr> reprs;
    Matrix Y;
    TagState state;
    Predictor pred;
    SimilarityGraph graph;
    HyperParams hp;
};

struct InstanceLimits {
    int max_tags = 6;
    int max_images = 6;
    int max_filters = 5;
    int max_dim = 5;
    int max_patches = 4;
};

// Draws an instance with tanh filters, lambdas in {0.1, 1}, |t_ji| > 1e-2 and
// a top-2 pooling gap above 1e-3 for every image and filter.
GradInstance random_grad_instance(std::mt19937_64& rng, const InstanceLimits& limits = {});

struct GradCheckResult {
    int instances = 0;
    double max_rel_T = 0.0;
    double max_rel_U = 0.0;
    double max_rel_b = 0.0;
    double max_rel_W = 0.0;
    bool pass = true;
};

// Compares grad_T/U/b/W against central differences of the frozen-S objective
// over `instances` seeded random problems.
GradCheckResult run_gradient_check(Seed seed, int instances, const InstanceLimits& limits = {},
                                   double h = 1e-5, double tol = 1e-4);

}  // namespace tagcomp
