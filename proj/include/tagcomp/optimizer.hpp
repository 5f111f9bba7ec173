#pragma once

#include <tagcomp/conv_repr.hpp>
#include <tagcomp/objective.hpp>
#include <tagcomp/similarity_graph.hpp>
#include <tagcomp/types.hpp>

#include <functional>
#include <string_view>
#include <vector>

namespace tagcomp {

// Patch matrices for n images plus the partially observed m x n tag matrix.
struct Dataset {
    std::vector<PatchMatrix> images;
    Matrix T_hat;
    Matrix Phi;

    Index size() const { return static_cast<Index>(images.size()); }
    // Throws InvalidArgument when shapes disagree or entries are not binary.
    void validate() const;
};

struct TraceRow {
    int iteration = 0;
    ObjectiveBreakdown objective;
};

struct TrainState {
    TagState state;
    Predictor pred;
    FilterBank bank;
    std::vector<ConvRepr> reprs;
    Matrix Y;  // r x n, consistent with bank at the last refresh
    SimilarityGraph graph;
    std::vector<TraceRow> trace;
    int outer_iterations = 0;
};

enum class Block { T, U, b, W };
std::string_view to_string(Block block);

// One accepted (or rejected) variable update inside a frozen-S phase.
struct StepEvent {
    int outer = 0;
    int inner = 0;
    Block block = Block::T;
    double before = 0.0;
    double after = 0.0;
    int halvings = 0;
    bool accepted = false;
};
using StepObserver = std::function<void(const StepEvent&)>;

// Draws W ~ N(0, 1/d), fills masked entries of T with each tag's observed
// frequency, fits (U, b) by ridge regression on the initial representation,
// builds the graph and records trace row 0.
TrainState initialize(const Dataset& data, const HyperParams& hp, Seed seed);

// Recomputes Y and the graph, then runs hp.max_inner rounds of backtracked
// gradient steps on T, U, b, W with S held fixed, and appends a trace row.
void outer_step(TrainState& ts, const Dataset& data, const HyperParams& hp,
                const StepObserver& observer = {});

// initialize + outer_step until hp.max_outer steps or the relative objective
// change stays below hp.tol for three consecutive steps.
TrainState run(const Dataset& data, const HyperParams& hp, Seed seed,
               const StepObserver& observer = {});

// Current frozen-S objective of a train state.
ObjectiveBreakdown evaluate(const TrainState& ts, const HyperParams& hp);

// Recomputes representations for all images from the current bank.
void refresh_representations(TrainState& ts, const Dataset& data);
// Rebuilds neighbors and S from the current Y.
void refresh_graph(TrainState& ts, const HyperParams& hp);

const std::vector<TraceRow>& export_trace(const TrainState& ts);

}  // namespace tagcomp
