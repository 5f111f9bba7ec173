#pragma once

#include <tagcomp/types.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace tagcomp {

// Per-image patch features, one column per patch (d x n_I).
struct PatchMatrix {
    Matrix data;
    std::string image_id;

    Index dim() const { return data.rows(); }
    Index count() const { return data.cols(); }
};

enum class Nonlinearity { tanh, relu, identity };

std::string_view to_string(Nonlinearity g);
Nonlinearity parse_nonlinearity(std::string_view name);

double apply(Nonlinearity g, double z);
// Derivative of g at z. relu uses sub-derivative 0 at z = 0.
double derivative(Nonlinearity g, double z);

// Filter matrix W (d x r); column k is filter k.
struct FilterBank {
    Matrix W;
    Nonlinearity g = Nonlinearity::tanh;

    Index dim() const { return W.rows(); }
    Index filters() const { return W.cols(); }
};

// Max-pooled response per filter, with the winning patch index for each.
struct ConvRepr {
    Vector y;
    std::vector<Index> argmax_patch;
};

// Slides a window x window box over a grayscale raster in row-major order.
// Each column is the window's pixels flattened row-major (d = window^2).
PatchMatrix extract_patches(const Matrix& image, int window, int stride,
                            std::string image_id = {});

// Scales raster pixels into [0, 1]. Values already in range are kept; larger
// rasters (e.g. 0..255 grayscale) are divided by their maximum.
Matrix normalize_pixels(const Matrix& image);

// y[k] = max_j g(w_k . x_j); ties go to the smallest patch index.
ConvRepr conv_forward(const PatchMatrix& patches, const FilterBank& bank);

// d x r matrix whose column k is upstream[k] * g'(w_k . x_j*) * x_j*,
// the chain rule through the pooled patch j* recorded in `repr`.
Matrix filter_gradient(const PatchMatrix& patches, const FilterBank& bank,
                       const ConvRepr& repr, const Vector& upstream);

}  // namespace tagcomp
