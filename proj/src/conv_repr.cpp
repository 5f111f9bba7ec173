#include <tagcomp/conv_repr.hpp>
#include <tagcomp/error.hpp>

#include <cmath>
#include <string>

namespace tagcomp {

std::string_view to_string(Nonlinearity g) {
    switch (g) {
        case Nonlinearity::tanh: return "tanh";
        case Nonlinearity::relu: return "relu";
        case Nonlinearity::identity: return "identity";
    }
    return "unknown";
}

Nonlinearity parse_nonlinearity(std::string_view name) {
    if (name == "tanh") return Nonlinearity::tanh;
    if (name == "relu") return Nonlinearity::relu;
    if (name == "identity") return Nonlinearity::identity;
    throw InvalidArgument("unknown nonlinearity '" + std::string(name) +
                          "' (expected tanh, relu or identity)");
}

double apply(Nonlinearity g, double z) {
    switch (g) {
        case Nonlinearity::tanh: return std::tanh(z);
        case Nonlinearity::relu: return z > 0.0 ? z : 0.0;
        case Nonlinearity::identity: return z;
    }
    return z;
}

double derivative(Nonlinearity g, double z) {
    switch (g) {
        case Nonlinearity::tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Nonlinearity::relu: return z > 0.0 ? 1.0 : 0.0;
        case Nonlinearity::identity: return 1.0;
    }
    return 1.0;
}

PatchMatrix extract_patches(const Matrix& image, int window, int stride,
                            std::string image_id) {
    if (image.rows() == 0 || image.cols() == 0) {
        throw InvalidArgument("empty image");
    }
    if (window < 1 || stride < 1) {
        throw InvalidArgument("patch window and stride must be positive");
    }
    if (window > image.rows() || window > image.cols()) {
        throw InvalidArgument("patch window exceeds image");
    }
    const Index rows_out = (image.rows() - window) / stride + 1;
    const Index cols_out = (image.cols() - window) / stride + 1;

    PatchMatrix out;
    out.image_id = std::move(image_id);
    out.data.resize(Index(window) * window, rows_out * cols_out);
    Index col = 0;
    for (Index pr = 0; pr < rows_out; ++pr) {
        for (Index pc = 0; pc < cols_out; ++pc, ++col) {
            Index row = 0;
            for (Index a = 0; a < window; ++a) {
                for (Index b = 0; b < window; ++b, ++row) {
                    out.data(row, col) = image(pr * stride + a, pc * stride + b);
                }
            }
        }
    }
    return out;
}

Matrix normalize_pixels(const Matrix& image) {
    if (image.size() == 0) throw InvalidArgument("empty image");
    if (!image.allFinite()) throw InvalidArgument("image has non-finite pixels");
    if (image.minCoeff() < 0.0) {
        throw InvalidArgument("image has negative pixel values");
    }
    const double hi = image.maxCoeff();
    if (hi <= 1.0) return image;
    return image / hi;
}

ConvRepr conv_forward(const PatchMatrix& patches, const FilterBank& bank) {
    if (patches.dim() != bank.dim()) {
        throw InvalidArgument("patch dimension " + std::to_string(patches.dim()) +
                              " does not match filter dimension " +
                              std::to_string(bank.dim()));
    }
    if (patches.count() < 1) throw InvalidArgument("image has no patches");

    // Per-pair dot products rather than one GEMM, so y[k] is bitwise equal to
    // g(w_k . x_j*) recomputed by a caller.
    ConvRepr out;
    out.y.resize(bank.filters());
    out.argmax_patch.assign(static_cast<size_t>(bank.filters()), 0);
    for (Index k = 0; k < bank.filters(); ++k) {
        const auto w = bank.W.col(k);
        double best = apply(bank.g, w.dot(patches.data.col(0)));
        Index best_j = 0;
        for (Index j = 1; j < patches.count(); ++j) {
            const double v = apply(bank.g, w.dot(patches.data.col(j)));
            if (v > best) {
                best = v;
                best_j = j;
            }
        }
        out.y[k] = best;
        out.argmax_patch[static_cast<size_t>(k)] = best_j;
    }
    return out;
}

Matrix filter_gradient(const PatchMatrix& patches, const FilterBank& bank,
                       const ConvRepr& repr, const Vector& upstream) {
    const Index r = bank.filters();
    if (patches.dim() != bank.dim() || repr.y.size() != r ||
        static_cast<Index>(repr.argmax_patch.size()) != r || upstream.size() != r) {
        throw InvalidArgument("filter_gradient: shape mismatch");
    }
    Matrix grad = Matrix::Zero(bank.dim(), r);
    for (Index k = 0; k < r; ++k) {
        if (upstream[k] == 0.0) continue;
        const Index j = repr.argmax_patch[static_cast<size_t>(k)];
        if (j < 0 || j >= patches.count()) {
            throw InvalidArgument("filter_gradient: stale argmax index");
        }
        const auto x = patches.data.col(j);
        const double z = bank.W.col(k).dot(x);
        grad.col(k) = (upstream[k] * derivative(bank.g, z)) * x;
    }
    return grad;
}

}  // namespace tagcomp
