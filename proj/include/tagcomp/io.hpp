#pragma once

#include <tagcomp/conv_repr.hpp>
#include <tagcomp/objective.hpp>
#include <tagcomp/optimizer.hpp>
#include <tagcomp/types.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tagcomp::io {

// Text formats. Lines starting with '#' and blank lines are skipped by every
// reader. Indices on disk are 0-based. Doubles are written in shortest
// round-trip form, so write -> read is exact.

// "rows cols" header, then `rows` lines of `cols` numbers.
Matrix read_matrix(const std::filesystem::path& path);
Matrix parse_matrix(std::istream& in, const std::string& origin);
void write_matrix(const std::filesystem::path& path, const Matrix& M);
void format_matrix(std::ostream& out, const Matrix& M);

// "m n" header, then "j i v" lines declaring observed entries (v in {0,1}).
struct TagFile {
    Matrix T_hat;
    Matrix Phi;
};
TagFile read_tags(const std::filesystem::path& path);
TagFile parse_tags(std::istream& in, const std::string& origin);
void write_tags(const std::filesystem::path& path, const Matrix& T_hat, const Matrix& Phi);
// Every entry observed.
void write_full_tags(const std::filesystem::path& path, const Matrix& T_full);

// "key value" lines; unknown keys are an error.
HyperParams read_config(const std::filesystem::path& path);
HyperParams parse_config(std::istream& in, const std::string& origin);
void write_config(const std::filesystem::path& path, const HyperParams& hp);
void format_config(std::ostream& out, const HyperParams& hp);
// Applies one key; throws InvalidArgument for unknown keys or bad values.
void set_config_value(HyperParams& hp, const std::string& key, const std::string& value);

struct Model {
    FilterBank bank;
    Predictor pred;
    HyperParams hp;
};
// Sections [W], [U], [b] (m x 1 matrix) and [hyper].
void save_model(const std::filesystem::path& path, const FilterBank& bank,
                const Predictor& pred, const HyperParams& hp);
Model load_model(const std::filesystem::path& path);

enum class ImageKind { patches, raster };

struct ManifestEntry {
    std::string image_id;
    std::filesystem::path path;  // relative paths resolve against the manifest
    ImageKind kind = ImageKind::patches;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    Index tags = 0;
    Index dim = 0;
};

// Header "images N tags M dim D", then "image_id path [patches|raster]".
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Patch matrices for every manifest entry. Raster entries are normalized to
// [0, 1] and split with hp.window / hp.stride.
std::vector<PatchMatrix> load_images(const std::filesystem::path& manifest_path,
                                     const DatasetManifest& manifest, const HyperParams& hp);

// Manifest + tag file, validated against each other.
Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const std::filesystem::path& tags_path, const HyperParams& hp);

// CSV "iter,total,consistency,prediction,smoothness,sparsity".
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);
void format_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace tagcomp::io
