#include <tagcomp/error.hpp>
#include <tagcomp/io.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <system_error>

namespace tagcomp::io {

namespace fs = std::filesystem;

namespace {

struct Line {
    int number = 0;
    std::string text;
};

std::vector<Line> significant_lines(std::istream& in) {
    std::vector<Line> out;
    std::string text;
    int number = 0;
    while (std::getline(in, text)) {
        ++number;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        const auto first = text.find_first_not_of(" \t");
        if (first == std::string::npos || text[first] == '#') continue;
        out.push_back({number, text});
    }
    return out;
}

std::vector<std::string> tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
    throw ParseError(origin + ":" + std::to_string(line) + ": " + what);
}

double parse_real(const std::string& tok, const std::string& origin, int line) {
    double v = 0.0;
    const char* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || ptr != end) fail(origin, line, "not a number: '" + tok + "'");
    if (!std::isfinite(v)) fail(origin, line, "non-finite value: '" + tok + "'");
    return v;
}

long long parse_integer(const std::string& tok, const std::string& origin, int line) {
    long long v = 0;
    const char* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || ptr != end) fail(origin, line, "not an integer: '" + tok + "'");
    return v;
}

std::pair<Index, Index> parse_header(const Line& line, const std::string& origin) {
    const auto tok = tokens(line.text);
    if (tok.size() != 2) fail(origin, line.number, "header must be 'rows cols'");
    const auto rows = parse_integer(tok[0], origin, line.number);
    const auto cols = parse_integer(tok[1], origin, line.number);
    if (rows < 0 || cols < 0) fail(origin, line.number, "negative dimension in header");
    return {Index(rows), Index(cols)};
}

// Parses a matrix starting at lines[pos]; advances pos past it.
Matrix parse_matrix_lines(const std::vector<Line>& lines, size_t& pos, const std::string& origin,
                          int eof_line) {
    if (pos >= lines.size()) fail(origin, eof_line, "missing matrix header");
    const auto [rows, cols] = parse_header(lines[pos], origin);
    const int header_line = lines[pos].number;
    ++pos;
    Matrix M(rows, cols);
    for (Index r = 0; r < rows; ++r, ++pos) {
        if (pos >= lines.size()) {
            fail(origin, header_line, "expected " + std::to_string(rows) + " rows, found " +
                                          std::to_string(r));
        }
        const auto tok = tokens(lines[pos].text);
        if (static_cast<Index>(tok.size()) != cols) {
            fail(origin, lines[pos].number, "expected " + std::to_string(cols) +
                                                " values, found " + std::to_string(tok.size()));
        }
        for (Index c = 0; c < cols; ++c) {
            M(r, c) = parse_real(tok[size_t(c)], origin, lines[pos].number);
        }
    }
    return M;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw Error("failed to format number");
    return std::string(buf, ptr);
}

// ---------------------------------------------------------------- matrices

Matrix parse_matrix(std::istream& in, const std::string& origin) {
    const auto lines = significant_lines(in);
    size_t pos = 0;
    Matrix M = parse_matrix_lines(lines, pos, origin, 1);
    if (pos != lines.size()) fail(origin, lines[pos].number, "unexpected extra row");
    return M;
}

Matrix read_matrix(const fs::path& path) {
    auto in = open_in(path);
    return parse_matrix(in, path.string());
}

void format_matrix(std::ostream& out, const Matrix& M) {
    out << M.rows() << ' ' << M.cols() << '\n';
    for (Index r = 0; r < M.rows(); ++r) {
        for (Index c = 0; c < M.cols(); ++c) {
            if (c) out << ' ';
            out << format_double(M(r, c));
        }
        out << '\n';
    }
}

void write_matrix(const fs::path& path, const Matrix& M) {
    auto out = open_out(path);
    format_matrix(out, M);
    finish(out, path);
}

// ---------------------------------------------------------------- tags

TagFile parse_tags(std::istream& in, const std::string& origin) {
    const auto lines = significant_lines(in);
    if (lines.empty()) fail(origin, 1, "missing 'm n' header");
    const auto [m, n] = parse_header(lines[0], origin);
    TagFile tf{Matrix::Zero(m, n), Matrix::Zero(m, n)};
    for (size_t p = 1; p < lines.size(); ++p) {
        const auto& line = lines[p];
        const auto tok = tokens(line.text);
        if (tok.size() != 3) fail(origin, line.number, "expected 'tag image value'");
        const auto j = parse_integer(tok[0], origin, line.number);
        const auto i = parse_integer(tok[1], origin, line.number);
        const auto v = parse_integer(tok[2], origin, line.number);
        if (j < 0 || j >= m || i < 0 || i >= n) {
            fail(origin, line.number, "index (" + tok[0] + ", " + tok[1] + ") out of range");
        }
        if (v != 0 && v != 1) fail(origin, line.number, "value must be 0 or 1");
        if (tf.Phi(j, i) != 0.0) {
            fail(origin, line.number, "duplicate entry (" + tok[0] + ", " + tok[1] + ")");
        }
        tf.Phi(j, i) = 1.0;
        tf.T_hat(j, i) = double(v);
    }
    return tf;
}

TagFile read_tags(const fs::path& path) {
    auto in = open_in(path);
    return parse_tags(in, path.string());
}

void write_tags(const fs::path& path, const Matrix& T_hat, const Matrix& Phi) {
    if (T_hat.rows() != Phi.rows() || T_hat.cols() != Phi.cols()) {
        throw InvalidArgument("write_tags: T_hat and Phi differ in shape");
    }
    auto out = open_out(path);
    out << "# observed tag entries: tag image value (0-based); unlisted entries are missing\n";
    out << T_hat.rows() << ' ' << T_hat.cols() << '\n';
    for (Index i = 0; i < T_hat.cols(); ++i) {
        for (Index j = 0; j < T_hat.rows(); ++j) {
            if (Phi(j, i) == 0.0) continue;
            out << j << ' ' << i << ' ' << (T_hat(j, i) != 0.0 ? 1 : 0) << '\n';
        }
    }
    finish(out, path);
}

void write_full_tags(const fs::path& path, const Matrix& T_full) {
    write_tags(path, T_full, Matrix::Ones(T_full.rows(), T_full.cols()));
}

// ---------------------------------------------------------------- config

void set_config_value(HyperParams& hp, const std::string& key, const std::string& value) {
    auto real = [&](bool allow_inf = false) {
        double v = 0.0;
        const char* end = value.data() + value.size();
        auto [ptr, ec] = std::from_chars(value.data(), end, v);
        if (ec != std::errc() || ptr != end || std::isnan(v) || (!allow_inf && std::isinf(v))) {
            throw InvalidArgument("config key '" + key + "': not a number: '" + value + "'");
        }
        return v;
    };
    auto integer = [&] {
        int v = 0;
        const char* end = value.data() + value.size();
        auto [ptr, ec] = std::from_chars(value.data(), end, v);
        if (ec != std::errc() || ptr != end) {
            throw InvalidArgument("config key '" + key + "': not an integer: '" + value + "'");
        }
        return v;
    };

    if (key == "lambda1") hp.lambda1 = real();
    else if (key == "lambda2") hp.lambda2 = real();
    else if (key == "lambda3") hp.lambda3 = real();
    else if (key == "gamma") {
        if (value == "median") hp.gamma.reset();
        else hp.gamma = real();
    }
    else if (key == "k") hp.k = integer();
    else if (key == "eta") hp.eta = real();
    else if (key == "epsilon_l1") hp.epsilon_l1 = real();
    else if (key == "max_outer") hp.max_outer = integer();
    else if (key == "max_inner") hp.max_inner = integer();
    else if (key == "tol") hp.tol = real(true);
    else if (key == "nonlinearity") hp.nonlinearity = parse_nonlinearity(value);
    else if (key == "filters") hp.filters = integer();
    else if (key == "window") hp.window = integer();
    else if (key == "stride") hp.stride = integer();
    else if (key == "one_sided_smoothness") {
        if (value == "true" || value == "1") hp.one_sided_smoothness = true;
        else if (value == "false" || value == "0") hp.one_sided_smoothness = false;
        else throw InvalidArgument("config key 'one_sided_smoothness': expected true or false");
    }
    else throw InvalidArgument("unknown config key '" + key + "'");
}

namespace {

HyperParams parse_config_lines(const std::vector<Line>& lines, size_t begin, size_t end,
                               const std::string& origin) {
    HyperParams hp;
    std::set<std::string> seen;
    for (size_t p = begin; p < end; ++p) {
        const auto tok = tokens(lines[p].text);
        if (tok.size() != 2) fail(origin, lines[p].number, "expected 'key value'");
        if (!seen.insert(tok[0]).second) {
            fail(origin, lines[p].number, "duplicate key '" + tok[0] + "'");
        }
        try {
            set_config_value(hp, tok[0], tok[1]);
        } catch (const InvalidArgument& e) {
            fail(origin, lines[p].number, e.what());
        }
    }
    try {
        hp.validate();
    } catch (const InvalidArgument& e) {
        throw ParseError(origin + ": " + e.what());
    }
    return hp;
}

}  // namespace

HyperParams parse_config(std::istream& in, const std::string& origin) {
    const auto lines = significant_lines(in);
    return parse_config_lines(lines, 0, lines.size(), origin);
}

HyperParams read_config(const fs::path& path) {
    auto in = open_in(path);
    return parse_config(in, path.string());
}

void format_config(std::ostream& out, const HyperParams& hp) {
    out << "lambda1 " << format_double(hp.lambda1) << '\n'
        << "lambda2 " << format_double(hp.lambda2) << '\n'
        << "lambda3 " << format_double(hp.lambda3) << '\n'
        << "gamma " << (hp.gamma ? format_double(*hp.gamma) : std::string("median")) << '\n'
        << "k " << hp.k << '\n'
        << "eta " << format_double(hp.eta) << '\n'
        << "epsilon_l1 " << format_double(hp.epsilon_l1) << '\n'
        << "max_outer " << hp.max_outer << '\n'
        << "max_inner " << hp.max_inner << '\n'
        << "tol " << format_double(hp.tol) << '\n'
        << "nonlinearity " << to_string(hp.nonlinearity) << '\n'
        << "filters " << hp.filters << '\n'
        << "window " << hp.window << '\n'
        << "stride " << hp.stride << '\n'
        << "one_sided_smoothness " << (hp.one_sided_smoothness ? "true" : "false") << '\n';
}

void write_config(const fs::path& path, const HyperParams& hp) {
    auto out = open_out(path);
    format_config(out, hp);
    finish(out, path);
}

// ---------------------------------------------------------------- model

void save_model(const fs::path& path, const FilterBank& bank, const Predictor& pred,
                const HyperParams& hp) {
    if (pred.U.cols() != bank.W.cols() || pred.U.rows() != pred.b.size()) {
        throw InvalidArgument("save_model: inconsistent model dimensions");
    }
    HyperParams stored = hp;
    stored.nonlinearity = bank.g;
    stored.filters = static_cast<int>(bank.W.cols());
    auto out = open_out(path);
    out << "# tag completion model: filters W (d x r), predictor U (m x r), offset b (m)\n";
    out << "[W]\n";
    format_matrix(out, bank.W);
    out << "[U]\n";
    format_matrix(out, pred.U);
    out << "[b]\n";
    format_matrix(out, Matrix(pred.b));
    out << "[hyper]\n";
    format_config(out, stored);
    finish(out, path);
}

Model load_model(const fs::path& path) {
    auto in = open_in(path);
    const std::string origin = path.string();
    const auto lines = significant_lines(in);

    std::map<std::string, std::pair<size_t, size_t>> sections;  // [begin, end)
    std::string current;
    for (size_t p = 0; p < lines.size(); ++p) {
        const auto& t = lines[p].text;
        const auto first = t.find_first_not_of(" \t");
        if (t[first] == '[') {
            const auto close = t.find(']', first);
            if (close == std::string::npos) fail(origin, lines[p].number, "malformed block header");
            current = t.substr(first + 1, close - first - 1);
            if (sections.count(current)) {
                fail(origin, lines[p].number, "duplicate block [" + current + "]");
            }
            sections[current] = {p + 1, p + 1};
            continue;
        }
        if (current.empty()) fail(origin, lines[p].number, "content before the first block");
        sections[current].second = p + 1;
    }
    for (const char* name : {"W", "U", "b", "hyper"}) {
        if (!sections.count(name)) {
            throw ParseError(origin + ": missing block [" + std::string(name) + "]");
        }
    }
    auto matrix_block = [&](const std::string& name) {
        const auto [begin, end] = sections.at(name);
        std::vector<Line> sub(lines.begin() + std::ptrdiff_t(begin),
                              lines.begin() + std::ptrdiff_t(end));
        size_t pos = 0;
        const int anchor = begin > 0 ? lines[begin - 1].number : 1;
        Matrix M = parse_matrix_lines(sub, pos, origin + " [" + name + "]", anchor);
        if (pos != sub.size()) fail(origin, sub[pos].number, "unexpected extra row in [" + name + "]");
        return M;
    };

    Model model;
    model.bank.W = matrix_block("W");
    model.pred.U = matrix_block("U");
    const Matrix b = matrix_block("b");
    const auto [hb, he] = sections.at("hyper");
    model.hp = parse_config_lines(lines, hb, he, origin);
    model.bank.g = model.hp.nonlinearity;

    if (b.cols() != 1) throw ParseError(origin + ": block [b] must be a single column");
    model.pred.b = b.col(0);
    if (model.pred.U.cols() != model.bank.W.cols()) {
        throw ParseError(origin + ": filter count mismatch: W has " +
                         std::to_string(model.bank.W.cols()) + " filters, U has " +
                         std::to_string(model.pred.U.cols()) + " columns");
    }
    if (model.pred.U.rows() != model.pred.b.size()) {
        throw ParseError(origin + ": tag count mismatch between U and b");
    }
    if (model.hp.filters != model.bank.W.cols()) {
        throw ParseError(origin + ": [hyper] filters does not match W");
    }
    return model;
}

// ---------------------------------------------------------------- manifest

DatasetManifest read_manifest(const fs::path& path) {
    auto in = open_in(path);
    const std::string origin = path.string();
    const auto lines = significant_lines(in);
    if (lines.empty()) fail(origin, 1, "missing manifest header");

    const auto head = tokens(lines[0].text);
    if (head.size() != 6 || head[0] != "images" || head[2] != "tags" || head[4] != "dim") {
        fail(origin, lines[0].number, "header must be 'images N tags M dim D'");
    }
    const auto n = parse_integer(head[1], origin, lines[0].number);
    const auto m = parse_integer(head[3], origin, lines[0].number);
    const auto d = parse_integer(head[5], origin, lines[0].number);
    if (n < 1 || m < 1 || d < 1) fail(origin, lines[0].number, "dimensions must be positive");

    DatasetManifest mf;
    mf.tags = m;
    mf.dim = d;
    std::set<std::string> ids;
    for (size_t p = 1; p < lines.size(); ++p) {
        const auto tok = tokens(lines[p].text);
        if (tok.size() != 2 && tok.size() != 3) {
            fail(origin, lines[p].number, "expected 'image_id path [patches|raster]'");
        }
        ManifestEntry e;
        e.image_id = tok[0];
        e.path = tok[1];
        if (tok.size() == 3) {
            if (tok[2] == "patches") e.kind = ImageKind::patches;
            else if (tok[2] == "raster") e.kind = ImageKind::raster;
            else fail(origin, lines[p].number, "unknown image kind '" + tok[2] + "'");
        }
        if (!ids.insert(e.image_id).second) {
            fail(origin, lines[p].number, "duplicate image id '" + e.image_id + "'");
        }
        mf.entries.push_back(std::move(e));
    }
    if (static_cast<long long>(mf.entries.size()) != n) {
        fail(origin, lines[0].number, "header declares " + std::to_string(n) +
                                          " images, found " + std::to_string(mf.entries.size()));
    }
    return mf;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
    auto out = open_out(path);
    out << "# image list in column order (0-based); paths relative to this file\n";
    out << "images " << manifest.entries.size() << " tags " << manifest.tags << " dim "
        << manifest.dim << '\n';
    for (const auto& e : manifest.entries) {
        out << e.image_id << ' ' << e.path.generic_string() << ' '
            << (e.kind == ImageKind::raster ? "raster" : "patches") << '\n';
    }
    finish(out, path);
}

std::vector<PatchMatrix> load_images(const fs::path& manifest_path,
                                     const DatasetManifest& manifest, const HyperParams& hp) {
    const fs::path base = manifest_path.parent_path();
    std::vector<PatchMatrix> images;
    images.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        const fs::path p = e.path.is_absolute() ? e.path : base / e.path;
        PatchMatrix img;
        if (e.kind == ImageKind::raster) {
            try {
                img = extract_patches(normalize_pixels(read_matrix(p)), hp.window, hp.stride,
                                      e.image_id);
            } catch (const InvalidArgument& ex) {
                throw InvalidArgument(p.string() + ": " + ex.what());
            }
        } else {
            img.data = read_matrix(p);
            img.image_id = e.image_id;
        }
        if (img.dim() != manifest.dim) {
            throw InvalidArgument(p.string() + ": patch dimension " + std::to_string(img.dim()) +
                                  " does not match manifest dim " +
                                  std::to_string(manifest.dim));
        }
        if (img.count() < 1) throw InvalidArgument(p.string() + ": no patches");
        images.push_back(std::move(img));
    }
    return images;
}

Dataset load_dataset(const fs::path& manifest_path, const fs::path& tags_path,
                     const HyperParams& hp) {
    const auto manifest = read_manifest(manifest_path);
    const auto tags = read_tags(tags_path);
    if (tags.T_hat.cols() != static_cast<Index>(manifest.entries.size())) {
        throw InvalidArgument("tag file has " + std::to_string(tags.T_hat.cols()) +
                              " images but the manifest lists " +
                              std::to_string(manifest.entries.size()));
    }
    if (tags.T_hat.rows() != manifest.tags) {
        throw InvalidArgument("tag file has " + std::to_string(tags.T_hat.rows()) +
                              " tags but the manifest declares " + std::to_string(manifest.tags));
    }
    Dataset data{load_images(manifest_path, manifest, hp), tags.T_hat, tags.Phi};
    data.validate();
    return data;
}

// ---------------------------------------------------------------- trace

void format_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
    out << "# objective per outer iteration under that iteration's similarity graph\n";
    out << "iter,total,consistency,prediction,smoothness,sparsity\n";
    for (const auto& row : trace) {
        const auto& o = row.objective;
        out << row.iteration << ',' << format_double(o.total) << ','
            << format_double(o.consistency) << ',' << format_double(o.prediction) << ','
            << format_double(o.smoothness) << ',' << format_double(o.sparsity) << '\n';
    }
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& trace) {
    auto out = open_out(path);
    format_trace_csv(out, trace);
    finish(out, path);
}

std::vector<TraceRow> read_trace_csv(const fs::path& path) {
    auto in = open_in(path);
    const std::string origin = path.string();
    const auto lines = significant_lines(in);
    if (lines.empty() || lines[0].text != "iter,total,consistency,prediction,smoothness,sparsity") {
        fail(origin, lines.empty() ? 1 : lines[0].number, "missing CSV header");
    }
    std::vector<TraceRow> trace;
    for (size_t p = 1; p < lines.size(); ++p) {
        std::vector<std::string> cells;
        std::stringstream ss(lines[p].text);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) fail(origin, lines[p].number, "expected 6 columns");
        TraceRow row;
        row.iteration = static_cast<int>(parse_integer(cells[0], origin, lines[p].number));
        row.objective.total = parse_real(cells[1], origin, lines[p].number);
        row.objective.consistency = parse_real(cells[2], origin, lines[p].number);
        row.objective.prediction = parse_real(cells[3], origin, lines[p].number);
        row.objective.smoothness = parse_real(cells[4], origin, lines[p].number);
        row.objective.sparsity = parse_real(cells[5], origin, lines[p].number);
        trace.push_back(row);
    }
    return trace;
}

}  // namespace tagcomp::io
