#include <tagcomp/error.hpp>
#include <tagcomp/tagging_tasks.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

namespace tagcomp {

namespace {

Seed derive_seed(Seed base, std::uint64_t stream) {
    // splitmix64 step, so fold and mask streams do not collide
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

}  // namespace

MaskResult mask_generate(const Matrix& T_full, double rho, Seed seed) {
    if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("rho must lie in (0, 1)");
    if (!((T_full.array() == 0.0) || (T_full.array() == 1.0)).all()) {
        throw InvalidArgument("full tag matrix must be binary");
    }
    std::vector<std::pair<Index, Index>> positives;
    for (Index i = 0; i < T_full.cols(); ++i) {
        for (Index j = 0; j < T_full.rows(); ++j) {
            if (T_full(j, i) == 1.0) positives.emplace_back(j, i);
        }
    }
    const auto count = static_cast<size_t>(std::floor(rho * double(positives.size())));
    std::mt19937_64 rng(seed);
    std::shuffle(positives.begin(), positives.end(), rng);

    MaskResult out;
    out.T_hat = T_full;
    out.Phi = Matrix::Ones(T_full.rows(), T_full.cols());
    for (size_t p = 0; p < count; ++p) {
        const auto [j, i] = positives[p];
        out.Phi(j, i) = 0.0;
        out.T_hat(j, i) = 0.0;
    }
    out.masked = static_cast<Index>(count);

    const Matrix seen = out.T_hat.cwiseProduct(out.Phi);
    for (Index j = 0; j < seen.rows(); ++j) {
        if (seen.row(j).sum() == 0.0) out.rows_without_positives.push_back(j);
    }
    for (Index i = 0; i < seen.cols(); ++i) {
        if (seen.col(i).sum() == 0.0) out.cols_without_positives.push_back(i);
    }
    return out;
}

std::vector<Index> retrieve(const Vector& scores) {
    std::vector<Index> order(static_cast<size_t>(scores.size()));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return scores[a] > scores[b]; });
    return order;
}

std::vector<Index> annotate_topk(const Vector& scores, int K) {
    if (K < 1) throw InvalidArgument("K must be positive");
    auto order = retrieve(scores);
    order.resize(std::min(order.size(), static_cast<size_t>(K)));
    return order;
}

double precision_at_k(const std::vector<Index>& predicted, const std::vector<Index>& truth,
                      int K) {
    if (K < 1) throw InvalidArgument("K must be positive");
    const size_t upto = std::min(predicted.size(), static_cast<size_t>(K));
    int hits = 0;
    for (size_t p = 0; p < upto; ++p) {
        if (std::find(truth.begin(), truth.end(), predicted[p]) != truth.end()) ++hits;
    }
    return double(hits) / double(K);
}

std::optional<double> pos_at_top(const std::vector<Index>& ranking,
                                 const std::vector<Index>& relevant) {
    if (ranking.empty()) throw InvalidArgument("empty ranking");
    auto is_relevant = [&](Index x) {
        return std::find(relevant.begin(), relevant.end(), x) != relevant.end();
    };
    size_t total_relevant = 0;
    for (Index x : ranking) total_relevant += is_relevant(x) ? 1 : 0;
    if (total_relevant == 0) return std::nullopt;

    size_t above = 0;
    for (Index x : ranking) {
        if (!is_relevant(x)) break;
        ++above;
    }
    return double(above) / double(total_relevant);
}

std::vector<int> fold_assignment(Index n, int folds, Seed seed) {
    if (folds < 2 || folds > n) {
        throw InvalidArgument("folds must lie in [2, " + std::to_string(n) + "]");
    }
    std::vector<Index> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), Index(0));
    std::mt19937_64 rng(derive_seed(seed, 0));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold_of(static_cast<size_t>(n));
    for (size_t p = 0; p < perm.size(); ++p) {
        fold_of[static_cast<size_t>(perm[p])] = static_cast<int>(p % size_t(folds));
    }
    return fold_of;
}

CrossValidation cross_validate(const std::vector<PatchMatrix>& images, const Matrix& T_full,
                               int folds, double rho, const HyperParams& hp, Seed seed,
                               int K) {
    const Index n = static_cast<Index>(images.size());
    if (T_full.cols() != n) {
        throw InvalidArgument("full tag matrix does not match the image count");
    }
    if (K < 1) throw InvalidArgument("K must be positive");

    CrossValidation cv;
    cv.fold_of = fold_assignment(n, folds, seed);
    cv.precision.metric = "precision@" + std::to_string(K);
    cv.pos_at_top.metric = "pos@top";
    for (EvalReport* r : {&cv.precision, &cv.pos_at_top}) {
        r->K = K;
        r->rho = rho;
        r->seed = seed;
    }

    for (int f = 0; f < folds; ++f) {
        std::vector<Index> test;
        for (Index i = 0; i < n; ++i) {
            if (cv.fold_of[size_t(i)] == f) test.push_back(i);
        }
        MaskResult mask = mask_generate(T_full, rho, derive_seed(seed, 2 * std::uint64_t(f) + 1));
        for (Index i : test) {
            mask.Phi.col(i).setZero();
            mask.T_hat.col(i).setZero();
        }
        Dataset data{images, mask.T_hat, mask.Phi};
        const TrainState ts = run(data, hp, derive_seed(seed, 2 * std::uint64_t(f) + 2));
        const Matrix& T = ts.state.T;

        std::vector<double> prec;
        for (Index i : test) {
            std::vector<Index> truth;
            for (Index j = 0; j < T_full.rows(); ++j) {
                if (T_full(j, i) == 1.0) truth.push_back(j);
            }
            if (truth.empty()) continue;
            prec.push_back(precision_at_k(annotate_topk(T.col(i), K), truth, K));
        }
        if (!prec.empty()) cv.precision.per_fold.push_back(mean_of(prec));

        std::vector<double> pat;
        Vector scores(static_cast<Index>(test.size()));
        for (Index j = 0; j < T_full.rows(); ++j) {
            std::vector<Index> relevant;
            for (size_t p = 0; p < test.size(); ++p) {
                scores[Index(p)] = T(j, test[p]);
                if (T_full(j, test[p]) == 1.0) relevant.push_back(Index(p));
            }
            if (auto v = pos_at_top(retrieve(scores), relevant)) pat.push_back(*v);
        }
        if (!pat.empty()) cv.pos_at_top.per_fold.push_back(mean_of(pat));
    }
    cv.precision.mean = mean_of(cv.precision.per_fold);
    cv.pos_at_top.mean = mean_of(cv.pos_at_top.per_fold);
    return cv;
}

std::vector<Index> cluster_tags(int cluster, int tags, int clusters) {
    if (tags < 1 || clusters < 1 || cluster < 0 || cluster >= clusters) {
        throw InvalidArgument("invalid cluster/tag configuration");
    }
    const int run_len = std::min(tags, std::max(5, (tags + clusters - 1) / clusters));
    const int offset = static_cast<int>((std::int64_t(cluster) * tags) / clusters);
    std::vector<Index> out;
    for (int p = 0; p < run_len; ++p) out.push_back((offset + p) % tags);
    std::sort(out.begin(), out.end());
    return out;
}

SynthData synth_dataset(const SynthParams& p) {
    if (p.images < 1 || p.tags < 1 || p.dim < 1 || p.patches_per_image < 1 ||
        p.clusters < 1) {
        throw InvalidArgument("synthetic dataset sizes must be positive");
    }
    if (!(p.noise >= 0.0) || !std::isfinite(p.noise)) {
        throw InvalidArgument("noise must be non-negative");
    }
    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    SynthData out;
    out.centers.resize(p.dim, p.clusters);
    for (Index c = 0; c < p.clusters; ++c) {
        for (Index r = 0; r < p.dim; ++r) out.centers(r, c) = unit(rng);
    }
    out.T_full = Matrix::Zero(p.tags, p.images);
    out.images.reserve(size_t(p.images));
    for (int i = 0; i < p.images; ++i) {
        const int c = i % p.clusters;
        out.cluster_of.push_back(c);
        for (Index j : cluster_tags(c, p.tags, p.clusters)) out.T_full(j, i) = 1.0;

        PatchMatrix img;
        char id[32];
        std::snprintf(id, sizeof id, "img%04d", i);
        img.image_id = id;
        img.data.resize(p.dim, p.patches_per_image);
        for (Index q = 0; q < p.patches_per_image; ++q) {
            for (Index r = 0; r < p.dim; ++r) {
                img.data(r, q) = out.centers(r, c) + p.noise * unit(rng);
            }
        }
        out.images.push_back(std::move(img));
    }
    return out;
}

}  // namespace tagcomp
