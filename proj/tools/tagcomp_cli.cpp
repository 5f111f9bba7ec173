// Command-line front end. Talks to the library only through tagcomp/tagcomp.h.

#include <tagcomp/tagcomp.h>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Failure {
    tc_status status;
};

void check(tc_status status) {
    if (status != TC_OK) throw Failure{status};
}

template <class T, void (*Destroy)(T*)>
struct Deleter {
    void operator()(T* p) const { Destroy(p); }
};
using ConfigPtr = std::unique_ptr<tc_config, Deleter<tc_config, tc_config_destroy>>;
using DatasetPtr = std::unique_ptr<tc_dataset, Deleter<tc_dataset, tc_dataset_destroy>>;
using ModelPtr = std::unique_ptr<tc_model, Deleter<tc_model, tc_model_destroy>>;
using ReportPtr = std::unique_ptr<tc_cv_report, Deleter<tc_cv_report, tc_cv_report_destroy>>;

ConfigPtr load_config(const std::string& path) {
    tc_config* cfg = nullptr;
    check(path.empty() ? tc_config_create(&cfg) : tc_config_load(path.c_str(), &cfg));
    return ConfigPtr(cfg);
}

DatasetPtr load_dataset(const std::string& manifest, const std::string& tags,
                        const tc_config* cfg) {
    tc_dataset* ds = nullptr;
    check(tc_dataset_load(manifest.c_str(), tags.c_str(), cfg, &ds));
    return DatasetPtr(ds);
}

struct SynthArgs {
    tc_synth_params params = tc_synth_defaults();
    std::string out;
};

struct CompleteArgs {
    std::string manifest, tags, config, out, trace, model;
    std::uint64_t seed = 0;
};

struct EvalArgs {
    std::string manifest, fulltags, config, metric = "precision@5";
    int folds = 4;
    double rho = 0.3;
    std::uint64_t seed = 0;
};

struct GradcheckArgs {
    std::uint64_t seed = 0;
    std::string size = "small";
    int instances = 20;
};

int run_synth(SynthArgs& a) {
    check(tc_synth_write(&a.params, a.out.c_str()));
    std::cout << "wrote " << a.params.images << " images to " << a.out << '\n';
    return kExitOk;
}

int run_complete(const CompleteArgs& a) {
    auto cfg = load_config(a.config);
    auto ds = load_dataset(a.manifest, a.tags, cfg.get());
    tc_model* raw = nullptr;
    check(tc_run(ds.get(), cfg.get(), a.seed, &raw));
    ModelPtr model(raw);
    check(tc_model_write_completed(model.get(), a.out.c_str()));
    if (!a.trace.empty()) check(tc_model_write_trace(model.get(), a.trace.c_str()));
    if (!a.model.empty()) check(tc_model_save(model.get(), a.model.c_str()));

    size_t rows = 0;
    check(tc_model_trace_length(model.get(), &rows));
    tc_trace_row last{};
    check(tc_model_trace_row(model.get(), rows - 1, &last));
    std::cout << "outer iterations " << last.iteration << ", objective " << last.total << '\n';
    return kExitOk;
}

std::optional<std::pair<tc_metric, int>> parse_metric(const std::string& s) {
    if (s == "pos@top") return std::make_pair(TC_METRIC_POS_AT_TOP, 5);
    const std::string prefix = "precision@";
    if (s.rfind(prefix, 0) == 0 && s.size() > prefix.size()) {
        try {
            size_t used = 0;
            const int K = std::stoi(s.substr(prefix.size()), &used);
            if (used == s.size() - prefix.size() && K >= 1) {
                return std::make_pair(TC_METRIC_PRECISION_AT_K, K);
            }
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

int run_eval(const EvalArgs& a, tc_metric metric, int K) {
    auto cfg = load_config(a.config);
    auto ds = load_dataset(a.manifest, a.fulltags, cfg.get());
    tc_cv_report* raw = nullptr;
    check(tc_cross_validate(ds.get(), cfg.get(), a.folds, a.rho, K, a.seed, &raw));
    ReportPtr rep(raw);

    size_t folds = 0;
    check(tc_cv_report_folds(rep.get(), metric, &folds));
    std::cout << "metric " << a.metric << " folds " << a.folds << " rho " << a.rho << " seed "
              << a.seed << '\n';
    char buf[64];
    for (size_t f = 0; f < folds; ++f) {
        double v = 0.0;
        check(tc_cv_report_value(rep.get(), metric, f, &v));
        std::snprintf(buf, sizeof buf, "%.6f", v);
        std::cout << "fold " << f << ' ' << buf << '\n';
    }
    double mean = 0.0;
    check(tc_cv_report_mean(rep.get(), metric, &mean));
    std::snprintf(buf, sizeof buf, "%.6f", mean);
    std::cout << "mean " << buf << '\n';
    return kExitOk;
}

int run_gradcheck(const GradcheckArgs& a) {
    const tc_gradcheck_size size = a.size == "medium" ? TC_GRADCHECK_MEDIUM : TC_GRADCHECK_SMALL;
    tc_gradcheck_result r{};
    check(tc_gradcheck(a.seed, a.instances, size, &r));
    const std::pair<const char*, double> rows[] = {
        {"T", r.max_rel_T}, {"U", r.max_rel_U}, {"b", r.max_rel_b}, {"W", r.max_rel_W}};
    std::printf("instances %d  tolerance %.1e\n", r.instances, r.tolerance);
    std::printf("%-6s %-14s %s\n", "block", "max_rel_err", "status");
    for (const auto& [name, err] : rows) {
        std::printf("%-6s %-14.3e %s\n", name, err, err <= r.tolerance ? "pass" : "FAIL");
    }
    return r.pass ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Image tag completion with a learned convolutional representation"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Write a synthetic block-model dataset");
    s->add_option("--images", synth.params.images, "Number of images")->check(CLI::PositiveNumber);
    s->add_option("--tags", synth.params.tags, "Number of tags")->check(CLI::PositiveNumber);
    s->add_option("--dim", synth.params.dim, "Patch feature dimension")->check(CLI::PositiveNumber);
    s->add_option("--patches", synth.params.patches_per_image, "Patches per image")
        ->check(CLI::PositiveNumber);
    s->add_option("--clusters", synth.params.clusters, "Latent clusters")->check(CLI::PositiveNumber);
    s->add_option("--noise", synth.params.noise, "Patch noise sigma")->check(CLI::NonNegativeNumber);
    s->add_option("--seed", synth.params.seed, "Random seed");
    synth.params.rho = 0.3;
    s->add_option("--rho", synth.params.rho, "Fraction of positives hidden in tags_observed.txt (0: skip)");
    s->add_option("--out", synth.out, "Output directory")->required();

    CompleteArgs comp;
    auto* c = app.add_subcommand("complete", "Complete a partially observed tag matrix");
    c->add_option("--manifest", comp.manifest, "Dataset manifest")->required();
    c->add_option("--tags", comp.tags, "Observed tag file")->required();
    c->add_option("--config", comp.config, "Hyper-parameter file (key value lines)");
    c->add_option("--out", comp.out, "Completed matrix output")->required();
    c->add_option("--trace", comp.trace, "Objective trace CSV output");
    c->add_option("--model", comp.model, "Model output");
    c->add_option("--seed", comp.seed, "Random seed");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Cross-validated annotation / retrieval evaluation");
    e->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
    e->add_option("--fulltags", ev.fulltags, "Ground-truth tag file")->required();
    e->add_option("--metric", ev.metric, "precision@K or pos@top");
    e->add_option("--folds", ev.folds, "Number of folds");
    e->add_option("--rho", ev.rho, "Fraction of training positives hidden");
    e->add_option("--config", ev.config, "Hyper-parameter file (key value lines)");
    e->add_option("--seed", ev.seed, "Random seed");

    GradcheckArgs gc;
    auto* g = app.add_subcommand("gradcheck", "Verify analytic gradients by finite differences");
    g->add_option("--seed", gc.seed, "Random seed");
    g->add_option("--size", gc.size, "Instance size")->check(CLI::IsMember({"small", "medium"}));
    g->add_option("--instances", gc.instances, "Number of random instances")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err, std::cerr, std::cerr);
        std::cerr << app.help();
        return kExitUsage;
    }

    try {
        if (*s) return run_synth(synth);
        if (*c) return run_complete(comp);
        if (*e) {
            const auto metric = parse_metric(ev.metric);
            if (!metric) {
                std::cerr << "error: unknown metric '" << ev.metric
                          << "' (expected precision@K or pos@top)\n"
                          << e->help();
                return kExitUsage;
            }
            return run_eval(ev, metric->first, metric->second);
        }
        if (*g) return run_gradcheck(gc);
    } catch (const Failure& f) {
        std::cerr << "error (" << tc_status_name(f.status) << "): " << tc_last_error() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
