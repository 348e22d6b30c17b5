// texrisk: command-line driver for phantom generation, flavorization,
// curation, training, scoring, evaluation, full experiments and the tuner.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "json_config.hpp"
#include "texrisk/common/error.hpp"
#include "texrisk/common/parallel.hpp"
#include "texrisk/common/random.hpp"
#include "texrisk/imaging/io.hpp"
#include "texrisk/pipeline/artifacts.hpp"
#include "texrisk/pipeline/experiment.hpp"
#include "texrisk/pipeline/tuner.hpp"

using namespace texrisk;
using namespace texrisk::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Globals {
    fs::path data_root;
    fs::path profiles;
    int workers = 1;

    fs::path resolve(const fs::path& p) const {
        if (p.empty() || p.is_absolute() || data_root.empty()) return p;
        return data_root / p;
    }
    std::vector<imaging::FlavorProfile> profile_set() const {
        return profiles.empty() ? imaging::default_profiles() : imaging::load_profiles(resolve(profiles));
    }
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// "raw", "processed", "flavor7" or "flavor1,flavor2,..."
DataFormat format_arg(const std::string& text, const std::vector<imaging::FlavorProfile>& profiles) {
    if (text == "raw" || text == "processed") return parse_data_format(text, profiles);
    json ids = json::array();
    std::stringstream ss(text);
    for (std::string id; std::getline(ss, id, ',');)
        if (!id.empty()) ids.push_back(id);
    return parse_data_format({{"flavors", ids}}, profiles);
}

ExperimentSpec load_spec(const Globals& g, const fs::path& path) {
    const auto resolved = g.resolve(path);
    if (!fs::is_regular_file(resolved)) throw Error(ErrorCode::InvalidConfig, "spec not found: " + resolved.string());
    auto spec = experiment_spec_from_json(read_json(resolved), g.profile_set(),
                                          g.data_root.empty() ? resolved.parent_path() : g.data_root);
    validate_spec(spec);
    return spec;
}

std::vector<fs::path> files_under(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "run_manifest.json") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

void print_report(const std::string& title, const evaluation::EvaluationReport& report) {
    std::printf("%s\n", title.c_str());
    for (const auto& a : report.aucs) {
        std::printf("  %-40s AUC(%s) = %.3f [%.3f, %.3f]  n+=%zu n-=%zu\n", a.label.c_str(),
                    std::string(evaluation::to_string(a.result.positivity)).c_str(), a.result.auc, a.result.ci_low,
                    a.result.ci_high, a.result.n_positive, a.result.n_negative);
    }
    for (const auto& c : report.comparisons) {
        std::printf("  %s vs %s (%s): p = %.4g\n", c.label_a.c_str(), c.label_b.c_str(),
                    std::string(evaluation::to_string(c.positivity)).c_str(), c.result.p_value);
    }
    for (const auto& n : report.notes) std::printf("  note: %s\n", n.c_str());
}

TunerService* g_tuner = nullptr;
void on_signal(int) {
    if (g_tuner) g_tuner->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"texrisk: texture risk scoring on raw and flavored mammography views"};
    app.config_formatter(std::make_shared<cli::JsonConfig>());
    app.set_config("--config", "", "JSON config; top-level keys are global flags, nested objects per subcommand");
    app.require_subcommand(1);

    Globals g;
    app.add_option("--data-root", g.data_root, "Base directory for relative paths")->envname("TEXRISK_DATA_ROOT");
    app.add_option("--profiles", g.profiles, "Flavor profile set (directory or JSON array); default: built-in");
    app.add_option("--workers", g.workers, "Worker threads for per-view work")->check(CLI::PositiveNumber);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a phantom cohort (views + manifest)");
    fs::path synth_out, synth_phantom;
    int n_women = 0;
    double amplitude = 0, label_noise = 0, clips_lo = 0, pmd_lo = 0, artifact_rate = 0;
    std::uint64_t synth_seed = 0;
    std::string id_prefix;
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--phantom", synth_phantom, "Phantom config JSON");
    auto* o_n = synth_cmd->add_option("--n-women", n_women, "Number of women")->check(CLI::PositiveNumber);
    auto* o_a = synth_cmd->add_option("--amplitude", amplitude, "Texture signal amplitude")->check(CLI::NonNegativeNumber);
    auto* o_seed = synth_cmd->add_option("--seed", synth_seed, "Seed");
    auto* o_ln = synth_cmd->add_option("--label-noise", label_noise, "Label-noise probability")->check(CLI::Range(0.0, 1.0));
    auto* o_c = synth_cmd->add_option("--clips-log-odds", clips_lo, "Event log-odds for clips");
    auto* o_p = synth_cmd->add_option("--pmd-log-odds", pmd_lo, "Event log-odds for density");
    auto* o_ar = synth_cmd->add_option("--artifact-rate", artifact_rate, "Visible-artifact rate")->check(CLI::Range(0.0, 1.0));
    auto* o_id = synth_cmd->add_option("--id-prefix", id_prefix, "Woman id prefix");

    // flavorize
    auto* flav_cmd = app.add_subcommand("flavorize", "Flavorize every raw view of a store with a profile set");
    fs::path flav_views, flav_out;
    std::vector<std::string> flav_ids;
    flav_cmd->add_option("--views", flav_views, "Raw view store")->required();
    flav_cmd->add_option("--out", flav_out, "Output directory; one view store per profile")->required();
    flav_cmd->add_option("--profile", flav_ids, "Profile ids (default: all)");

    // curate
    auto* cur_cmd = app.add_subcommand("curate", "Noise identification and filtering on the train dataset of a spec");
    fs::path cur_spec, cur_out;
    std::uint64_t cur_seed = 0;
    cur_cmd->add_option("--spec", cur_spec, "Experiment spec JSON")->required();
    cur_cmd->add_option("--out", cur_out, "Output directory")->required();
    auto* o_cur_seed = cur_cmd->add_option("--seed", cur_seed, "Seed (default: first spec seed)");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the filtered-stage ensemble");
    fs::path tr_spec, tr_manifest, tr_reference, tr_stats, tr_out;
    std::uint64_t tr_seed = 0;
    train_cmd->add_option("--spec", tr_spec, "Experiment spec JSON")->required();
    train_cmd->add_option("--manifest", tr_manifest, "Filtered manifest (from curate)")->required();
    train_cmd->add_option("--reference", tr_reference, "Reference risk JSON (from curate)")->required();
    train_cmd->add_option("--standardization", tr_stats, "Standardization JSON (from curate)");
    train_cmd->add_option("--out", tr_out, "Output directory")->required();
    auto* o_tr_seed = train_cmd->add_option("--seed", tr_seed, "Seed (default: first spec seed)");

    // score
    auto* score_cmd = app.add_subcommand("score", "Score a dataset with a trained ensemble or a plugin");
    fs::path sc_ensemble, sc_plugin, sc_manifest, sc_views, sc_out;
    std::string sc_format = "raw", sc_stats = "dataset";
    std::uint64_t sc_seed = 0;
    int sc_sample = 1000;
    auto* o_ens = score_cmd->add_option("--ensemble", sc_ensemble, "Ensemble JSON (from train)");
    auto* o_plug = score_cmd->add_option("--plugin", sc_plugin, "External scorer executable");
    o_ens->excludes(o_plug);
    score_cmd->add_option("--manifest", sc_manifest, "Manifest")->required();
    score_cmd->add_option("--views", sc_views, "View store (default: <manifest dir>/views)");
    score_cmd->add_option("--format", sc_format, "raw, processed or a flavor id");
    score_cmd->add_option("--standardization", sc_stats, "dataset or ensemble")
        ->check(CLI::IsMember({"dataset", "ensemble"}));
    score_cmd->add_option("--standardization-sample", sc_sample, "Views sampled for dataset statistics")
        ->check(CLI::PositiveNumber);
    score_cmd->add_option("--seed", sc_seed, "Seed for the standardization sample");
    score_cmd->add_option("--out", sc_out, "Scores CSV")->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "AUCs, flagging and odds-ratio matrices for a scores CSV");
    fs::path ev_scores, ev_compare, ev_manifest, ev_out;
    std::string ev_label = "scores", ev_compare_label = "comparison";
    double ev_flag = 0.10;
    eval_cmd->add_option("--scores", ev_scores, "Scores CSV")->required();
    eval_cmd->add_option("--manifest", ev_manifest, "Manifest of the scored women")->required();
    eval_cmd->add_option("--compare", ev_compare, "Second scores CSV on the same women (paired DeLong)");
    eval_cmd->add_option("--label", ev_label, "Label of the scores");
    eval_cmd->add_option("--compare-label", ev_compare_label, "Label of the comparison scores");
    eval_cmd->add_option("--flag-fraction", ev_flag, "Top fraction flagged")->check(CLI::Range(0.0, 1.0));
    eval_cmd->add_option("--out", ev_out, "Output directory")->required();

    // run
    auto* run_cmd = app.add_subcommand("run", "Run a full experiment spec");
    fs::path run_spec, run_out;
    run_cmd->add_option("--spec", run_spec, "Experiment spec JSON")->required();
    run_cmd->add_option("--out", run_out, "Output directory (overrides the spec)");

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "Serve the flavor tuner HTTP API");
    fs::path tu_views, tu_profiles, tu_static;
    std::string tu_host = "127.0.0.1";
    int tu_port = 8765;
    tune_cmd->add_option("--views", tu_views, "Raw view store")->required();
    tune_cmd->add_option("--profile-dir", tu_profiles, "Directory for saved profiles")->required();
    tune_cmd->add_option("--static", tu_static, "UI assets served at /");
    tune_cmd->add_option("--host", tu_host, "Bind address (loopback by default)");
    tune_cmd->add_option("--port", tu_port, "Port")->check(CLI::Range(1, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    const std::string argv_line = [&] {
        std::string s;
        for (int i = 1; i < argc; ++i) s += (i > 1 ? " " : "") + std::string(argv[i]);
        return s;
    }();
    auto cli_config = [&] {
        std::istringstream in(app.config_to_str(false, false));
        return json::parse(in);
    };

    try {
        if (*synth_cmd) {
            synth::PhantomConfig c;
            std::vector<fs::path> inputs;
            if (!synth_phantom.empty()) {
                c = synth::phantom_config_from_json(read_json(g.resolve(synth_phantom)));
                inputs.push_back(g.resolve(synth_phantom));
            }
            if (*o_n) c.n_women = n_women;
            if (*o_a) c.texture_signal_amplitude = amplitude;
            if (*o_seed) c.seed = synth_seed;
            if (*o_ln) c.label_noise = label_noise;
            if (*o_c) c.clips_log_odds = clips_lo;
            if (*o_p) c.pmd_log_odds = pmd_lo;
            if (*o_ar) c.artifact_rate = artifact_rate;
            if (*o_id) c.id_prefix = id_prefix;
            synth::validate_config(c);
            const auto out = g.resolve(synth_out);
            const auto summary = synth::generate_cohort(c, out, g.workers);
            write_json(out / "phantom.json", synth::to_json(c));
            write_run_manifest(out / "run_manifest.json",
                               run_manifest("synth " + argv_line, cli_config(), inputs, files_under(out)));
            std::printf("wrote %zu women to %s\n", summary.records.size(), out.string().c_str());
        } else if (*flav_cmd) {
            const auto profiles = g.profile_set();
            std::vector<imaging::FlavorProfile> chosen;
            if (flav_ids.empty()) {
                chosen = profiles;
            } else {
                for (const auto& id : flav_ids) {
                    auto it = std::find_if(profiles.begin(), profiles.end(), [&](const auto& p) { return p.profile_id == id; });
                    if (it == profiles.end()) throw Error(ErrorCode::InvalidConfig, "unknown profile '" + id + "'");
                    chosen.push_back(*it);
                }
            }
            for (const auto& p : chosen) imaging::require_valid_profile(p);
            const imaging::ViewStore in(g.resolve(flav_views));
            const auto out = g.resolve(flav_out);
            std::vector<std::string> ids;
            for (const auto& id : in.list_ids())
                if (in.load(id).format.is_raw()) ids.push_back(id);
            if (ids.empty()) throw Error(ErrorCode::InvalidConfig, "no raw views in " + in.root().string());
            for (const auto& p : chosen) {
                const imaging::ViewStore store(out / p.profile_id);
                parallel_for(ids.size(), g.workers, [&](std::size_t i) {
                    try {
                        store.save(ids[i], imaging::flavorize(in.load(ids[i]), p));
                    } catch (const Error& e) {
                        throw Error(e.code(), "view " + ids[i] + ": " + e.message());
                    }
                });
                write_json(out / p.profile_id / "profile.json", imaging::to_json(p));
            }
            write_run_manifest(out / "run_manifest.json",
                               run_manifest("flavorize " + argv_line, cli_config(), {}, files_under(out)));
            std::printf("flavorized %zu views with %zu profiles into %s\n", ids.size(), chosen.size(),
                        out.string().c_str());
        } else if (*cur_cmd) {
            auto spec = load_spec(g, cur_spec);
            spec.preparation.workers = g.workers;
            const auto seed = *o_cur_seed ? cur_seed : spec.seeds.front();
            const auto train = load_dataset(spec.train_name, spec.train_manifest, spec.train_views);
            const auto r = curate(spec, train, seed);
            const auto out = g.resolve(cur_out);
            write_json(out / "fold_plan_noise_id.json", cohort::to_json(r.noise_id.plan));
            write_json(out / "ensemble_noise_id.json",
                       scoring::ensemble_to_json(r.noise_id.instances, r.train_stats, spec.preparation.canvas));
            write_json(out / "reference_risk.json", cohort::to_json(r.reference));
            write_json(out / "standardization.json",
                       {{"mean", r.train_stats.mean}, {"std", r.train_stats.std}, {"sample_size", r.train_stats.sample_size}});
            json removed = json::array();
            for (const auto& x : r.removed)
                removed.push_back({{"woman_id", x.record.woman_id}, {"reason", x.reason}, {"risk", x.risk}});
            write_json(out / "removed.json", removed);
            cohort::write_manifest(out / "filtered_manifest.jsonl", r.kept);
            write_text(out / "convergence_noise_id.svg", evaluation::svg_traces(r.noise_id.convergence, "noise identification"));
            write_run_manifest(out / "run_manifest.json", run_manifest("curate " + argv_line, cli_config(),
                                                                       {g.resolve(cur_spec), spec.train_manifest},
                                                                       files_under(out)));
            std::printf("curated %zu women: %zu excluded, %zu removed, %zu kept; spread at CP %.3f\n",
                        train.records.size(), r.excluded.size(), r.removed.size(), r.kept.size(),
                        r.noise_id.convergence.spread_at_cp);
        } else if (*train_cmd) {
            auto spec = load_spec(g, tr_spec);
            spec.preparation.workers = g.workers;
            const auto seed = *o_tr_seed ? tr_seed : spec.seeds.front();
            const auto data = load_dataset(spec.train_name, g.resolve(tr_manifest), spec.train_views);
            const auto reference = cohort::reference_from_json(read_json(g.resolve(tr_reference)));
            imaging::StandardizationStats stats;
            if (!tr_stats.empty()) {
                const auto j = read_json(g.resolve(tr_stats));
                stats = {j.at("mean").get<double>(), j.at("std").get<double>(), j.value("sample_size", 0)};
            } else {
                stats = sample_standardization(*data.views, [&] {
                    std::vector<std::string> ids;
                    for (const auto& r : data.records)
                        for (const auto& v : r.view_ids) ids.push_back(v);
                    return ids;
                }(), spec.train_format, spec.preparation, mix_seed(seed, 3));
            }
            const auto stage = train_ensemble(spec, data, data.records, reference, stats, seed);
            const auto out = g.resolve(tr_out);
            write_json(out / "ensemble.json", scoring::ensemble_to_json(stage.instances, stats, spec.preparation.canvas));
            write_json(out / "fold_plan_filtered.json", cohort::to_json(stage.plan));
            json oof = json::object();
            for (const auto& [w, s] : stage.out_of_fold) oof[w] = s;
            write_json(out / "out_of_fold.json", oof);
            write_text(out / "convergence_filtered.svg", evaluation::svg_traces(stage.convergence, "filtered"));
            write_run_manifest(out / "run_manifest.json",
                               run_manifest("train " + argv_line, cli_config(),
                                            {g.resolve(tr_spec), g.resolve(tr_manifest), g.resolve(tr_reference)},
                                            files_under(out)));
            std::printf("trained %zu instances; best epochs", stage.instances.size());
            for (const auto& i : stage.instances) std::printf(" %d", i.best_epoch);
            std::printf("; spread at CP %.3f\n", stage.convergence.spread_at_cp);
        } else if (*score_cmd) {
            if (sc_ensemble.empty() == sc_plugin.empty())
                throw Error(ErrorCode::InvalidConfig, "give exactly one of --ensemble and --plugin");
            const auto manifest = g.resolve(sc_manifest);
            const auto views = sc_views.empty() ? manifest.parent_path() / "views" : g.resolve(sc_views);
            const auto data = load_dataset("score", manifest, views);
            const auto format = format_arg(sc_format, g.profile_set());
            if (format.count() != 1) throw Error(ErrorCode::InvalidConfig, "--format must name one format");
            const auto out = g.resolve(sc_out);
            scoring::EnsembleScorer ensemble;
            std::vector<fs::path> inputs{manifest};
            if (!sc_ensemble.empty()) {
                ensemble = scoring::ensemble_from_json(read_json(g.resolve(sc_ensemble)));
                inputs.push_back(g.resolve(sc_ensemble));
            } else {
                if (sc_stats == "ensemble") throw Error(ErrorCode::InvalidConfig, "a plugin has no ensemble statistics");
                ensemble.instances.push_back(
                    std::make_shared<scoring::PluginScorer>(g.resolve(sc_plugin), out.parent_path() / "plugin_scratch"));
            }
            const auto kept = cohort::apply_exclusions(data.records).kept;
            PreparationOptions prep;
            prep.canvas = ensemble.canvas;
            prep.workers = g.workers;
            prep.standardization_sample = sc_sample;
            std::vector<std::string> ids;
            for (const auto& r : kept)
                for (const auto& v : r.view_ids) ids.push_back(v);
            const auto stats = sc_stats == "ensemble" ? ensemble.standardization
                                                      : sample_standardization(*data.views, ids, format, prep,
                                                                               mix_seed(sc_seed, 4));
            const auto scores = score_dataset(ensemble, data, kept, format, stats, prep, sc_seed);
            write_text(out, scores_csv(scores));
            write_run_manifest(fs::path(out.string() + ".manifest.json"),
                               run_manifest("score " + argv_line, cli_config(), inputs, {out}));
            std::printf("scored %zu women (%zu excluded) into %s\n", scores.size(), data.records.size() - kept.size(),
                        out.string().c_str());
        } else if (*eval_cmd) {
            const auto records = cohort::read_manifest(g.resolve(ev_manifest));
            const auto scores = parse_scores_csv(read_text(g.resolve(ev_scores)));
            std::map<std::string, const cohort::WomanRecord*> by_id;
            for (const auto& r : records) by_id[r.woman_id] = &r;
            std::vector<cohort::WomanRecord> scored;
            for (const auto& s : scores) {
                auto it = by_id.find(s.woman_id);
                if (it == by_id.end()) throw Error(ErrorCode::InvalidConfig, s.woman_id + " is not in the manifest");
                if (cohort::classify_outcome(*it->second) != s.group)
                    throw Error(ErrorCode::InvalidConfig, "group of " + s.woman_id + " disagrees with the manifest");
                scored.push_back(*it->second);
            }
            evaluation::EvaluationReport report;
            append_evaluation(report, ev_label, scores, scored, ev_flag, true);
            std::vector<fs::path> inputs{g.resolve(ev_scores), g.resolve(ev_manifest)};
            std::optional<evaluation::LabeledScores> other;
            if (!ev_compare.empty()) {
                other = parse_scores_csv(read_text(g.resolve(ev_compare)));
                inputs.push_back(g.resolve(ev_compare));
                append_evaluation(report, ev_compare_label, *other, scored, ev_flag, false);
                for (auto p : {evaluation::Positivity::IC, evaluation::Positivity::LTC, evaluation::Positivity::IcOrLtc,
                               evaluation::Positivity::AllCancers}) {
                    try {
                        report.comparisons.push_back(
                            {ev_compare_label, ev_label, p, true, evaluation::delong_test(*other, scores, p, true)});
                    } catch (const Error& e) {
                        if (e.code() != ErrorCode::DegenerateClasses) throw;
                    }
                }
            }
            const auto out = g.resolve(ev_out);
            std::vector<std::pair<std::string, std::vector<evaluation::RocPoint>>> curves;
            try {
                curves.push_back({ev_label, evaluation::roc_curve(scores, evaluation::Positivity::AllCancers)});
                if (other) curves.push_back({ev_compare_label, evaluation::roc_curve(*other, evaluation::Positivity::AllCancers)});
                write_text(out / "roc.svg", evaluation::svg_roc(curves, ev_label));
            } catch (const Error&) {
                report.notes.push_back("ROC skipped: one class empty");
            }
            write_json(out / "report.json", evaluation::to_json(report));
            write_text(out / "auc_grid.csv", evaluation::auc_grid_csv(report));
            for (const auto& m : report.or_matrices) {
                const std::string tag(evaluation::to_string(m.matrix.event));
                write_text(out / ("or_matrix_" + tag + ".csv"), evaluation::or_matrix_csv(m.matrix));
                write_text(out / ("or_matrix_" + tag + ".svg"), evaluation::svg_or_heatmap(m.matrix, m.label));
            }
            write_run_manifest(out / "run_manifest.json",
                               run_manifest("evaluate " + argv_line, cli_config(), inputs, files_under(out)));
            print_report(ev_label, report);
        } else if (*run_cmd) {
            auto spec = load_spec(g, run_spec);
            spec.preparation.workers = g.workers;
            if (!run_out.empty()) spec.output_dir = g.resolve(run_out);
            if (spec.output_dir.empty()) spec.output_dir = "runs";
            const auto results = run_experiment(spec);
            for (const auto& r : results) print_report(r.label + " seed " + std::to_string(r.seed), r.report);
            std::printf("artifacts in %s\n", (spec.output_dir / spec.name).string().c_str());
        } else if (*tune_cmd) {
            TunerService service(g.resolve(tu_views), g.resolve(tu_profiles), g.resolve(tu_static));
            const int port = service.bind(tu_host, tu_port);
            if (port < 0) throw Error(ErrorCode::Io, "cannot bind " + tu_host + ":" + std::to_string(tu_port));
            g_tuner = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::printf("tuner listening on http://%s:%d/\n", tu_host.c_str(), port);
            std::fflush(stdout);
            service.serve();
            g_tuner = nullptr;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        switch (e.code()) {
            case ErrorCode::InvalidConfig:
            case ErrorCode::ParameterOutOfRange:
                return kExitValidation;
            default:
                return kExitRuntime;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
