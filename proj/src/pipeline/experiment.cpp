#include "texrisk/pipeline/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "texrisk/common/error.hpp"
#include "texrisk/common/parallel.hpp"
#include "texrisk/common/random.hpp"
#include "texrisk/imaging/io.hpp"
#include "texrisk/pipeline/artifacts.hpp"
#include "texrisk/scoring/ensemble.hpp"

namespace texrisk::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;
using evaluation::Positivity;

namespace {

constexpr std::array<Positivity, 4> kReportedPositivities{Positivity::IC, Positivity::LTC, Positivity::IcOrLtc,
                                                          Positivity::AllCancers};

template <class F>
auto staged(const std::string& stage, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), stage + ": " + e.message());
    }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

CancerGroup group_of(const cohort::WomanRecord& r) { return cohort::classify_outcome(r); }

bool has_classes(const evaluation::LabeledScores& s, Positivity p) {
    bool pos = false, neg = false;
    for (const auto& e : s) (evaluation::is_positive(e.group, p) ? pos : neg) = true;
    return pos && neg;
}

std::map<std::string, const cohort::WomanRecord*> index_records(const std::vector<cohort::WomanRecord>& records) {
    std::map<std::string, const cohort::WomanRecord*> out;
    for (const auto& r : records) out[r.woman_id] = &r;
    return out;
}

std::vector<std::string> all_view_ids(const std::vector<cohort::WomanRecord>& records) {
    std::vector<std::string> ids;
    for (const auto& r : records)
        for (const auto& v : r.view_ids) ids.push_back(v);
    return ids;
}

std::optional<evaluation::ConvergenceReport> convergence_of(const std::vector<scoring::TrainedInstance>& instances,
                                                            bool ic) {
    std::vector<evaluation::AucTrace> traces;
    for (const auto& inst : instances) {
        const auto& auc = ic ? inst.auc_ic : inst.auc_all;
        if (auc.empty() || std::any_of(auc.begin(), auc.end(), [](double a) { return !std::isfinite(a); }))
            return std::nullopt;
        traces.push_back({inst.epochs, auc});
    }
    if (traces.empty()) return std::nullopt;
    return evaluation::convergence_report(traces);
}

struct StageContext {
    const ExperimentSpec& spec;
    const Dataset& train;
    const imaging::StandardizationStats& stats;
    std::uint64_t seed;
    FeatureCache* cache;
};

StageResult run_stage(const StageContext& ctx, cohort::CurationStage stage,
                      const std::vector<cohort::WomanRecord>& records, const cohort::ReferenceRiskTable* reference) {
    const auto& spec = ctx.spec;
    const bool filtered = stage == cohort::CurationStage::Filtered;
    const std::uint64_t tag = filtered ? 20 : 10;
    StageResult out;
    out.stage = stage;

    std::vector<cohort::WomanRecord> cases, healthy;
    for (const auto& r : records) (is_cancer(group_of(r)) ? cases : healthy).push_back(r);
    auto match = cohort::match_case_controls(cases, healthy, mix_seed(ctx.seed, tag + 1), spec.controls_per_case,
                                             spec.age_tolerance_years);
    out.dropped_cases = match.dropped;
    std::set<std::string> matched;
    for (const auto& m : match.sets) {
        matched.insert(m.case_id);
        matched.insert(m.control_ids.begin(), m.control_ids.end());
    }
    std::vector<std::string> unmatched;
    for (const auto& r : records)
        if (!matched.count(r.woman_id)) unmatched.push_back(r.woman_id);

    out.plan = cohort::assign_ensemble_folds(records, match.sets, unmatched, stage, reference,
                                             mix_seed(ctx.seed, tag + 2), spec.n_folds);
    out.plan = cohort::exclude_cancer_side_views(std::move(out.plan), records);

    std::set<std::string> bank_ids;
    for (const auto& f : out.plan.folds)
        for (const auto& v : f.training_views) bank_ids.insert(v.view_id);
    const auto bank = prepare_features(ctx.train, {bank_ids.begin(), bank_ids.end()}, spec.train_format,
                                       spec.preparation.augmentations, ctx.stats, spec.preparation, ctx.seed,
                                       ctx.cache);
    const auto by_id = index_records(records);
    std::vector<std::string> val_ids;
    for (const auto& [id, fold] : out.plan.fold_of)
        for (const auto& v : by_id.at(id)->view_ids) val_ids.push_back(v);
    const auto held = prepare_features(ctx.train, val_ids, spec.train_format.member(0), 1, ctx.stats,
                                       spec.preparation, ctx.seed, ctx.cache);

    auto study_views = [&](const std::string& woman) {
        std::vector<scoring::FeatureVector> views;
        for (const auto& v : by_id.at(woman)->view_ids) views.push_back(held.at(v)[0][0]);
        return views;
    };

    for (std::size_t f = 0; f < out.plan.folds.size(); ++f) {
        const auto& fold = out.plan.folds[f];
        scoring::FoldData data;
        for (const auto& v : fold.training_views) {
            data.training.push_back({v.woman_id, v.view_id, is_cancer(group_of(*by_id.at(v.woman_id))) ? 1 : 0,
                                     bank.at(v.view_id)});
        }
        for (const auto& w : fold.validation_women) data.validation.push_back({w, group_of(*by_id.at(w)), study_views(w)});
        auto config = spec.scorer_config;
        config.seed = mix_seed(ctx.seed, (filtered ? 2000 : 1000) + f);
        if (!filtered) {
            config.max_epochs = spec.reference_epochs;
            config.early_stopping = false;
        }
        auto inst = scoring::train_fold_scorer(data, config);
        for (const auto& s : data.validation) out.out_of_fold[s.woman_id] = inst.study_score(s.views);
        out.instances.push_back(std::move(inst));
    }
    out.convergence = *convergence_of(out.instances, false);
    out.convergence_ic = convergence_of(out.instances, true);
    return out;
}

json removed_json(const std::vector<cohort::RemovedRecord>& removed) {
    json arr = json::array();
    for (const auto& r : removed) arr.push_back({{"woman_id", r.record.woman_id}, {"reason", r.reason}, {"risk", r.risk}});
    return arr;
}

json excluded_json(const std::vector<cohort::ExcludedRecord>& excluded) {
    json arr = json::array();
    for (const auto& e : excluded) {
        json reasons = json::array();
        for (auto f : e.reasons) reasons.push_back(cohort::to_string(f));
        arr.push_back({{"woman_id", e.record.woman_id}, {"reasons", reasons}});
    }
    return arr;
}

std::vector<fs::path> write_artifacts(const ExperimentSpec& spec, const ExperimentResult& r) {
    const fs::path dir = spec.output_dir / spec.name / ("seed-" + std::to_string(r.seed));
    std::vector<fs::path> written;
    auto put = [&](const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        written.push_back(dir / name);
    };
    auto put_json = [&](const std::string& name, const json& j) { put(name, j.dump(2) + "\n"); };

    put_json("spec.json", to_json(spec));
    put_json("excluded_train.json", excluded_json(r.excluded_train));
    put_json("excluded_test.json", excluded_json(r.excluded_test));
    auto put_stage = [&](const std::string& name, const StageResult& s) {
        put_json("fold_plan_" + name + ".json", cohort::to_json(s.plan));
        put_json("ensemble_" + name + ".json", scoring::ensemble_to_json(s.instances, r.train_stats, spec.preparation.canvas));
        json j = json::object();
        for (const auto& [w, score] : s.out_of_fold) j[w] = score;
        put_json("out_of_fold_" + name + ".json", j);
        put("convergence_" + name + ".svg", evaluation::svg_traces(s.convergence, "validation AUC, " + name));
    };
    if (r.noise_id) put_stage("noise_id", *r.noise_id);
    if (r.noise_id) put_json("reference_risk.json", cohort::to_json(r.reference));
    if (r.noise_id) put_json("removed.json", removed_json(r.removed));
    if (r.filtered) put_stage("filtered", *r.filtered);
    put("test_scores.csv", scores_csv(r.test_scores));
    if (r.fusion) {
        put_json("fusion.json", r.fusion->to_json());
        put("fusion_scores.csv", scores_csv(*r.fusion_scores));
    }
    put_json("report.json", evaluation::to_json(r.report));
    put("auc_grid.csv", evaluation::auc_grid_csv(r.report));
    for (const auto& m : r.report.or_matrices) {
        const std::string tag(evaluation::to_string(m.matrix.event));
        put("or_matrix_" + tag + ".csv", evaluation::or_matrix_csv(m.matrix));
        put("or_matrix_" + tag + ".svg", evaluation::svg_or_heatmap(m.matrix, m.label));
    }
    std::vector<std::pair<std::string, std::vector<evaluation::RocPoint>>> curves;
    if (has_classes(r.test_scores, Positivity::AllCancers))
        curves.push_back({r.label, evaluation::roc_curve(r.test_scores, Positivity::AllCancers)});
    if (r.fusion_scores && has_classes(*r.fusion_scores, Positivity::AllCancers))
        curves.push_back({r.label + "+rf", evaluation::roc_curve(*r.fusion_scores, Positivity::AllCancers)});
    if (!curves.empty()) put("roc.svg", evaluation::svg_roc(curves, r.label));
    return written;
}

}  // namespace

std::string scores_csv(const evaluation::LabeledScores& scores) {
    std::ostringstream os;
    os << "woman_id,group,score\n";
    char buf[32];
    for (const auto& e : scores) {
        std::snprintf(buf, sizeof buf, "%.17g", e.score);
        os << e.woman_id << ',' << to_string(e.group) << ',' << buf << '\n';
    }
    return os.str();
}

evaluation::LabeledScores parse_scores_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "woman_id,group,score")
        throw Error(ErrorCode::InvalidConfig, "scores CSV must start with woman_id,group,score");
    evaluation::LabeledScores out;
    int n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto a = line.find(',');
        const auto b = line.find(',', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos)
            throw Error(ErrorCode::InvalidConfig, "scores CSV line " + std::to_string(n) + ": expected 3 fields");
        try {
            std::size_t used = 0;
            const auto field = line.substr(b + 1);
            const double score = std::stod(field, &used);
            if (used != field.size()) throw std::invalid_argument(field);
            out.push_back({line.substr(0, a), score, parse_cancer_group(line.substr(a + 1, b - a - 1))});
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidConfig, "scores CSV line " + std::to_string(n) + ": bad score");
        }
    }
    return out;
}

void validate_spec(const ExperimentSpec& spec) {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (spec.name.empty()) bad("name must not be empty");
    if (spec.seeds.empty()) bad("seeds must not be empty");
    if (std::set<std::uint64_t>(spec.seeds.begin(), spec.seeds.end()).size() != spec.seeds.size()) bad("duplicate seed");
    if (spec.n_folds < 2) bad("n_folds must be >= 2");
    if (spec.controls_per_case < 1) bad("controls_per_case must be >= 1");
    if (spec.age_tolerance_years < 0) bad("age_tolerance_years must be >= 0");
    if (spec.reference_epochs < 1) bad("reference_epochs must be >= 1");
    if (!(spec.healthy_removal_fraction >= 0.0 && spec.healthy_removal_fraction < 1.0))
        bad("healthy_removal_fraction must lie in [0,1)");
    if (!(spec.case_removal_fraction >= 0.0 && spec.case_removal_fraction < 1.0))
        bad("case_removal_fraction must lie in [0,1)");
    if (!(spec.flag_fraction > 0.0 && spec.flag_fraction < 1.0)) bad("flag_fraction must lie in (0,1)");
    if (spec.preparation.augmentations < 1) bad("augmentations must be >= 1");
    if (spec.preparation.standardization_sample < 1) bad("standardization_sample must be >= 1");
    if (spec.preparation.workers < 1) bad("workers must be >= 1");
    for (const auto* f : {&spec.train_format, &spec.test_format})
        if (f->kind == DataFormat::Kind::FlavorSet && f->profiles.empty()) bad("flavor set must not be empty");
    if (spec.test_format.count() != 1) bad("test_format must be a single format");
    if (spec.use_flavor_augmentation && spec.train_format.kind != DataFormat::Kind::FlavorSet)
        bad("use_flavor_augmentation needs a flavor-set train_format");
    if (!spec.use_flavor_augmentation && spec.train_format.count() > 1)
        bad("several train flavors need use_flavor_augmentation");
    scoring::validate_config(spec.scorer_config);
    for (const auto& [p, what] : {std::pair{spec.train_manifest, "train manifest"}, {spec.train_views, "train views"},
                                  {spec.test_manifest, "test manifest"}, {spec.test_views, "test views"}}) {
        if (!p.empty() && !fs::exists(p)) bad(std::string(what) + " not found: " + p.string());
    }
    if (spec.scorer.kind == ScorerChoice::Kind::Plugin && !fs::exists(spec.scorer.plugin))
        bad("plugin not found: " + spec.scorer.plugin.string());
}

json to_json(const ExperimentSpec& s) {
    json seeds = json::array();
    for (auto x : s.seeds) seeds.push_back(x);
    json scorer = s.scorer.kind == ScorerChoice::Kind::Plugin ? json{{"plugin", s.scorer.plugin.string()}}
                                                              : json("baseline");
    return {{"name", s.name},
            {"train", {{"name", s.train_name}, {"manifest", s.train_manifest.string()}, {"views", s.train_views.string()}}},
            {"test", {{"name", s.test_name}, {"manifest", s.test_manifest.string()}, {"views", s.test_views.string()}}},
            {"train_format", to_json(s.train_format)},
            {"test_format", to_json(s.test_format)},
            {"use_flavor_augmentation", s.use_flavor_augmentation},
            {"use_risk_factors", s.use_risk_factors},
            {"seeds", seeds},
            {"scorer", scorer},
            {"scorer_config", scoring::to_json(s.scorer_config)},
            {"reference_epochs", s.reference_epochs},
            {"controls_per_case", s.controls_per_case},
            {"age_tolerance_years", s.age_tolerance_years},
            {"n_folds", s.n_folds},
            {"healthy_removal_fraction", s.healthy_removal_fraction},
            {"case_removal_fraction", s.case_removal_fraction},
            {"preparation",
             {{"augmentations", s.preparation.augmentations},
              {"standardization_sample", s.preparation.standardization_sample},
              {"workers", s.preparation.workers},
              {"canvas",
               {{"spacing_mm", s.preparation.canvas.spacing_mm},
                {"rows", s.preparation.canvas.rows},
                {"cols", s.preparation.canvas.cols}}}}},
            {"fusion", scoring::to_json(s.fusion)},
            {"flag_fraction", s.flag_fraction},
            {"output_dir", s.output_dir.string()}};
}

ExperimentSpec experiment_spec_from_json(const json& j, const std::vector<imaging::FlavorProfile>& profiles,
                                         const fs::path& base_dir) {
    static const std::set<std::string> known{"name", "train", "test", "train_format", "test_format",
                                             "use_flavor_augmentation", "use_risk_factors", "seeds", "scorer",
                                             "scorer_config", "reference_epochs", "controls_per_case",
                                             "age_tolerance_years", "n_folds", "healthy_removal_fraction",
                                             "case_removal_fraction", "preparation", "fusion", "flag_fraction",
                                             "output_dir"};
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "experiment spec must be an object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw Error(ErrorCode::InvalidConfig, "unknown experiment key '" + k + "'");
    ExperimentSpec s;
    try {
        s.name = j.value("name", s.name);
        auto dataset = [&](const char* key, std::string& name, fs::path& manifest, fs::path& views) {
            if (!j.contains(key)) return;
            const auto& d = j.at(key);
            name = d.value("name", name);
            manifest = resolve(d.value("manifest", std::string{}), base_dir);
            views = resolve(d.value("views", std::string{}), base_dir);
            if (!manifest.empty() && views.empty()) views = manifest.parent_path() / "views";
        };
        dataset("train", s.train_name, s.train_manifest, s.train_views);
        dataset("test", s.test_name, s.test_manifest, s.test_views);
        if (j.contains("train_format")) s.train_format = parse_data_format(j.at("train_format"), profiles);
        if (j.contains("test_format")) s.test_format = parse_data_format(j.at("test_format"), profiles);
        s.use_flavor_augmentation = j.value("use_flavor_augmentation", s.use_flavor_augmentation);
        s.use_risk_factors = j.value("use_risk_factors", s.use_risk_factors);
        if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("scorer")) {
            const auto& sc = j.at("scorer");
            if (sc.is_string() && sc.get<std::string>() == "baseline") {
                s.scorer = {};
            } else if (sc.is_object() && sc.contains("plugin")) {
                s.scorer = {ScorerChoice::Kind::Plugin, resolve(sc.at("plugin").get<std::string>(), base_dir)};
            } else {
                throw Error(ErrorCode::InvalidConfig, "scorer must be \"baseline\" or {\"plugin\": path}");
            }
        }
        if (j.contains("scorer_config")) s.scorer_config = scoring::scorer_config_from_json(j.at("scorer_config"));
        s.reference_epochs = j.value("reference_epochs", s.reference_epochs);
        s.controls_per_case = j.value("controls_per_case", s.controls_per_case);
        s.age_tolerance_years = j.value("age_tolerance_years", s.age_tolerance_years);
        s.n_folds = j.value("n_folds", s.n_folds);
        s.healthy_removal_fraction = j.value("healthy_removal_fraction", s.healthy_removal_fraction);
        s.case_removal_fraction = j.value("case_removal_fraction", s.case_removal_fraction);
        if (j.contains("preparation")) {
            const auto& p = j.at("preparation");
            s.preparation.augmentations = p.value("augmentations", s.preparation.augmentations);
            s.preparation.standardization_sample = p.value("standardization_sample", s.preparation.standardization_sample);
            s.preparation.workers = p.value("workers", s.preparation.workers);
            if (p.contains("canvas")) {
                const auto& c = p.at("canvas");
                s.preparation.canvas.spacing_mm = c.value("spacing_mm", s.preparation.canvas.spacing_mm);
                s.preparation.canvas.rows = c.value("rows", s.preparation.canvas.rows);
                s.preparation.canvas.cols = c.value("cols", s.preparation.canvas.cols);
            }
        }
        if (j.contains("fusion")) s.fusion = scoring::fusion_config_from_json(j.at("fusion"));
        s.flag_fraction = j.value("flag_fraction", s.flag_fraction);
        if (j.contains("output_dir")) s.output_dir = resolve(j.at("output_dir").get<std::string>(), base_dir);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("experiment spec: ") + e.what());
    }
    return s;
}

std::string result_label(const ExperimentSpec& spec) {
    return "R^{" + spec.train_name + "->" + spec.test_name + "}_{" + spec.train_format.label() + "->" +
           spec.test_format.label() + "}";
}

void append_evaluation(evaluation::EvaluationReport& report, const std::string& label,
                    const evaluation::LabeledScores& scores, const std::vector<cohort::WomanRecord>& test_records,
                    double flag_fraction, bool with_or) {
    for (auto p : kReportedPositivities) {
        if (has_classes(scores, p))
            report.aucs.push_back({label, evaluation::compute_auc(scores, p)});
        else
            report.notes.push_back(label + ": AUC(" + std::string(evaluation::to_string(p)) + ") undefined, one class empty");
    }
    if (scores.size() >= 2) {
        evaluation::NamedFlagging nf{label, evaluation::flag_top_fraction(scores, flag_fraction), std::nullopt};
        if (has_classes(scores, Positivity::AllCancers))
            nf.sensitivity_at_90_specificity = evaluation::sensitivity_at_specificity(scores, Positivity::AllCancers, 0.9);
        report.flagging.push_back(std::move(nf));
    }
    if (!with_or) return;
    const auto by_id = index_records(test_records);
    std::vector<evaluation::OrInput> women;
    for (const auto& e : scores) women.push_back({e.woman_id, e.score, by_id.at(e.woman_id)->pmd, e.group});
    for (auto p : {Positivity::IC, Positivity::LTC}) {
        if (!has_classes(scores, p)) continue;
        try {
            report.or_matrices.push_back({label + " " + std::string(evaluation::to_string(p)),
                                          evaluation::quantile_or_matrix(women, p)});
        } catch (const Error& e) {
            report.notes.push_back(label + ": OR matrix (" + std::string(evaluation::to_string(p)) + ") skipped: " +
                                   e.message());
        }
    }
}


CurationOutcome curate(const ExperimentSpec& spec, const Dataset& train, std::uint64_t seed, FeatureCache* cache) {
    CurationOutcome out;
    auto ex = staged("exclusions", [&] { return cohort::apply_exclusions(train.records); });
    out.excluded = ex.excluded;
    out.train_stats = staged("standardization", [&] {
        return sample_standardization(*train.views, all_view_ids(ex.kept), spec.train_format, spec.preparation,
                                      mix_seed(seed, 3));
    });
    const StageContext ctx{spec, train, out.train_stats, seed, cache};
    out.noise_id =
        staged("noise-identification", [&] { return run_stage(ctx, cohort::CurationStage::NoiseId, ex.kept, nullptr); });
    out.reference.entries = out.noise_id.out_of_fold;
    out.reference.source = "noise-identification out-of-fold, seed " + std::to_string(seed);
    auto filtered = staged("filtering", [&] {
        return cohort::filter_noisy_samples(ex.kept, out.reference, spec.healthy_removal_fraction,
                                            spec.case_removal_fraction);
    });
    out.removed = std::move(filtered.removed);
    out.kept = std::move(filtered.kept);
    return out;
}

StageResult train_ensemble(const ExperimentSpec& spec, const Dataset& train,
                           const std::vector<cohort::WomanRecord>& records, const cohort::ReferenceRiskTable& reference,
                           const imaging::StandardizationStats& stats, std::uint64_t seed, FeatureCache* cache) {
    const StageContext ctx{spec, train, stats, seed, cache};
    return staged("training", [&] { return run_stage(ctx, cohort::CurationStage::Filtered, records, &reference); });
}

evaluation::LabeledScores score_dataset(const scoring::EnsembleScorer& ensemble, const Dataset& data,
                                        const std::vector<cohort::WomanRecord>& records, const DataFormat& format,
                                        const imaging::StandardizationStats& stats, const PreparationOptions& options,
                                        std::uint64_t seed, FeatureCache* cache) {
    return staged("scoring", [&] {
        if (format.count() != 1) throw Error(ErrorCode::InvalidConfig, "scoring needs a single format");
        if (ensemble.instances.empty()) throw Error(ErrorCode::InvalidConfig, "ensemble has no instances");
        const auto ids = all_view_ids(records);
        std::vector<const scoring::TrainedInstance*> mlps;
        for (const auto& s : ensemble.instances)
            if (const auto* m = dynamic_cast<const scoring::MlpViewScorer*>(s.get())) mlps.push_back(&m->instance());
        std::vector<std::vector<double>> per_view;  // [instance][view]
        if (mlps.size() == ensemble.instances.size()) {
            const auto table = prepare_features(data, ids, format, 1, stats, options, seed, cache);
            for (const auto* inst : mlps) {
                std::vector<double> scores;
                for (const auto& id : ids) scores.push_back(inst->predict(table.at(id)[0][0]));
                per_view.push_back(std::move(scores));
            }
        } else {
            std::vector<scoring::StandardizedView> views(ids.size());
            parallel_for(ids.size(), options.workers, [&](std::size_t v) {
                const auto view = render(data.views->load(ids[v]), format, 0);
                views[v] = scoring::standardize(scoring::to_canvas(view, options.canvas, {}, ids[v]), stats);
            });
            for (const auto& s : ensemble.instances) per_view.push_back(s->score(views));
        }
        evaluation::LabeledScores out;
        for (std::size_t w = 0; w < records.size(); ++w) {
            std::vector<std::string> views(ids.begin() + 4 * w, ids.begin() + 4 * w + 4);
            std::vector<std::vector<double>> inst(per_view.size());
            for (std::size_t i = 0; i < per_view.size(); ++i)
                inst[i].assign(per_view[i].begin() + 4 * w, per_view[i].begin() + 4 * w + 4);
            out.push_back({records[w].woman_id, scoring::aggregate_scores(views, inst).study_score,
                           group_of(records[w])});
        }
        return out;
    });
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const Dataset& train, const Dataset& test,
                                std::uint64_t seed, FeatureCache* cache) {
    staged("config", [&] {
        validate_spec(spec);
        return 0;
    });
    ExperimentResult r;
    r.label = result_label(spec);
    r.seed = seed;
    const bool plugin = spec.scorer.kind == ScorerChoice::Kind::Plugin;

    auto test_ex = staged("exclusions", [&] { return cohort::apply_exclusions(test.records); });
    r.excluded_test = test_ex.excluded;
    const auto& test_records = test_ex.kept;
    if (test_records.empty()) throw Error(ErrorCode::NoViews, "scoring: no test women after exclusions");
    // fails fast on a format the test views cannot take
    r.test_stats = staged("standardization", [&] {
        return sample_standardization(*test.views, all_view_ids(test_records), spec.test_format, spec.preparation,
                                      mix_seed(seed, 4));
    });

    scoring::EnsembleScorer ensemble;
    ensemble.canvas = spec.preparation.canvas;
    ensemble.config = spec.scorer_config;
    std::vector<cohort::WomanRecord> train_kept;
    if (plugin) {
        const fs::path scratch = spec.output_dir.empty() ? fs::path{} : spec.output_dir / spec.name / "plugin";
        ensemble.instances.push_back(std::make_shared<scoring::PluginScorer>(spec.scorer.plugin, scratch));
    } else {
        auto cur = curate(spec, train, seed, cache);
        r.excluded_train = std::move(cur.excluded);
        r.train_stats = cur.train_stats;
        r.noise_id = std::move(cur.noise_id);
        r.reference = std::move(cur.reference);
        r.removed = std::move(cur.removed);
        train_kept = std::move(cur.kept);
        r.filtered = train_ensemble(spec, train, train_kept, r.reference, r.train_stats, seed, cache);
        ensemble.standardization = r.train_stats;
        for (const auto& inst : r.filtered->instances)
            ensemble.instances.push_back(std::make_shared<scoring::MlpViewScorer>(inst));
    }
    r.test_scores = score_dataset(ensemble, test, test_records, spec.test_format, r.test_stats, spec.preparation, seed,
                                  cache);

    if (spec.use_risk_factors && !plugin) {
        staged("fusion", [&] {
            const auto by_id = index_records(train_kept);
            std::vector<scoring::FusionInput> inputs;
            std::vector<int> labels;
            for (const auto& [w, score] : r.filtered->out_of_fold) {
                const auto& rec = *by_id.at(w);
                inputs.push_back({score, static_cast<double>(rec.age_years), rec.has_clips, rec.pmd});
                labels.push_back(is_cancer(group_of(rec)) ? 1 : 0);
            }
            auto cfg = spec.fusion;
            cfg.seed = mix_seed(seed, 5);
            r.fusion = scoring::train_fusion(inputs, labels, cfg);
            evaluation::LabeledScores fused;
            for (std::size_t w = 0; w < test_records.size(); ++w) {
                const auto& rec = test_records[w];
                fused.push_back({rec.woman_id,
                                 r.fusion->predict({r.test_scores[w].score, static_cast<double>(rec.age_years),
                                                    rec.has_clips, rec.pmd}),
                                 r.test_scores[w].group});
            }
            r.fusion_scores = std::move(fused);
            return 0;
        });
    }

    staged("evaluation", [&] {
        auto& rep = r.report;
        append_evaluation(rep, r.label, r.test_scores, test_records, spec.flag_fraction, true);
        if (r.fusion_scores) {
            const auto fused_label = r.label + "+rf";
            append_evaluation(rep, fused_label, *r.fusion_scores, test_records, spec.flag_fraction, false);
            for (auto p : kReportedPositivities) {
                if (!has_classes(r.test_scores, p)) continue;
                rep.comparisons.push_back(
                    {fused_label, r.label, p, true, evaluation::delong_test(*r.fusion_scores, r.test_scores, p, true)});
            }
            for (const auto& w : r.fusion->warnings) rep.notes.push_back("fusion: " + w);
        }
        auto add_stage = [&](const std::string& name, const StageResult& s) {
            rep.convergence.push_back({name + " all cancers", s.convergence});
            if (s.convergence_ic) rep.convergence.push_back({name + " IC", *s.convergence_ic});
            if (!s.dropped_cases.empty())
                rep.notes.push_back(name + ": " + std::to_string(s.dropped_cases.size()) +
                                    " cases without enough controls validate only");
        };
        if (r.noise_id) add_stage("noise-identification", *r.noise_id);
        if (r.filtered) add_stage("filtered", *r.filtered);
        if (!r.removed.empty()) rep.notes.push_back("filtering removed " + std::to_string(r.removed.size()) + " women");
        if (plugin) rep.notes.push_back("plugin scorer: curation and training skipped, test set scored only");
        if (!r.excluded_test.empty())
            rep.notes.push_back(std::to_string(r.excluded_test.size()) + " test women excluded");
        return 0;
    });

    if (!spec.output_dir.empty()) r.artifacts = staged("artifacts", [&] { return write_artifacts(spec, r); });
    return r;
}

std::vector<ExperimentResult> run_experiment(const ExperimentSpec& spec) {
    staged("config", [&] {
        validate_spec(spec);
        for (const auto& p : {spec.train_manifest, spec.test_manifest})
            if (p.empty()) throw Error(ErrorCode::InvalidConfig, "train and test manifests are required");
        return 0;
    });
    const auto train = staged("loading", [&] { return load_dataset(spec.train_name, spec.train_manifest, spec.train_views); });
    const bool same = spec.train_manifest == spec.test_manifest && spec.train_views == spec.test_views &&
                      spec.train_name == spec.test_name;
    const auto test =
        same ? train : staged("loading", [&] { return load_dataset(spec.test_name, spec.test_manifest, spec.test_views); });
    FeatureCache cache;
    std::vector<ExperimentResult> results;
    for (auto seed : spec.seeds) results.push_back(run_experiment(spec, train, test, seed, &cache));
    if (!spec.output_dir.empty()) {
        std::vector<fs::path> artifacts;
        for (const auto& r : results) artifacts.insert(artifacts.end(), r.artifacts.begin(), r.artifacts.end());
        json summary = json::array();
        for (const auto& r : results) summary.push_back({{"seed", r.seed}, {"report", evaluation::to_json(r.report)}});
        const auto summary_path = spec.output_dir / spec.name / "summary.json";
        write_json(summary_path, summary);
        artifacts.push_back(summary_path);
        write_run_manifest(spec.output_dir / spec.name / "run_manifest.json",
                           run_manifest("run", to_json(spec), {spec.train_manifest, spec.test_manifest}, artifacts));
    }
    return results;
}

}  // namespace texrisk::pipeline
