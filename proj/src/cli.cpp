#include "densel/cli.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "densel/config.hpp"
#include "densel/errors.hpp"
#include "densel/features.hpp"
#include "densel/ingest.hpp"
#include "densel/matching.hpp"
#include "densel/metrics.hpp"
#include "densel/pipeline.hpp"
#include "densel/predictor.hpp"
#include "densel/selector.hpp"
#include "densel/synthetic.hpp"

namespace fs = std::filesystem;

namespace densel::cli {

std::string sha256Hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw InvariantError("SHA-256 digest failed");
    std::string hex;
    for (unsigned int i = 0; i < length; ++i)
        hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

namespace {

const std::set<std::string>& runKeys()
{
    static const std::set<std::string> keys{
        "mode", "ref1", "ref2", "qry1",
        "training_matrix", "evaluation_matrix", "swapped_training_matrix", "swapped_evaluation_matrix",
        "training_matches", "evaluation_matches", "swapped_training_matches",
        "swapped_evaluation_matches", "synthetic_spec", "dataset_config", "segment_length_d",
        "gt_tolerance_tau", "rate_grid", "distance_metric", "r_target", "rar_target", "r_targets",
        "rar_targets", "baseline_rate", "lambda", "seed", "d_values"};
    return keys;
}

struct Options
{
    std::string command;
    fs::path configPath;
    fs::path outDir = "densel_out";
    std::optional<long long> seed;
    std::vector<std::string> overrides;
    bool quiet = false;
};

/* Everything a subcommand needs, resolved from the config file and flags. */
struct RunContext
{
    Options opts;
    KeyValueConfig config;
    fs::path baseDir;
    DatasetConfig dataset;
    SelectionConfig selection;
    SweepSpec sweep;
    double lambda = kDefaultLambda;
    std::shared_ptr<AccessLog> log = std::make_shared<AccessLog>();
    std::map<std::string, std::string> artifacts; // name -> contents
};

fs::path resolve(const RunContext& ctx, const std::string& key)
{
    const auto value = ctx.config.find(key);
    if (!value)
        throw ConfigError(fmt::format("config key '{}' is required for mode '{}'", key,
                                      ctx.config.getString("mode", "descriptors")));
    fs::path p(*value);
    return p.is_absolute() ? p : ctx.baseDir / p;
}

RunContext loadContext(const Options& opts)
{
    RunContext ctx;
    ctx.opts = opts;
    ctx.config = KeyValueConfig::load(opts.configPath);
    ctx.baseDir = opts.configPath.parent_path();
    for (const auto& o : opts.overrides)
        ctx.config.applyOverride(o);
    if (opts.seed)
        ctx.config.set("seed", std::to_string(*opts.seed));

    if (const auto extra = ctx.config.find("dataset_config")) {
        fs::path p(*extra);
        ctx.config.mergeDefaults(KeyValueConfig::load(p.is_absolute() ? p : ctx.baseDir / p));
    }
    for (const auto& [key, value] : ctx.config.entries())
        if (!runKeys().contains(key))
            throw ConfigError(fmt::format("unknown config key '{}'", key));

    ctx.dataset = DatasetConfig::fromConfig(ctx.config);
    ctx.selection.rTarget = ctx.config.getDouble("r_target", ctx.selection.rTarget);
    ctx.selection.rarTarget = ctx.config.getDouble("rar_target", ctx.selection.rarTarget);
    ctx.selection.validate();
    if (ctx.config.has("r_targets"))
        ctx.sweep.rTargets = ctx.config.getDoubleList("r_targets");
    if (ctx.config.has("rar_targets"))
        ctx.sweep.rarTargets = ctx.config.getDoubleList("rar_targets");
    ctx.sweep.baselineRate =
        static_cast<int>(ctx.config.getInt("baseline_rate", ctx.sweep.baselineRate));
    // the sweep grid only matters to commands that run sweeps
    if (opts.command == "sweep" || opts.command.rfind("ablate-", 0) == 0)
        ctx.sweep.validate(ctx.dataset);
    ctx.lambda = ctx.config.getDouble("lambda", kDefaultLambda);
    if (!(ctx.lambda >= 0.0))
        throw ConfigError(fmt::format("lambda must be non-negative, got {}", ctx.lambda));
    if (ctx.config.getInt("seed", 0) < 0)
        throw ConfigError("seed must be non-negative");
    return ctx;
}

MatchProviderPtr lazy(RunContext& ctx, const std::string& name, LazyMatchProvider::Factory f)
{
    return std::make_shared<LazyMatchProvider>(name, std::move(f), ctx.log);
}

/*
 * Builds the four pairings for the configured input mode. Every pair is
 * loaded on first use, so a command only reads the files it needs and the
 * query traversal stays untouched until evaluation.
 */
Scenario buildScenario(RunContext& ctx)
{
    const auto mode = ctx.config.getString("mode", "descriptors");
    Scenario s;
    if (mode == "descriptors") {
        auto cache = std::make_shared<std::map<std::string, std::shared_ptr<const Traversal>>>();
        auto traversal = [&ctx, cache](const std::string& key, TraversalRole role) {
            auto it = cache->find(key);
            if (it == cache->end())
                it = cache->emplace(key, std::make_shared<Traversal>(loadTraversal(resolve(ctx, key), role)))
                         .first;
            return it->second;
        };
        const auto metric = ctx.dataset.metric;
        auto pair = [&, traversal, metric](std::string refs, TraversalRole refRole, std::string queries,
                                           TraversalRole queryRole) {
            return [=]() -> MatchProviderPtr {
                return std::make_shared<DescriptorMatchProvider>(traversal(refs, refRole),
                                                                 traversal(queries, queryRole), metric);
            };
        };
        s.training = lazy(ctx, "ref2-vs-ref1", pair("ref1", TraversalRole::Ref1, "ref2", TraversalRole::Ref2));
        s.evaluation = lazy(ctx, "qry1-vs-ref1", pair("ref1", TraversalRole::Ref1, "qry1", TraversalRole::Qry1));
        s.swappedTraining =
            lazy(ctx, "ref1-vs-ref2", pair("ref2", TraversalRole::Ref2, "ref1", TraversalRole::Ref1));
        s.swappedEvaluation =
            lazy(ctx, "qry1-vs-ref2", pair("ref2", TraversalRole::Ref2, "qry1", TraversalRole::Qry1));
    } else if (mode == "matrices" || mode == "matches") {
        const bool matrices = mode == "matrices";
        auto pair = [&ctx, matrices](const std::string& name, const std::string& stem) {
            const auto key = stem + (matrices ? "_matrix" : "_matches");
            return lazy(ctx, name, [&ctx, key, name, matrices]() -> MatchProviderPtr {
                const auto path = resolve(ctx, key);
                if (matrices)
                    return std::make_shared<MatrixMatchProvider>(name, loadDistanceMatrix(path));
                return loadMatchTables(path, name);
            });
        };
        s.training = pair("ref2-vs-ref1", "training");
        s.evaluation = pair("qry1-vs-ref1", "evaluation");
        s.swappedTraining = pair("ref1-vs-ref2", "swapped_training");
        s.swappedEvaluation = pair("qry1-vs-ref2", "swapped_evaluation");
    } else if (mode == "synthetic") {
        auto spec = SyntheticEnvSpec::load(resolve(ctx, "synthetic_spec"));
        if (ctx.config.has("seed"))
            spec.seed = static_cast<std::uint64_t>(ctx.config.getInt("seed"));
        auto env = std::make_shared<SyntheticEnvironment>(generateSynthetic(spec));
        auto wrap = [&](const std::string& name, MatchProviderPtr p) {
            return lazy(ctx, name, [env, p] { return p; });
        };
        s.training = wrap("ref2-vs-ref1", env->scenario.training);
        s.evaluation = wrap("qry1-vs-ref1", env->scenario.evaluation);
        s.swappedTraining = wrap("ref1-vs-ref2", env->scenario.swappedTraining);
        s.swappedEvaluation = wrap("qry1-vs-ref2", env->scenario.swappedEvaluation);
    } else {
        throw ConfigError(fmt::format(
            "mode must be descriptors, matrices, matches or synthetic, got '{}'", mode));
    }
    return s;
}

void writeArtifacts(const RunContext& ctx)
{
    std::error_code ec;
    fs::create_directories(ctx.opts.outDir, ec);
    if (ec)
        throw IoError(fmt::format("cannot create output directory {}: {}", ctx.opts.outDir.string(),
                                  ec.message()));

    nlohmann::ordered_json manifest;
    manifest["command"] = ctx.opts.command;
    manifest["config"] = nlohmann::ordered_json::object();
    for (const auto& [key, value] : ctx.config.entries())
        manifest["config"][key] = value;
    manifest["overrides"] = ctx.opts.overrides;
    manifest["seed"] = ctx.config.getInt("seed", 0);
    manifest["artifacts"] = nlohmann::ordered_json::object();
    for (const auto& [name, contents] : ctx.artifacts) {
        writeTextFile(ctx.opts.outDir / name, contents);
        manifest["artifacts"][name] = sha256Hex(contents);
    }
    writeTextFile(ctx.opts.outDir / "manifest.json", manifest.dump(2) + "\n");
}

std::string rarTable(const std::map<int, double>& rarByRate)
{
    std::string out;
    for (const auto& [rate, value] : rarByRate)
        out += fmt::format("  k={:<3} RAR={:.6f}\n", rate, value);
    return out;
}

void trainingDumps(const Phase1Model& model, RunContext& ctx)
{
    std::string features = "segment_index,rate_k,x1,x2,x3,x4\n";
    std::string recalls = "segment_index,rate_k,recall,n_queries\n";
    std::vector<RarReport> rars;
    for (const auto& [rate, analysis] : model.rates) {
        features += featuresCsv(analysis.features, false);
        recalls += segmentRecallCsv(analysis.recalls, false);
        rars.push_back(RarReport{rate, ctx.selection.rTarget,
                                 predictedRar(analysis.predictions, ctx.selection.rTarget),
                                 RarKind::Predicted});
    }
    ctx.artifacts["features.csv"] = features;
    ctx.artifacts["recalls.csv"] = recalls;
    ctx.artifacts["predicted_rar.csv"] = rarReportCsv(rars);
    ctx.artifacts["models.txt"] = serializePredictors(model.predictors);
}

int cmdSelect(RunContext& ctx, std::ostream& out)
{
    const auto scenario = buildScenario(ctx);
    const auto result = phase1(*scenario.training, ctx.dataset, ctx.selection, ctx.lambda);
    trainingDumps(result.model, ctx);
    ctx.artifacts["selection.json"] = selectionJson(result.selection);
    writeArtifacts(ctx);
    if (!ctx.opts.quiet)
        out << fmt::format("chosen k* = {} ({}), r_target {:.2f}, rar_target {:.2f}\n{}",
                           result.selection.chosenRate,
                           result.selection.feasible ? "feasible" : "fallback: no rate meets the target",
                           ctx.selection.rTarget, ctx.selection.rarTarget,
                           rarTable(result.selection.rarByRate));
    return kOk;
}

int cmdEvaluate(RunContext& ctx, std::ostream& out)
{
    const auto scenario = buildScenario(ctx);
    const auto p1 = phase1(*scenario.training, ctx.dataset, ctx.selection, ctx.lambda);
    const auto p2 = phase2(*scenario.evaluation, p1.curated, ctx.dataset, ctx.selection);
    trainingDumps(p1.model, ctx);
    ctx.artifacts["selection.json"] = selectionJson(p1.selection);
    ctx.artifacts["query_recalls.csv"] = segmentRecallCsv(p2.recalls);

    nlohmann::ordered_json j;
    j["chosen_rate"] = p2.rateK;
    j["r_target"] = ctx.selection.rTarget;
    j["rar_target"] = ctx.selection.rarTarget;
    j["predicted_rar"] = p1.selection.rarByRate.at(p1.selection.chosenRate);
    j["achieved_rar"] = p2.achievedRar;
    j["mean_recall"] = p2.meanRecall;
    j["excluded_segments"] = p2.excludedSegments;
    ctx.artifacts["evaluation.json"] = j.dump(2) + "\n";
    writeArtifacts(ctx);
    if (!ctx.opts.quiet)
        out << fmt::format("chosen k* = {}: predicted RAR {:.6f}, achieved RAR {:.6f}, mean R@1 {:.6f}\n",
                           p2.rateK, p1.selection.rarByRate.at(p1.selection.chosenRate),
                           p2.achievedRar, p2.meanRecall);
    return kOk;
}

void summarizeSweep(const SweepReport& report, std::ostream& out)
{
    std::size_t ours = 0;
    std::size_t base = 0;
    for (const auto& row : report.rows) {
        ours += row.oursSuccesses;
        base += row.baselineSuccesses;
    }
    const auto cells = report.cells.size();
    const auto baseline = report.cells.empty() ? 0 : report.cells.front().baselineRate;
    out << fmt::format("ours:      success {}/{}  MAD {:.6f}\n", ours, cells, report.madOurs);
    out << fmt::format("k={:<3} baseline: success {}/{}  MAD {:.6f}\n", baseline, base, cells,
                       report.madBaseline);
}

int cmdSweep(RunContext& ctx, std::ostream& out)
{
    const auto scenario = buildScenario(ctx);
    const auto report = runSweep(scenario, ctx.dataset, ctx.sweep, ctx.lambda, ctx.log.get());
    ctx.artifacts["sweep.csv"] = sweepCsv(report);
    ctx.artifacts["mad.csv"] = madCsv(report);
    ctx.artifacts["deviations.csv"] = deviationsCsv(report, ctx.sweep);
    writeArtifacts(ctx);
    if (!ctx.opts.quiet)
        summarizeSweep(report, out);
    return kOk;
}

int cmdAblateSwap(RunContext& ctx, std::ostream& out)
{
    const auto scenario = buildScenario(ctx);
    const auto ablation = ablationSwap(scenario, ctx.dataset, ctx.sweep, ctx.lambda);
    ctx.artifacts["swap.csv"] = swapCsv(ablation);
    ctx.artifacts["sweep_original.csv"] = sweepCsv(ablation.original);
    ctx.artifacts["sweep_swapped.csv"] = sweepCsv(ablation.swapped);
    writeArtifacts(ctx);
    if (!ctx.opts.quiet) {
        out << "original references:\n";
        summarizeSweep(ablation.original, out);
        out << "swapped references:\n";
        summarizeSweep(ablation.swapped, out);
    }
    return kOk;
}

int cmdAblateSegment(RunContext& ctx, std::ostream& out)
{
    const auto scenario = buildScenario(ctx);
    const auto lengths = ctx.config.has("d_values")
                             ? ctx.config.getDoubleList("d_values")
                             : std::vector<double>{50, 100, 150, 200, 250, 300};
    const auto runs = ablationSegmentLength(scenario, ctx.dataset, lengths, ctx.sweep, ctx.lambda);
    std::string summary = "segment_length_m,segment_count,method,mad,successes,cells\n";
    for (const auto& run : runs) {
        std::size_t ours = 0;
        std::size_t base = 0;
        for (const auto& row : run.report.rows) {
            ours += row.oursSuccesses;
            base += row.baselineSuccesses;
        }
        const auto cells = run.report.cells.size();
        summary += fmt::format("{:.6f},{},ours,{:.6f},{},{}\n", run.segmentLengthM,
                               run.report.segmentCount, run.report.madOurs, ours, cells);
        summary += fmt::format("{:.6f},{},baseline,{:.6f},{},{}\n", run.segmentLengthM,
                               run.report.segmentCount, run.report.madBaseline, base, cells);
        ctx.artifacts[fmt::format("deviations_d{:g}.csv", run.segmentLengthM)] =
            deviationsCsv(run.report, ctx.sweep);
        if (!ctx.opts.quiet)
            out << fmt::format("d={:g} m: {} segments, MAD ours {:.6f}, baseline {:.6f}\n",
                               run.segmentLengthM, run.report.segmentCount, run.report.madOurs,
                               run.report.madBaseline);
    }
    ctx.artifacts["segment_length.csv"] = summary;
    writeArtifacts(ctx);
    return kOk;
}

int cmdValidate(RunContext& ctx, std::ostream& out)
{
    const auto scenario = buildScenario(ctx);
    // touching every pair forces each input to load and validate
    const std::pair<const char*, const MatchProviderPtr*> pairs[] = {
        {"training", &scenario.training}, {"evaluation", &scenario.evaluation}};
    for (const auto& [label, provider] : pairs) {
        const auto& p = **provider;
        const auto segments = segmentPositions(p.queryPositions(), ctx.dataset.segmentLengthM);
        if (!ctx.opts.quiet)
            out << fmt::format("{} ({}): {} queries, {} segments\n", label, p.name(),
                               p.queryPositions().size(), segments.size());
    }
    if (!ctx.opts.quiet)
        out << "ok\n";
    return kOk;
}

int cmdSynth(const Options& opts, std::ostream& out)
{
    auto config = KeyValueConfig::load(opts.configPath);
    for (const auto& o : opts.overrides)
        config.applyOverride(o);
    if (opts.seed)
        config.set("seed", std::to_string(*opts.seed));
    const auto spec = SyntheticEnvSpec::fromConfig(config);
    const auto env = generateSynthetic(spec);
    writeSyntheticInputs(env, opts.outDir);
    if (!opts.quiet)
        out << fmt::format("wrote {} frames, {} segments to {}\n", spec.nFrames, spec.regionCount(),
                           opts.outDir.string());
    return kOk;
}

int dispatch(const Options& opts, std::ostream& out)
{
    if (opts.command == "synth")
        return cmdSynth(opts, out);
    auto ctx = loadContext(opts);
    if (opts.command == "select")
        return cmdSelect(ctx, out);
    if (opts.command == "evaluate")
        return cmdEvaluate(ctx, out);
    if (opts.command == "sweep")
        return cmdSweep(ctx, out);
    if (opts.command == "ablate-swap")
        return cmdAblateSwap(ctx, out);
    if (opts.command == "ablate-segment")
        return cmdAblateSegment(ctx, out);
    if (opts.command == "validate")
        return cmdValidate(ctx, out);
    throw InvariantError(fmt::format("unhandled command {}", opts.command));
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Reference-map density selection for visual place recognition", "densel"};
    app.require_subcommand(1);
    Options opts;
    std::string outDir;
    std::string configPath;
    long long seed = 0;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"select", "train on the reference pair and pick the sparsest feasible stride"},
        {"evaluate", "select, then measure the curated map on the query traversal"},
        {"sweep", "run the target grid for ours, the fixed baseline and the oracle"},
        {"ablate-swap", "repeat the sweep with the two reference traversals swapped"},
        {"ablate-segment", "repeat the sweep for each segment length in d_values"},
        {"synth", "generate a synthetic environment from a spec file"},
        {"validate", "load and check every input referenced by a config"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", configPath, "run config (spec file for synth)")->required();
        sub->add_option("--out", outDir, "output directory");
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_option("--override", opts.overrides, "key=value applied after the config file");
        sub->add_flag("--quiet", opts.quiet, "suppress summaries");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const auto code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalid;
    }
    for (const auto* sub : app.get_subcommands())
        opts.command = sub->get_name();
    opts.configPath = configPath;
    if (!outDir.empty())
        opts.outDir = outDir;
    if (app.get_subcommands().front()->count("--seed") > 0)
        opts.seed = seed;

    try {
        return dispatch(opts, out);
    } catch (const IoError& e) {
        err << "densel: I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const InvariantError& e) {
        err << "densel: internal error: " << e.what() << "\n";
        return kInternal;
    } catch (const ParseError& e) {
        err << "densel: parse error: " << e.what() << "\n";
        return kInvalid;
    } catch (const ConfigError& e) {
        err << "densel: config error: " << e.what() << "\n";
        return kInvalid;
    } catch (const ValidationError& e) {
        err << "densel: invalid input: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        err << "densel: internal error: " << e.what() << "\n";
        return kInternal;
    }
}

} // namespace densel::cli
