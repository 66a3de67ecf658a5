#include "densel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "densel/errors.hpp"
#include "densel/metrics.hpp"
#include "densel/segmentation.hpp"

namespace densel {

std::string_view toString(Difficulty difficulty)
{
    switch (difficulty) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
    }
    return "?";
}

namespace {

/*
 * Bit-level helpers on top of mt19937_64 so generated data does not depend
 * on the standard library's distribution implementations.
 */
class Stream
{
public:
    Stream(std::uint64_t seed, std::uint64_t channel)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(channel)};
        mEngine.seed(seq);
    }

    double uniform() { return static_cast<double>(mEngine() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Lemire-style rejection keeps the draw unbiased
    std::size_t index(std::size_t n)
    {
        const auto limit = std::numeric_limits<std::uint64_t>::max() -
                           std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = mEngine();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    double gaussian()
    {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 mEngine;
};

enum Channel : std::uint64_t { kRegions = 0, kTraining = 1, kEvaluation = 2, kSwappedTraining = 3,
                               kSwappedEvaluation = 4, kSignature = 10, kRef1 = 11, kRef2 = 12,
                               kQry1 = 13 };

void requireProbability(double v, const std::string& key)
{
    if (!(v >= 0.0 && v <= 1.0))
        throw ConfigError(fmt::format("{} must be a probability in [0,1], got {}", key, v));
}

void validateClass(const DifficultyClass& c, std::string_view name)
{
    requireProbability(c.pMax, fmt::format("{}_p_max", name));
    if (!(c.kneeMin > 0.0 && c.kneeMin <= c.kneeMax && std::isfinite(c.kneeMax)))
        throw ConfigError(fmt::format("{} knee range [{}, {}] is invalid", name, c.kneeMin, c.kneeMax));
    if (!(c.exponentMin >= 0.0 && c.exponentMin <= c.exponentMax && std::isfinite(c.exponentMax)))
        throw ConfigError(fmt::format("{} exponent range [{}, {}] is invalid", name, c.exponentMin,
                                      c.exponentMax));
    if (!(c.descriptorNoise >= 0.0 && std::isfinite(c.descriptorNoise)))
        throw ConfigError(fmt::format("{}_descriptor_noise must be non-negative", name));
}

DifficultyClass readClass(const KeyValueConfig& cfg, std::string_view name, DifficultyClass c)
{
    const auto key = [&](const char* field) { return fmt::format("{}_{}", name, field); };
    c.pMax = cfg.getDouble(key("p_max"), c.pMax);
    c.kneeMin = cfg.getDouble(key("knee_min"), c.kneeMin);
    c.kneeMax = cfg.getDouble(key("knee_max"), c.kneeMax);
    c.exponentMin = cfg.getDouble(key("exponent_min"), c.exponentMin);
    c.exponentMax = cfg.getDouble(key("exponent_max"), c.exponentMax);
    c.descriptorNoise = cfg.getDouble(key("descriptor_noise"), c.descriptorNoise);
    return c;
}

void writeClass(KeyValueConfig& cfg, std::string_view name, const DifficultyClass& c)
{
    const auto put = [&](const char* field, double v) {
        cfg.set(fmt::format("{}_{}", name, field), fmt::format("{}", v));
    };
    put("p_max", c.pMax);
    put("knee_min", c.kneeMin);
    put("knee_max", c.kneeMax);
    put("exponent_min", c.exponentMin);
    put("exponent_max", c.exponentMax);
    put("descriptor_noise", c.descriptorNoise);
}

const std::set<std::string>& knownKeys()
{
    static const std::set<std::string> keys = [] {
        std::set<std::string> k{"n_frames", "frame_spacing_m", "segments_easy", "segments_medium",
                                "segments_hard", "aliasing_rate", "gt_tolerance_tau", "rate_grid",
                                "ref2_reliability", "qry1_reliability", "seed", "mode",
                                "descriptor_dim"};
        for (const char* c : {"easy", "medium", "hard"})
            for (const char* f : {"p_max", "knee_min", "knee_max", "exponent_min", "exponent_max",
                                  "descriptor_noise"})
                k.insert(fmt::format("{}_{}", c, f));
        return k;
    }();
    return keys;
}

std::size_t readCount(const KeyValueConfig& cfg, const std::string& key, std::size_t fallback)
{
    const auto v = cfg.getInt(key, static_cast<long long>(fallback));
    if (v < 0)
        throw ConfigError(fmt::format("{} must be non-negative, got {}", key, v));
    return static_cast<std::size_t>(v);
}

} // namespace

double SyntheticEnvSpec::regionLengthM() const
{
    return static_cast<double>(nFrames) * frameSpacingM / static_cast<double>(regionCount());
}

void SyntheticEnvSpec::validate() const
{
    if (nFrames < 2)
        throw ConfigError("n_frames must be at least 2");
    if (!(frameSpacingM > 0.0 && std::isfinite(frameSpacingM)))
        throw ConfigError("frame_spacing_m must be positive");
    if (regionCount() == 0)
        throw ConfigError("at least one easy, medium or hard segment is required");
    if (regionCount() > nFrames)
        throw ConfigError(fmt::format("{} segments need at least as many frames, got {}",
                                      regionCount(), nFrames));
    validateClass(easy, "easy");
    validateClass(medium, "medium");
    validateClass(hard, "hard");
    requireProbability(aliasingRate, "aliasing_rate");
    requireProbability(ref2Reliability, "ref2_reliability");
    requireProbability(qry1Reliability, "qry1_reliability");
    if (!(toleranceM >= frameSpacingM && std::isfinite(toleranceM)))
        throw ConfigError("gt_tolerance_tau must be at least one frame spacing");
    DatasetConfig grid;
    grid.rateGrid = rateGrid;
    grid.validate();
    if (static_cast<std::size_t>(rateGrid.back()) > nFrames)
        throw ConfigError(fmt::format("rate {} exceeds n_frames", rateGrid.back()));

    const double routeM = static_cast<double>(nFrames - 1) * frameSpacingM;
    const double maxGapM = rateGrid.back() * frameSpacingM;
    if (aliasingRate > 0.0 && !(routeM > 4.0 * toleranceM + maxGapM))
        throw ConfigError(fmt::format("route of {} m is too short to place aliases more than "
                                      "{} m away",
                                      routeM, toleranceM));
    if (mode == SyntheticMode::Descriptors && descriptorDim < 2)
        throw ConfigError("descriptor_dim must be at least 2");
}

SyntheticEnvSpec SyntheticEnvSpec::fromConfig(const KeyValueConfig& cfg)
{
    for (const auto& [key, value] : cfg.entries())
        if (!knownKeys().contains(key))
            throw ConfigError(fmt::format("unknown synthetic spec key '{}'", key));

    SyntheticEnvSpec s;
    s.nFrames = readCount(cfg, "n_frames", s.nFrames);
    s.frameSpacingM = cfg.getDouble("frame_spacing_m", s.frameSpacingM);
    s.segmentsEasy = readCount(cfg, "segments_easy", s.segmentsEasy);
    s.segmentsMedium = readCount(cfg, "segments_medium", s.segmentsMedium);
    s.segmentsHard = readCount(cfg, "segments_hard", s.segmentsHard);
    s.easy = readClass(cfg, "easy", s.easy);
    s.medium = readClass(cfg, "medium", s.medium);
    s.hard = readClass(cfg, "hard", s.hard);
    s.aliasingRate = cfg.getDouble("aliasing_rate", s.aliasingRate);
    s.toleranceM = cfg.getDouble("gt_tolerance_tau", s.toleranceM);
    if (cfg.has("rate_grid"))
        s.rateGrid = cfg.getIntList("rate_grid");
    s.ref2Reliability = cfg.getDouble("ref2_reliability", s.ref2Reliability);
    s.qry1Reliability = cfg.getDouble("qry1_reliability", s.qry1Reliability);
    const auto seed = cfg.getInt("seed", static_cast<long long>(s.seed));
    if (seed < 0)
        throw ConfigError("seed must be non-negative");
    s.seed = static_cast<std::uint64_t>(seed);
    const auto mode = cfg.getString("mode", "match_tables");
    if (mode == "match_tables")
        s.mode = SyntheticMode::MatchTables;
    else if (mode == "descriptors")
        s.mode = SyntheticMode::Descriptors;
    else
        throw ConfigError(fmt::format("mode must be match_tables or descriptors, got '{}'", mode));
    s.descriptorDim = readCount(cfg, "descriptor_dim", s.descriptorDim);
    s.validate();
    return s;
}

SyntheticEnvSpec SyntheticEnvSpec::load(const std::filesystem::path& path)
{
    return fromConfig(KeyValueConfig::load(path));
}

void SyntheticEnvSpec::writeTo(KeyValueConfig& cfg) const
{
    cfg.set("n_frames", std::to_string(nFrames));
    cfg.set("frame_spacing_m", fmt::format("{}", frameSpacingM));
    cfg.set("segments_easy", std::to_string(segmentsEasy));
    cfg.set("segments_medium", std::to_string(segmentsMedium));
    cfg.set("segments_hard", std::to_string(segmentsHard));
    writeClass(cfg, "easy", easy);
    writeClass(cfg, "medium", medium);
    writeClass(cfg, "hard", hard);
    cfg.set("aliasing_rate", fmt::format("{}", aliasingRate));
    cfg.set("gt_tolerance_tau", fmt::format("{}", toleranceM));
    cfg.set("rate_grid", fmt::format("{}", fmt::join(rateGrid, ",")));
    cfg.set("ref2_reliability", fmt::format("{}", ref2Reliability));
    cfg.set("qry1_reliability", fmt::format("{}", qry1Reliability));
    cfg.set("seed", std::to_string(seed));
    cfg.set("mode", mode == SyntheticMode::MatchTables ? "match_tables" : "descriptors");
    cfg.set("descriptor_dim", std::to_string(descriptorDim));
}

double RegionDifficulty::correctProbability(int rateK) const
{
    if (rateK < 1)
        throw ConfigError(fmt::format("rate must be at least 1, got {}", rateK));
    const double ratio = knee / static_cast<double>(rateK);
    return ratio >= 1.0 ? pMax : pMax * std::pow(ratio, exponent);
}

std::size_t SyntheticEnvironment::regionOf(double positionM) const
{
    const auto r = static_cast<std::size_t>(std::floor(positionM / spec.regionLengthM()));
    return std::min(r, regions.size() - 1);
}

double SyntheticEnvironment::expectedRecall(std::size_t region, int rateK, double reliability) const
{
    // exact only when every failed, non-aliased match lands inside the tolerance
    const double p = regions.at(region).correctProbability(rateK) * reliability;
    return p + (1.0 - p) * (1.0 - spec.aliasingRate);
}

std::vector<std::map<int, double>> SyntheticEnvironment::evaluationRecallMap() const
{
    std::vector<std::map<int, double>> out(regions.size());
    for (std::size_t r = 0; r < regions.size(); ++r)
        for (const int k : spec.rateGrid)
            out[r][k] = expectedRecall(r, k, spec.qry1Reliability);
    return out;
}

namespace {

std::vector<RegionDifficulty> drawRegions(const SyntheticEnvSpec& spec)
{
    std::vector<Difficulty> labels;
    labels.insert(labels.end(), spec.segmentsEasy, Difficulty::Easy);
    labels.insert(labels.end(), spec.segmentsMedium, Difficulty::Medium);
    labels.insert(labels.end(), spec.segmentsHard, Difficulty::Hard);

    Stream rng(spec.seed, kRegions);
    for (std::size_t i = labels.size(); i > 1; --i)
        std::swap(labels[i - 1], labels[rng.index(i)]);

    std::vector<RegionDifficulty> regions;
    for (const auto label : labels) {
        const auto& c = label == Difficulty::Easy     ? spec.easy
                        : label == Difficulty::Medium ? spec.medium
                                                      : spec.hard;
        const double knee = rng.uniform(c.kneeMin, c.kneeMax);
        const double exponent = rng.uniform(c.exponentMin, c.exponentMax);
        regions.push_back(RegionDifficulty{label, c.pMax, knee, exponent});
    }
    return regions;
}

/*
 * One query/reference pairing. Each query draws (u, v) once and reuses them
 * at every rate, so a query correct at stride k stays correct at every
 * denser stride: realized recall is monotone in k, not just its expectation.
 *   u < p(k)     : the nearest kept reference (exact)
 *   else v < a   : an alias, a kept reference more than tau away
 *   else         : a near miss within (tau - spacing) / 2, which still counts
 * The near-miss radius keeps consecutive non-aliased matches within tau of
 * each other, so without aliasing the jump rate at k = 1 is exactly zero.
 */
std::shared_ptr<TableMatchProvider> generatePair(const SyntheticEnvironment& env,
                                                 const std::string& name, double reliability,
                                                 std::uint64_t channel)
{
    const auto& spec = env.spec;
    const auto n = env.positions.size();
    const auto& pos = env.positions;
    Stream rng(spec.seed, channel);

    std::vector<double> u(n);
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) {
        u[j] = rng.uniform();
        v[j] = rng.uniform();
    }

    const double nearRadius = (spec.toleranceM - spec.frameSpacingM) / 2.0;
    std::map<int, MatchTable> tables;
    for (const int k : spec.rateGrid) {
        const auto stride = static_cast<std::size_t>(k);
        const auto kept = (n - 1) / stride + 1;
        MatchTable table;
        table.rateK = k;
        table.entries.reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            // frames are evenly spaced, so the nearest kept frame is the nearest in index
            std::size_t nearest = (j / stride) * stride;
            if (2 * (j - nearest) > stride && nearest + stride < n)
                nearest += stride;

            const double p = env.regions[env.regionOf(pos[j])].correctProbability(k) * reliability;
            std::size_t frame = nearest;
            float score = 0.1f;
            if (u[j] < p) {
                // locked on the right place
            } else if (v[j] < spec.aliasingRate) {
                do {
                    frame = rng.index(kept) * stride;
                } while (std::abs(pos[frame] - pos[j]) <= spec.toleranceM);
                score = 0.4f;
            } else {
                const auto reach = static_cast<std::size_t>(std::floor(nearRadius / spec.frameSpacingM));
                const auto lo = j >= reach ? j - reach : 0;
                const auto hi = std::min(n - 1, j + reach);
                const auto first = (lo + stride - 1) / stride;
                const auto last = hi / stride;
                if (first <= last)
                    frame = (first + rng.index(last - first + 1)) * stride;
                score = 0.25f;
            }
            table.entries.push_back(MatchEntry{j, pos[j], frame, pos[frame], score});
        }
        tables.emplace(k, std::move(table));
    }
    return std::make_shared<TableMatchProvider>(name, std::move(tables), pos, pos);
}

std::shared_ptr<const Traversal> generateTraversal(const SyntheticEnvironment& env,
                                                   const std::vector<float>& anchors,
                                                   double anchorSpacingM, TraversalRole role,
                                                   double reliability, std::uint64_t channel)
{
    const auto& spec = env.spec;
    const auto dim = spec.descriptorDim;
    const auto n = env.positions.size();
    Stream rng(spec.seed, channel);
    std::vector<float> desc(n * dim);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = env.positions[j] / anchorSpacingM;
        const auto a = static_cast<std::size_t>(std::floor(x));
        const double t = x - static_cast<double>(a);
        const auto& region = env.regions[env.regionOf(env.positions[j])];
        const auto& c = region.difficulty == Difficulty::Easy     ? spec.easy
                        : region.difficulty == Difficulty::Medium ? spec.medium
                                                                  : spec.hard;
        const double noise = c.descriptorNoise * (2.0 - reliability);
        for (std::size_t d = 0; d < dim; ++d) {
            const double base = (1.0 - t) * anchors[a * dim + d] + t * anchors[(a + 1) * dim + d];
            desc[j * dim + d] = static_cast<float>(base + noise * rng.gaussian());
        }
    }
    return std::make_shared<Traversal>("synthetic", role, env.positions, std::move(desc), dim);
}

} // namespace

SyntheticEnvironment generateSynthetic(const SyntheticEnvSpec& spec)
{
    spec.validate();
    SyntheticEnvironment env;
    env.spec = spec;
    env.regions = drawRegions(spec);
    env.positions.resize(spec.nFrames);
    for (std::size_t i = 0; i < spec.nFrames; ++i)
        env.positions[i] = static_cast<double>(i) * spec.frameSpacingM;

    if (spec.mode == SyntheticMode::MatchTables) {
        const double r2 = spec.ref2Reliability;
        const double q1 = spec.qry1Reliability;
        env.scenario.training = generatePair(env, "ref2-vs-ref1", r2, kTraining);
        env.scenario.evaluation = generatePair(env, "qry1-vs-ref1", q1, kEvaluation);
        env.scenario.swappedTraining = generatePair(env, "ref1-vs-ref2", r2, kSwappedTraining);
        env.scenario.swappedEvaluation = generatePair(env, "qry1-vs-ref2", q1 * r2, kSwappedEvaluation);
        return env;
    }

    // place signature: random anchors every tau/2 meters, linearly interpolated
    const double anchorSpacing = std::max(spec.toleranceM / 2.0, spec.frameSpacingM);
    const auto anchorCount =
        static_cast<std::size_t>(std::floor(env.positions.back() / anchorSpacing)) + 2;
    std::vector<float> anchors(anchorCount * spec.descriptorDim);
    Stream rng(spec.seed, kSignature);
    for (auto& a : anchors)
        a = static_cast<float>(rng.gaussian());

    env.ref1 = generateTraversal(env, anchors, anchorSpacing, TraversalRole::Ref1, 1.0, kRef1);
    env.ref2 = generateTraversal(env, anchors, anchorSpacing, TraversalRole::Ref2,
                                 spec.ref2Reliability, kRef2);
    env.qry1 = generateTraversal(env, anchors, anchorSpacing, TraversalRole::Qry1,
                                 spec.qry1Reliability, kQry1);
    env.scenario = scenarioFromTraversals(env.ref1, env.ref2, env.qry1, DistanceMetric::Cosine);
    return env;
}

std::string oracleRecallCsv(const SyntheticEnvironment& env)
{
    std::string out = "segment_index,difficulty,rate_k,recall,kind\n";
    if (env.spec.mode == SyntheticMode::MatchTables) {
        const auto map = env.evaluationRecallMap();
        for (std::size_t r = 0; r < map.size(); ++r)
            for (const auto& [k, recall] : map[r])
                out += fmt::format("{},{},{},{:.6f},expected\n", r, toString(env.regions[r].difficulty),
                                   k, recall);
        return out;
    }

    // no closed form for descriptor geometry: report what the evaluation pair realizes
    const auto& eval = *env.scenario.evaluation;
    const auto segments = segmentPositions(eval.queryPositions(), env.spec.regionLengthM());
    std::map<std::size_t, std::map<int, double>> realized;
    for (const int k : env.spec.rateGrid) {
        const auto result = segmentRecallAt1(eval.matches(k), segments, eval.groundTruthPositions(),
                                             env.spec.toleranceM);
        for (const auto& s : result.recalls)
            realized[s.segmentIndex][k] = s.recallAt1;
    }
    for (const auto& [segment, byRate] : realized) {
        const auto region = env.regionOf(segments[segment].startPositionM);
        for (const auto& [k, recall] : byRate)
            out += fmt::format("{},{},{},{:.6f},realized\n", segment,
                               toString(env.regions[region].difficulty), k, recall);
    }
    return out;
}

void writeSyntheticInputs(const SyntheticEnvironment& env, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

    KeyValueConfig run;
    if (env.spec.mode == SyntheticMode::MatchTables) {
        const std::pair<const char*, const MatchProviderPtr*> files[] = {
            {"training_matches", &env.scenario.training},
            {"evaluation_matches", &env.scenario.evaluation},
            {"swapped_training_matches", &env.scenario.swappedTraining},
            {"swapped_evaluation_matches", &env.scenario.swappedEvaluation},
        };
        run.set("mode", "matches");
        for (const auto& [key, provider] : files) {
            const auto table = std::dynamic_pointer_cast<const TableMatchProvider>(*provider);
            if (!table)
                throw InvariantError("synthetic pair is not a match table");
            const auto file = fmt::format("{}.csv", key);
            writeMatchTables(dir / file, *table);
            run.set(key, file);
        }
    } else {
        run.set("mode", "descriptors");
        writeTraversal(dir / "ref1.dmap", *env.ref1);
        writeTraversal(dir / "ref2.dmap", *env.ref2);
        writeTraversal(dir / "qry1.dmap", *env.qry1);
        run.set("ref1", "ref1.dmap");
        run.set("ref2", "ref2.dmap");
        run.set("qry1", "qry1.dmap");
    }
    writeTextFile(dir / "oracle_recall.csv", oracleRecallCsv(env));

    DatasetConfig dataset;
    dataset.segmentLengthM = env.spec.regionLengthM();
    dataset.gtToleranceM = env.spec.toleranceM;
    dataset.rateGrid = env.spec.rateGrid;
    dataset.writeTo(run);
    run.set("seed", std::to_string(env.spec.seed));
    writeTextFile(dir / "run.cfg", run.serialize());
}

} // namespace densel
