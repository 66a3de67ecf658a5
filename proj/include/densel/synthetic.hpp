#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "densel/config.hpp"
#include "densel/ingest.hpp"
#include "densel/matching.hpp"

namespace densel {

enum class Difficulty { Easy, Medium, Hard };
std::string_view toString(Difficulty difficulty);

/*
 * Correct-match probability curve of one difficulty class:
 *   p(k) = pMax * min(1, (knee / k)^exponent)
 * with knee and exponent drawn uniformly per region.
 */
struct DifficultyClass
{
    double pMax = 1.0;
    double kneeMin = 1.0;
    double kneeMax = 1.0;
    double exponentMin = 1.0;
    double exponentMax = 1.0;
    double descriptorNoise = 0.1; // descriptor mode only
};

enum class SyntheticMode { MatchTables, Descriptors };

struct SyntheticEnvSpec
{
    std::size_t nFrames = 20000;
    double frameSpacingM = 1.0;
    std::size_t segmentsEasy = 40;
    std::size_t segmentsMedium = 35;
    std::size_t segmentsHard = 25;
    DifficultyClass easy{1.0, 20.0, 60.0, 3.0, 8.0, 0.05};
    DifficultyClass medium{0.97, 6.0, 25.0, 2.0, 6.0, 0.15};
    DifficultyClass hard{0.9, 1.0, 8.0, 1.0, 4.0, 0.3};
    double aliasingRate = 0.9; // chance that a failed match lands more than tau away
    double toleranceM = 50.0;
    std::vector<int> rateGrid{1, 2, 3, 4, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
    double ref2Reliability = 1.0; // multiplies p(k) for pairs involving Ref2
    double qry1Reliability = 1.0;
    std::uint64_t seed = 1;
    SyntheticMode mode = SyntheticMode::MatchTables;
    std::size_t descriptorDim = 32;

    std::size_t regionCount() const { return segmentsEasy + segmentsMedium + segmentsHard; }
    double regionLengthM() const;

    /* Throws ConfigError on any infeasible setting. */
    void validate() const;

    static SyntheticEnvSpec fromConfig(const KeyValueConfig& config);
    static SyntheticEnvSpec load(const std::filesystem::path& path);
    void writeTo(KeyValueConfig& config) const;
};

struct RegionDifficulty
{
    Difficulty difficulty;
    double pMax;
    double knee;
    double exponent;

    double correctProbability(int rateK) const;
};

struct SyntheticEnvironment
{
    SyntheticEnvSpec spec;
    std::vector<RegionDifficulty> regions;
    std::vector<double> positions; // shared by all three traversals

    // descriptor mode only
    std::shared_ptr<const Traversal> ref1;
    std::shared_ptr<const Traversal> ref2;
    std::shared_ptr<const Traversal> qry1;

    Scenario scenario;

    /* Region of a route position. */
    std::size_t regionOf(double positionM) const;

    /*
     * Expected Recall@1 of a region for a pair with the given combined
     * reliability. Exact in match-table mode; descriptor mode has no closed
     * form and the realized recalls are reported instead.
     */
    double expectedRecall(std::size_t region, int rateK, double reliability) const;

    /* region -> rate -> expected recall on the evaluation pair (Qry1 vs Ref1). */
    std::vector<std::map<int, double>> evaluationRecallMap() const;
};

SyntheticEnvironment generateSynthetic(const SyntheticEnvSpec& spec);

/* segment_index,difficulty,rate_k,recall,kind where kind is expected or realized. */
std::string oracleRecallCsv(const SyntheticEnvironment& env);

/*
 * Writes the environment as CLI inputs: match-table CSVs (or DMAP traversals
 * in descriptor mode), oracle_recall.csv and a run.cfg pointing at them.
 */
void writeSyntheticInputs(const SyntheticEnvironment& env, const std::filesystem::path& dir);

} // namespace densel
