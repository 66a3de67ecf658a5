#pragma once

#include <map>
#include <span>
#include <string>

#include "densel/ingest.hpp"
#include "densel/segmentation.hpp"

namespace densel {

/* User requirements: per-segment Recall@1 target and the share of segments that must meet it. */
struct SelectionConfig
{
    double rTarget = 0.8;
    double rarTarget = 0.8;

    void validate() const;
};

struct SelectionResult
{
    int chosenRate = 1;
    bool feasible = false;
    bool fallbackUsed = false;
    std::map<int, double> rarByRate;
};

/* Fraction of segments whose predicted recall is >= rTarget. */
double predictedRar(std::span<const double> predictions, double rTarget);

/*
 * Sparsest feasible rate: the largest stride whose RAR meets rarTarget.
 * With no feasible rate, the stride of maximal RAR, ties going to the
 * densest (smallest) stride.
 */
SelectionResult selectRate(const std::map<int, double>& rarByRate, double rarTarget);

struct OracleRate
{
    int rate;
    double achievableRar;
    bool feasible;
};

/* selectRate applied to ground-truth achieved RARs. */
OracleRate oracleRate(const std::map<int, std::vector<double>>& recallsByRate, double rTarget,
                      double rarTarget);
OracleRate oracleRate(const std::map<int, double>& achievedRarByRate, double rarTarget);

SampledReference curateReference(const Traversal& traversal, int chosenRate);

std::string selectionJson(const SelectionResult& result);

} // namespace densel
