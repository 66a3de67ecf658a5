#include "densel/selector.hpp"

#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "densel/errors.hpp"
#include "densel/metrics.hpp"

namespace densel {

void SelectionConfig::validate() const
{
    if (!(rTarget >= 0.0 && rTarget <= 1.0))
        throw ConfigError(fmt::format("r_target must lie in [0,1], got {}", rTarget));
    if (!(rarTarget >= 0.0 && rarTarget <= 1.0))
        throw ConfigError(fmt::format("rar_target must lie in [0,1], got {}", rarTarget));
}

double predictedRar(std::span<const double> predictions, double rTarget)
{
    return rar(predictions, rTarget);
}

SelectionResult selectRate(const std::map<int, double>& rarByRate, double rarTarget)
{
    if (rarByRate.empty())
        throw ValidationError("rate selection needs a non-empty rate grid");

    SelectionResult result;
    result.rarByRate = rarByRate;

    for (auto it = rarByRate.rbegin(); it != rarByRate.rend(); ++it) {
        if (it->second >= rarTarget) {
            result.chosenRate = it->first;
            result.feasible = true;
            return result;
        }
    }

    // ascending iteration with strict > keeps the densest stride on ties
    auto best = rarByRate.begin();
    for (auto it = rarByRate.begin(); it != rarByRate.end(); ++it)
        if (it->second > best->second)
            best = it;
    result.chosenRate = best->first;
    result.fallbackUsed = true;
    return result;
}

OracleRate oracleRate(const std::map<int, double>& achievedRarByRate, double rarTarget)
{
    const auto selection = selectRate(achievedRarByRate, rarTarget);
    return OracleRate{selection.chosenRate, achievedRarByRate.at(selection.chosenRate),
                      selection.feasible};
}

OracleRate oracleRate(const std::map<int, std::vector<double>>& recallsByRate, double rTarget,
                      double rarTarget)
{
    std::map<int, double> achieved;
    for (const auto& [rate, recalls] : recallsByRate)
        achieved[rate] = rar(std::span<const double>(recalls), rTarget);
    return oracleRate(achieved, rarTarget);
}

SampledReference curateReference(const Traversal& traversal, int chosenRate)
{
    return subsample(traversal, chosenRate);
}

std::string selectionJson(const SelectionResult& result)
{
    nlohmann::ordered_json j;
    j["chosen_rate"] = result.chosenRate;
    j["feasible"] = result.feasible;
    j["fallback_used"] = result.fallbackUsed;
    auto table = nlohmann::ordered_json::object();
    for (const auto& [rate, value] : result.rarByRate)
        table[std::to_string(rate)] = value;
    j["rar_by_rate"] = std::move(table);
    return j.dump(2) + "\n";
}

} // namespace densel
