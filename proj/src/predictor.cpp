#include "densel/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "densel/errors.hpp"

namespace densel {

TrainingSet makeTrainingSet(int rateK, std::span<const SegmentFeatures> features,
                            std::span<const SegmentRecall> recalls)
{
    if (features.size() != recalls.size())
        throw InvariantError(fmt::format("rate {}: {} feature rows but {} recall rows", rateK,
                                         features.size(), recalls.size()));
    TrainingSet set;
    set.rateK = rateK;
    set.rows.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].segmentIndex != recalls[i].segmentIndex)
            throw InvariantError(fmt::format("rate {}: feature row {} is segment {}, recall row is {}",
                                             rateK, i, features[i].segmentIndex,
                                             recalls[i].segmentIndex));
        set.rows.push_back(TrainingRow{features[i].vector(), recalls[i].recallAt1});
    }
    return set;
}

RatePredictor::RatePredictor(int rateK, double lambda, FeatureVector means, FeatureVector stddevs,
                             FeatureVector standardizedWeights, double intercept) :
    mRateK(rateK),
    mLambda(lambda),
    mMeans(means),
    mStddevs(stddevs),
    mWeights(standardizedWeights),
    mIntercept(intercept)
{
    if (!(mLambda >= 0.0) || !std::isfinite(mLambda))
        throw InvariantError(fmt::format("rate {}: lambda {} must be finite and non-negative", rateK, mLambda));
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        if (!std::isfinite(mWeights[j]) || !std::isfinite(mMeans[j]))
            throw InvariantError(fmt::format("rate {}: non-finite model parameter", rateK));
        if (!(mStddevs[j] > 0.0) || !std::isfinite(mStddevs[j]))
            throw InvariantError(fmt::format("rate {}: stddev {} must be positive", rateK, j));
    }
    if (!std::isfinite(mIntercept))
        throw InvariantError(fmt::format("rate {}: non-finite intercept", rateK));
}

FeatureVector RatePredictor::weights() const
{
    FeatureVector w{};
    for (std::size_t j = 0; j < kFeatureCount; ++j)
        w[j] = mWeights[j] / mStddevs[j];
    return w;
}

double RatePredictor::bias() const
{
    double b = mIntercept;
    for (std::size_t j = 0; j < kFeatureCount; ++j)
        b -= mWeights[j] * mMeans[j] / mStddevs[j];
    return b;
}

double RatePredictor::predictRaw(const FeatureVector& x) const
{
    double y = mIntercept;
    for (std::size_t j = 0; j < kFeatureCount; ++j)
        y += mWeights[j] * (x[j] - mMeans[j]) / mStddevs[j];
    return y;
}

double RatePredictor::predict(const FeatureVector& x) const
{
    return std::clamp(predictRaw(x), 0.0, 1.0);
}

RatePredictor train(const TrainingSet& set, double lambda)
{
    const std::size_t n = set.rows.size();
    if (n == 0)
        throw ValidationError(fmt::format("rate {}: empty training set", set.rateK));
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ConfigError(fmt::format("lambda must be a non-negative number, got {}", lambda));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = set.rows[i];
        if (!(row.target >= 0.0 && row.target <= 1.0))
            throw ValidationError(
                fmt::format("rate {}: target {} of row {} outside [0,1]", set.rateK, row.target, i));
        for (const double x : row.features)
            if (!std::isfinite(x))
                throw ValidationError(fmt::format("rate {}: non-finite feature in row {}",
                                                  set.rateK, i));
    }

    const double dn = static_cast<double>(n);
    FeatureVector means{};
    FeatureVector stddevs{};
    std::array<bool, kFeatureCount> active{};
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        const auto [lo, hi] = std::minmax_element(set.rows.begin(), set.rows.end(),
                                                  [j](const TrainingRow& a, const TrainingRow& b) {
                                                      return a.features[j] < b.features[j];
                                                  });
        if (lo->features[j] == hi->features[j]) {
            means[j] = lo->features[j];
            stddevs[j] = 1.0;
            active[j] = false;
            continue;
        }
        double sum = 0.0;
        for (const auto& row : set.rows)
            sum += row.features[j];
        means[j] = sum / dn;
        double ss = 0.0;
        for (const auto& row : set.rows)
            ss += (row.features[j] - means[j]) * (row.features[j] - means[j]);
        stddevs[j] = std::sqrt(ss / dn);
        active[j] = stddevs[j] > 0.0;
        if (!active[j])
            stddevs[j] = 1.0;
    }

    double targetSum = 0.0;
    for (const auto& row : set.rows)
        targetSum += row.target;
    const double targetMean = targetSum / dn;

    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < kFeatureCount; ++j)
        if (active[j])
            cols.push_back(j);
    const auto p = static_cast<Eigen::Index>(cols.size());

    FeatureVector weights{};
    if (p > 0) {
        Eigen::MatrixXd z(static_cast<Eigen::Index>(n), p);
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto& row = set.rows[i];
            for (Eigen::Index c = 0; c < p; ++c) {
                const auto j = cols[static_cast<std::size_t>(c)];
                z(static_cast<Eigen::Index>(i), c) = (row.features[j] - means[j]) / stddevs[j];
            }
            y(static_cast<Eigen::Index>(i)) = row.target - targetMean;
        }
        Eigen::MatrixXd gram = z.transpose() * z;
        const Eigen::VectorXd rhs = z.transpose() * y;

        if (lambda == 0.0) {
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram,
                                                                     Eigen::EigenvaluesOnly);
            const double minEig = eig.eigenvalues().minCoeff();
            const double maxEig = eig.eigenvalues().maxCoeff();
            if (!(minEig > 1e-10 * std::max(maxEig, dn)))
                throw ValidationError(fmt::format(
                    "rate {}: normal equations are singular with lambda = 0 (min eigenvalue {:.3g}); "
                    "use lambda > 0",
                    set.rateK, minEig));
        }
        gram.diagonal().array() += lambda;
        const Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() != Eigen::Success)
            throw ValidationError(
                fmt::format("rate {}: normal equations are not positive definite; use lambda > 0",
                            set.rateK));
        const Eigen::VectorXd w = llt.solve(rhs);
        for (Eigen::Index c = 0; c < p; ++c)
            weights[cols[static_cast<std::size_t>(c)]] = w(c);
    }

    return RatePredictor(set.rateK, lambda, means, stddevs, weights, targetMean);
}

std::map<int, RatePredictor> trainAllRates(const std::map<int, TrainingSet>& sets, double lambda)
{
    std::map<int, RatePredictor> out;
    for (const auto& [rate, set] : sets) {
        if (set.rateK != rate)
            throw InvariantError(fmt::format("training set keyed {} carries rate {}", rate, set.rateK));
        try {
            out.emplace(rate, train(set, lambda));
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("training rate {}: {}", rate, e.what()));
        }
    }
    return out;
}

std::string serializePredictors(const std::map<int, RatePredictor>& predictors)
{
    std::string out = "# rate_k lambda mean1..4 std1..4 w1..4 intercept\n";
    for (const auto& [rate, p] : predictors) {
        out += fmt::format("{} {:.17g}", rate, p.lambda());
        for (const double v : p.means())
            out += fmt::format(" {:.17g}", v);
        for (const double v : p.stddevs())
            out += fmt::format(" {:.17g}", v);
        for (const double v : p.standardizedWeights())
            out += fmt::format(" {:.17g}", v);
        out += fmt::format(" {:.17g}\n", p.intercept());
    }
    return out;
}

std::map<int, RatePredictor> parsePredictors(std::string_view text)
{
    std::map<int, RatePredictor> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineNo = 0;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        const auto lineOffset = offset;
        offset += line.size() + 1;
        if (line.empty() || line.front() == '#')
            continue;
        std::istringstream fields(line);
        fields.imbue(std::locale::classic());
        int rate = 0;
        double lambda = 0.0;
        FeatureVector means{}, stddevs{}, weights{};
        double intercept = 0.0;
        fields >> rate >> lambda;
        for (auto& v : means)
            fields >> v;
        for (auto& v : stddevs)
            fields >> v;
        for (auto& v : weights)
            fields >> v;
        fields >> intercept;
        std::string extra;
        if (!fields || (fields >> extra))
            throw ParseError(fmt::format("model line {} is malformed", lineNo), lineOffset);
        try {
            out.emplace(rate, RatePredictor(rate, lambda, means, stddevs, weights, intercept));
        } catch (const InvariantError& e) {
            throw ParseError(fmt::format("model line {}: {}", lineNo, e.what()), lineOffset);
        }
    }
    return out;
}

} // namespace densel
