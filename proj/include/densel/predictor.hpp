#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "densel/features.hpp"

namespace densel {

struct TrainingRow
{
    FeatureVector features;
    double target; // ground-truth Recall@1 in [0, 1]
};

struct TrainingSet
{
    int rateK = 1;
    std::vector<TrainingRow> rows;
};

TrainingSet makeTrainingSet(int rateK, std::span<const SegmentFeatures> features,
                            std::span<const SegmentRecall> recalls);

/*
 * Affine Recall@1 model for one sampling rate.
 *
 * Parameters live in standardized feature space: z_j = (x_j - mean_j) / std_j,
 * prediction = intercept + sum_j w_j z_j. weights() and bias() give the
 * equivalent raw-space model.
 */
class RatePredictor
{
public:
    RatePredictor(int rateK, double lambda, FeatureVector means, FeatureVector stddevs,
                  FeatureVector standardizedWeights, double intercept);

    int rateK() const noexcept { return mRateK; }
    double lambda() const noexcept { return mLambda; }
    const FeatureVector& means() const noexcept { return mMeans; }
    const FeatureVector& stddevs() const noexcept { return mStddevs; }
    const FeatureVector& standardizedWeights() const noexcept { return mWeights; }
    double intercept() const noexcept { return mIntercept; }

    FeatureVector weights() const;
    double bias() const;

    double predictRaw(const FeatureVector& x) const;
    /* predictRaw clamped to [0, 1]. */
    double predict(const FeatureVector& x) const;
    double predict(const SegmentFeatures& f) const { return predict(f.vector()); }

    bool operator==(const RatePredictor&) const = default;

private:
    int mRateK;
    double mLambda;
    FeatureVector mMeans;
    FeatureVector mStddevs;
    FeatureVector mWeights;
    double mIntercept;
};

/*
 * Closed-form ridge fit of sum (y - w.z - b)^2 + lambda |w|^2 on standardized
 * features with an unpenalized intercept. Constant features get stddev 1 and
 * weight 0. With lambda == 0 a rank-deficient system throws ValidationError.
 */
RatePredictor train(const TrainingSet& set, double lambda);

std::map<int, RatePredictor> trainAllRates(const std::map<int, TrainingSet>& sets, double lambda);

/* One line per rate: rate_k lambda means[4] stddevs[4] weights[4] intercept. */
std::string serializePredictors(const std::map<int, RatePredictor>& predictors);
std::map<int, RatePredictor> parsePredictors(std::string_view text);

} // namespace densel
