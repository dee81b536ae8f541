#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "ringkit/estimators.hpp"
#include "ringkit/preprocess.hpp"
#include "ringkit/types.hpp"

namespace ringkit {

using FeatureSchema = std::vector<std::string>;

std::uint64_t schema_hash(const FeatureSchema& schema);

/// Deterministic feature schema for a channel selection: per channel, 20 log
/// band-power bins over 0.1-5 Hz; one AC/DC ratio per PPG channel; one total
/// ACC band energy (0.5-5 Hz) when any ACC axis is selected.
FeatureSchema feature_schema(const std::vector<Channel>& channels);

struct FeatureVector {
    Eigen::VectorXd values;
    FeatureSchema schema;
};

/// Spectral features of one window under the given plan. Deterministic:
/// identical windows produce identical vectors.
FeatureVector featurize(const SignalWindow& w, const std::vector<Channel>& channels,
                        const PreprocessPlan& plan);

/// Ridge regression with per-feature standardization computed from the
/// training rows only.
struct LinearModel {
    FeatureSchema schema;
    std::uint64_t schema_hash_value = 0;
    Eigen::VectorXd weights;
    Eigen::VectorXd feature_means;
    Eigen::VectorXd feature_scales;
    double intercept = 0.0;
    double lambda = 1.0;
    VitalKind target = VitalKind::HR;
    std::size_t n_train = 0;

    double predict(const Eigen::VectorXd& features) const;
    void check_schema(const FeatureSchema& other) const;

    std::string to_json_string() const;
    static LinearModel from_json_string(const std::string& text);
};

struct FeatureDataset {
    Eigen::MatrixXd features; // one row per example
    Eigen::VectorXd targets;
    FeatureSchema schema;

    Eigen::Index size() const { return features.rows(); }
};

inline constexpr double kDefaultLambdaGrid[] = {0.01, 0.1, 1.0, 10.0, 100.0};

/// Closed-form ridge fit minimizing sum (y - yhat)^2 + lambda * |w|^2.
LinearModel train(const FeatureDataset& train_set, double lambda,
                  VitalKind target = VitalKind::HR);

struct TrainSelection {
    LinearModel model;
    double chosen_lambda = 1.0;
    double validation_mae = 0.0;
};

/// Fits one model per lambda on the training rows and keeps the one with
/// the lowest validation MAE.
TrainSelection train_with_selection(const FeatureDataset& train_set,
                                    const FeatureDataset& validation_set,
                                    const std::vector<double>& lambda_grid,
                                    VitalKind target = VitalKind::HR);

/// Least-squares fit of SpO2 = a - b * R over (R, SpO2) observations.
SpO2Calibration fit_spo2_calibration(const std::vector<std::pair<double, double>>& r_spo2);

} // namespace ringkit
