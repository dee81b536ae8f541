#include "ringkit/learner.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ringkit/errors.hpp"

namespace ringkit {

namespace {

using json = nlohmann::json;

constexpr int kBandBins = 20;
constexpr double kBandLoHz = 0.1;
constexpr double kBandHiHz = 5.0;
constexpr double kAccEnergyLoHz = 0.5;
constexpr double kAccEnergyHiHz = 5.0;
constexpr double kLogFloor = 1e-12;

// Power integral of the spectrum over [lo, hi).
double band_power(const SpectrumEstimate& spec, double lo, double hi) {
    const double df = spec.df();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < spec.freqs_hz.size(); ++k) {
        const double f = spec.freqs_hz[k];
        if (f >= lo && f < hi) acc += spec.power[k] * df;
    }
    return acc;
}

SpectrumEstimate channel_spectrum(const SignalWindow& w, Channel ch, const PreprocessPlan& plan) {
    // Sample-domain plan steps shape the spectrum; a trailing spectral step
    // supplies the analysis parameters.
    PreprocessPlan samples_only = plan;
    double segment_s = 10.0;
    double overlap = 0.5;
    if (samples_only.ends_with_spectral()) {
        segment_s = samples_only.steps.back().segment_s;
        overlap = samples_only.steps.back().overlap;
        samples_only.steps.pop_back();
    }
    const PlanOutput out = run_plan(w, ch, samples_only);
    const auto& samples = std::get<Eigen::ArrayXd>(out);
    const double max_segment_s = static_cast<double>(samples.size()) / w.rate_hz();
    return welch_psd(samples, w.rate_hz(), std::min(segment_s, max_segment_s), overlap);
}

} // namespace

std::uint64_t schema_hash(const FeatureSchema& schema) {
    // FNV-1a over the joined names.
    std::uint64_t h = 1469598103934665603ull;
    for (const std::string& name : schema) {
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        h ^= static_cast<unsigned char>('\n');
        h *= 1099511628211ull;
    }
    return h;
}

FeatureSchema feature_schema(const std::vector<Channel>& channels) {
    FeatureSchema schema;
    bool any_acc = false;
    for (Channel ch : channels) {
        const std::string base(to_string(ch));
        for (int b = 0; b < kBandBins; ++b) {
            schema.push_back(base + "/logpow_" + (b < 10 ? "0" : "") + std::to_string(b));
        }
        if (is_ppg(ch)) schema.push_back(base + "/ac_dc");
        if (is_acc(ch)) any_acc = true;
    }
    if (any_acc) schema.push_back("acc/band_energy");
    return schema;
}

FeatureVector featurize(const SignalWindow& w, const std::vector<Channel>& channels,
                        const PreprocessPlan& plan) {
    FeatureVector out;
    out.schema = feature_schema(channels);
    out.values.resize(static_cast<Eigen::Index>(out.schema.size()));

    Eigen::Index at = 0;
    bool any_acc = false;
    for (Channel ch : channels) {
        const SpectrumEstimate spec = channel_spectrum(w, ch, plan);
        const double bin_width = (kBandHiHz - kBandLoHz) / kBandBins;
        for (int b = 0; b < kBandBins; ++b) {
            const double lo = kBandLoHz + b * bin_width;
            out.values[at++] = std::log(band_power(spec, lo, lo + bin_width) + kLogFloor);
        }
        if (is_ppg(ch)) {
            const AcDc a = ac_dc(w.samples(ch), w.rate_hz());
            out.values[at++] = a.ac / a.dc;
        }
        if (is_acc(ch)) any_acc = true;
    }
    if (any_acc) {
        double energy = 0.0;
        for (Channel ch : channels) {
            if (!is_acc(ch)) continue;
            const SpectrumEstimate spec = welch_psd(
                w.samples(ch), w.rate_hz(),
                std::min(10.0, static_cast<double>(w.samples_per_channel()) / w.rate_hz()), 0.5);
            energy += band_power(spec, kAccEnergyLoHz, kAccEnergyHiHz);
        }
        out.values[at++] = std::log(energy + kLogFloor);
    }
    if (!out.values.allFinite()) {
        throw Error("featurize: non-finite feature value");
    }
    return out;
}

double LinearModel::predict(const Eigen::VectorXd& features) const {
    if (features.size() != weights.size()) {
        throw Error("predict: feature vector has " + std::to_string(features.size()) +
                    " entries, model expects " + std::to_string(weights.size()));
    }
    const Eigen::VectorXd z =
        (features - feature_means).cwiseQuotient(feature_scales);
    return weights.dot(z) + intercept;
}

void LinearModel::check_schema(const FeatureSchema& other) const {
    if (schema_hash(other) != schema_hash_value) {
        throw Error("model/feature schema mismatch");
    }
}

std::string LinearModel::to_json_string() const {
    json j;
    j["schema"] = schema;
    j["schema_hash"] = schema_hash_value;
    j["weights"] = std::vector<double>(weights.data(), weights.data() + weights.size());
    j["feature_means"] =
        std::vector<double>(feature_means.data(), feature_means.data() + feature_means.size());
    j["feature_scales"] =
        std::vector<double>(feature_scales.data(), feature_scales.data() + feature_scales.size());
    j["intercept"] = intercept;
    j["lambda"] = lambda;
    j["target"] = std::string(to_string(target));
    j["n_train"] = n_train;
    return j.dump(2) + "\n";
}

LinearModel LinearModel::from_json_string(const std::string& text) {
    json j = json::parse(text);
    LinearModel m;
    m.schema = j.at("schema").get<FeatureSchema>();
    m.schema_hash_value = j.at("schema_hash").get<std::uint64_t>();
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto mu = j.at("feature_means").get<std::vector<double>>();
    const auto sc = j.at("feature_scales").get<std::vector<double>>();
    m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.feature_means =
        Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    m.feature_scales =
        Eigen::Map<const Eigen::VectorXd>(sc.data(), static_cast<Eigen::Index>(sc.size()));
    m.intercept = j.at("intercept").get<double>();
    m.lambda = j.at("lambda").get<double>();
    const auto target = vital_from_string(j.at("target").get<std::string>());
    if (!target) throw FormatError("model: unknown target kind");
    m.target = *target;
    m.n_train = j.at("n_train").get<std::size_t>();
    return m;
}

LinearModel train(const FeatureDataset& train_set, double lambda, VitalKind target) {
    const Eigen::Index n = train_set.features.rows();
    const Eigen::Index d = train_set.features.cols();
    if (n < 2) {
        throw Error("train: need at least 2 examples");
    }
    if (lambda < 0.0) {
        throw Error("train: lambda must be nonnegative");
    }

    LinearModel model;
    model.schema = train_set.schema;
    model.schema_hash_value = schema_hash(train_set.schema);
    model.lambda = lambda;
    model.target = target;
    model.n_train = static_cast<std::size_t>(n);

    model.feature_means = train_set.features.colwise().mean();
    Eigen::MatrixXd centered = train_set.features.rowwise() - model.feature_means.transpose();
    model.feature_scales.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double sd = std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(n));
        model.feature_scales[j] = sd > 0.0 ? sd : 1.0;
        centered.col(j) /= model.feature_scales[j];
    }

    model.intercept = train_set.targets.mean();
    const Eigen::VectorXd y = train_set.targets.array() - model.intercept;

    Eigen::MatrixXd gram = centered.transpose() * centered;
    gram.diagonal().array() += lambda;

    if (lambda == 0.0) {
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(centered);
        if (qr.rank() < d) {
            throw SingularSystem("train: feature matrix is rank deficient and lambda is 0");
        }
    }
    model.weights = Eigen::LDLT<Eigen::MatrixXd>(gram).solve(centered.transpose() * y);
    return model;
}

TrainSelection train_with_selection(const FeatureDataset& train_set,
                                    const FeatureDataset& validation_set,
                                    const std::vector<double>& lambda_grid, VitalKind target) {
    if (lambda_grid.empty()) {
        throw Error("train_with_selection: empty lambda grid");
    }
    TrainSelection best;
    bool have_best = false;
    for (double lambda : lambda_grid) {
        LinearModel model = train(train_set, lambda, target);
        double abs_err_sum = 0.0;
        for (Eigen::Index i = 0; i < validation_set.size(); ++i) {
            const double pred = model.predict(validation_set.features.row(i).transpose());
            abs_err_sum += std::abs(validation_set.targets[i] - pred);
        }
        const double mae = validation_set.size() > 0
                               ? abs_err_sum / static_cast<double>(validation_set.size())
                               : 0.0;
        if (!have_best || mae < best.validation_mae) {
            best.model = std::move(model);
            best.chosen_lambda = lambda;
            best.validation_mae = mae;
            have_best = true;
        }
    }
    return best;
}

SpO2Calibration fit_spo2_calibration(const std::vector<std::pair<double, double>>& r_spo2) {
    if (r_spo2.size() < 2) {
        throw Error("fit_spo2_calibration: need at least 2 observations");
    }
    double r_mean = 0.0;
    double s_mean = 0.0;
    for (const auto& [r, s] : r_spo2) {
        r_mean += r;
        s_mean += s;
    }
    r_mean /= static_cast<double>(r_spo2.size());
    s_mean /= static_cast<double>(r_spo2.size());

    double srr = 0.0;
    double srs = 0.0;
    for (const auto& [r, s] : r_spo2) {
        srr += (r - r_mean) * (r - r_mean);
        srs += (r - r_mean) * (s - s_mean);
    }
    if (srr == 0.0) {
        throw DegenerateFit("fit_spo2_calibration: all ratio values equal");
    }
    const double slope = srs / srr; // SpO2 = a - b R, so slope = -b
    SpO2Calibration cal;
    cal.b = -slope;
    cal.a = s_mean + cal.b * r_mean;
    return cal;
}

} // namespace ringkit
