#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ringkit/estimators.hpp"
#include "ringkit/eval.hpp"
#include "ringkit/ingest.hpp"
#include "ringkit/learner.hpp"
#include "ringkit/preprocess.hpp"
#include "ringkit/synth.hpp"
#include "ringkit/types.hpp"

namespace ringkit {

enum class Method { Peak, Fft, Ratio, Ridge };

std::string_view to_string(Method m);
std::optional<Method> method_from_string(std::string_view s);

/// Declarative experiment description, loaded from a versioned JSON file.
struct ExperimentConfig {
    int schema_version = 1;

    // dataset: either a directory of session folders or a list of synthetic
    // session specs.
    std::filesystem::path dataset_root;
    std::vector<SynthSpec> synth_specs;

    VitalKind task = VitalKind::HR;
    Method method = Method::Fft;
    std::vector<Channel> channels{Channel::PPG_IR};
    std::optional<RingType> ring_filter; // absent = all rings

    PreprocessPlan preprocess;
    WindowParams window;

    struct Folds {
        int k = 5;
        std::uint64_t seed = 0;
    } folds;

    struct Training {
        std::vector<double> lambda_grid{std::begin(kDefaultLambdaGrid),
                                        std::end(kDefaultLambdaGrid)};
    } training;

    struct Eval {
        StratifyBy stratify_by = StratifyBy::Scenario;
        bool include_out_of_band = true;
        MergeMode merge_mode = MergeMode::Pooled;
    } eval;

    std::optional<SpO2Calibration> calibration_reflective;
    std::optional<SpO2Calibration> calibration_transmissive;

    std::filesystem::path output_dir = "out";

    bool uses_synth() const { return !synth_specs.empty(); }

    /// Throws ConfigError with a message naming the offending field.
    void validate() const;
};

ExperimentConfig config_from_json_string(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json_string(const ExperimentConfig& cfg);

/// FNV-1a hash of the canonical serialized form, as a hex string.
std::string config_hash(const ExperimentConfig& cfg);

/// The default preprocessing plan of a task/method combination, used when
/// the config omits the preprocess block.
PreprocessPlan default_plan(VitalKind task, Method method);

} // namespace ringkit
