#pragma once

#include <stdexcept>
#include <string>

namespace ringkit {

/// Base class for every error this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration. The CLI maps this to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

/// Problems with input data or its contents. The CLI maps this to exit code 3.
struct DataError : Error {
    using Error::Error;
};

// ingest
struct FormatError : DataError {
    using DataError::DataError;
};
struct ValidationError : DataError {
    using DataError::DataError;
};
struct MissingReference : DataError {
    using DataError::DataError;
};
struct TooFewSubjects : DataError {
    using DataError::DataError;
};

// preprocess
struct UnstableDesign : DataError {
    using DataError::DataError;
};
struct SegmentTooLong : DataError {
    using DataError::DataError;
};

// estimators
struct DegenerateSignal : DataError {
    using DataError::DataError;
};
struct NonPositiveDC : DataError {
    using DataError::DataError;
};
struct EmptyBand : DataError {
    using DataError::DataError;
};

// learner
struct SingularSystem : DataError {
    using DataError::DataError;
};
struct DegenerateFit : DataError {
    using DataError::DataError;
};

// synth (an invalid generator spec comes from the config, so exit code 2)
struct SpecInvalid : ConfigError {
    using ConfigError::ConfigError;
};

// eval
struct EmptyInput : DataError {
    using DataError::DataError;
};

} // namespace ringkit
