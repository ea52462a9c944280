#pragma once

#include <stdexcept>

namespace lanerisk {

/// Shape or extent mismatch between operands.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A backward pass was requested without a matching cached forward pass.
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed on-disk data (tensor files, checkpoints, mask records).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration caught before any work starts.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Semantically invalid input data (e.g. a zero-variance annotator).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Metric preconditions violated (e.g. single-class labels for AUC).
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem failures, always carrying the offending path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lanerisk
