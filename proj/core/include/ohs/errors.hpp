#pragma once

#include <stdexcept>
#include <string>

namespace ohs {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent configuration; the pipeline aborts before any work.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A stage was invoked before its upstream outputs exist.
class StageDependencyError : public ConfigError {
public:
    StageDependencyError(const std::string& stage, const std::string& missing)
        : ConfigError("stage '" + stage + "' requires outputs of stage '" + missing +
                      "' which are not present"),
          missing_stage(missing) {}
    std::string missing_stage;
};

// Non-finite losses or gradients during a training job.
class TrainingError : public Error {
public:
    using Error::Error;
};

// A statistic has no defined value on the given inputs (e.g. no successful
// trajectory at a soft-OPC threshold, or zero rank variance for Spearman).
class UndefinedStatistic : public Error {
public:
    using Error::Error;
};

// Operation requested on an environment that does not support it.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ohs
