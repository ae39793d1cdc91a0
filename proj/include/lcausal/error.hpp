#pragma once

#include <stdexcept>
#include <string>

namespace lcausal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad file, bad schema, missing column, invalid request.
class InputError : public Error {
public:
    using Error::Error;
};

/// A model or estimator could not produce an estimate.
class EstimationError : public Error {
public:
    using Error::Error;
};

class RankDeficientError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

class ConvergenceError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

/// Too many bootstrap replicates failed.
class BootstrapAbort : public Error {
public:
    using Error::Error;
};

}  // namespace lcausal
