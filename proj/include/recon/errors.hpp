#pragma once

#include <stdexcept>
#include <string>

namespace recon {

// Base class for every recoverable failure raised by this library.
// Config/usage mistakes (bad dimensions, bad flags) additionally derive from
// ConfigError so callers can map them to a distinct process exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

// ---- shape / input validation ----

struct DimensionMismatch : ConfigError {
  using ConfigError::ConfigError;
};

struct NonFiniteInput : ConfigError {
  using ConfigError::ConfigError;
};

struct UnsupportedOrder : ConfigError {
  using ConfigError::ConfigError;
};

// ---- numerical failures ----

struct NotSymmetric : Error {
  using Error::Error;
};

struct ComplexSpectrum : Error {
  using Error::Error;
};

struct NumericalBreakdown : Error {
  using Error::Error;
};

struct InterpolationRankDeficient : Error {
  InterpolationRankDeficient(long rank_, long needed_)
      : Error("interpolation rank deficient: rank " + std::to_string(rank_) +
              " < required " + std::to_string(needed_)),
        rank(rank_),
        needed(needed_) {}
  long rank;
  long needed;
};

struct InconsistentNeuron : Error {
  InconsistentNeuron(long neuron_, const std::string& what_)
      : Error("neuron " + std::to_string(neuron_) + ": " + what_),
        neuron(neuron_) {}
  long neuron;
};

struct RankAmbiguous : Error {
  using Error::Error;
};

struct DecompositionFailed : Error {
  using Error::Error;
};

struct SynthesisFailed : Error {
  using Error::Error;
};

struct Diverged : Error {
  using Error::Error;
};

struct InfeasibleMargins : Error {
  using Error::Error;
};

struct CandidateCapExceeded : Error {
  using Error::Error;
};

struct GenerationFailed : Error {
  using Error::Error;
};

}  // namespace recon
