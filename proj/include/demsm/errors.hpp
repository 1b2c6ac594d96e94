#pragma once

#include <stdexcept>

namespace demsm {

/// Invalid parameters or configuration, detected before any computation
/// starts. The command-line tool maps these to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Structurally valid inputs that cannot support the requested computation
/// (bad files, missing arms, degenerate resamples). Exit code 3 in the CLI.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyInput : public ValidationError { public: using ValidationError::ValidationError; };
class NegativeWeight : public ValidationError { public: using ValidationError::ValidationError; };
class ZeroTotalWeight : public ValidationError { public: using ValidationError::ValidationError; };
class GammaOutOfRange : public ValidationError { public: using ValidationError::ValidationError; };
class UnboundedGamma : public ValidationError { public: using ValidationError::ValidationError; };
class UnboundedGammaWithNonzeroGamma1 : public ValidationError { public: using ValidationError::ValidationError; };
class TauBelowHalf : public ValidationError { public: using ValidationError::ValidationError; };
class ResolutionOutOfRange : public ValidationError { public: using ValidationError::ValidationError; };
class InfeasibleBox : public ValidationError { public: using ValidationError::ValidationError; };
class EmptyGrid : public ValidationError { public: using ValidationError::ValidationError; };

class EmptySample : public DataError { public: using DataError::DataError; };
class MissingStratumDistribution : public DataError { public: using DataError::DataError; };
class DegenerateResample : public DataError { public: using DataError::DataError; };
class NegativeImpliedDensity : public DataError { public: using DataError::DataError; };

}  // namespace demsm
