#pragma once

#include <stdexcept>
#include <string>

namespace mflag {

// Base of every library error. Catch this to map any failure to a
// nonzero process exit.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define MFLAG_DEFINE_ERROR(NAME)                                     \
    struct NAME : Error {                                            \
        explicit NAME(const std::string& msg) : Error(msg) {}        \
    }

// numerics
MFLAG_DEFINE_ERROR(ShapeMismatch);
MFLAG_DEFINE_ERROR(RowNormBelowEps);
MFLAG_DEFINE_ERROR(ColNormBelowEps);
MFLAG_DEFINE_ERROR(NotSymmetric);
MFLAG_DEFINE_ERROR(NoConvergence);

// losses
MFLAG_DEFINE_ERROR(BatchTooSmall);
MFLAG_DEFINE_ERROR(NearDegenerateNorm);

// models
MFLAG_DEFINE_ERROR(BadDimChain);
MFLAG_DEFINE_ERROR(StaleCache);

// diagnostics
MFLAG_DEFINE_ERROR(TooFewSamples);
MFLAG_DEFINE_ERROR(TooFewDims);
MFLAG_DEFINE_ERROR(ZeroMatrix);

// synthdata
MFLAG_DEFINE_ERROR(BadFractions);

// runner
MFLAG_DEFINE_ERROR(NonFiniteLoss);
MFLAG_DEFINE_ERROR(IoError);
MFLAG_DEFINE_ERROR(ConfigError);

#undef MFLAG_DEFINE_ERROR

}  // namespace mflag
