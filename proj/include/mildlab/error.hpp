#pragma once

#include <stdexcept>
#include <string>

namespace mildlab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MILDLAB_ERROR(Name)                                   \
    class Name : public Error {                               \
    public:                                                   \
        explicit Name(const std::string& what) : Error(what) {} \
    }

MILDLAB_ERROR(LambdaOutOfRange);
MILDLAB_ERROR(DimensionMismatch);
MILDLAB_ERROR(NegativeTime);
MILDLAB_ERROR(InvalidOperator);
MILDLAB_ERROR(NotQuasiMonotone);
MILDLAB_ERROR(UnknownFamily);
MILDLAB_ERROR(BoundViolated);
MILDLAB_ERROR(DriverMismatch);
MILDLAB_ERROR(CouplingMismatch);
MILDLAB_ERROR(FamilyNotConvergent);
MILDLAB_ERROR(HypothesisViolated);
MILDLAB_ERROR(ConfigInvalid);
MILDLAB_ERROR(ExperimentFailed);

#undef MILDLAB_ERROR

}  // namespace mildlab
