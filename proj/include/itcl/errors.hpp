#pragma once

#include <stdexcept>
#include <string>

namespace itcl {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define ITCL_DEFINE_ERROR(NAME)                                                \
    struct NAME : Error {                                                      \
        explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {}     \
    }

// task streams
ITCL_DEFINE_ERROR(NonDivisibleSplit);
ITCL_DEFINE_ERROR(EmptyDataset);
ITCL_DEFINE_ERROR(LabelSpaceMismatch);

// model assembly / transforms
ITCL_DEFINE_ERROR(ShapeMismatch);
ITCL_DEFINE_ERROR(UnknownBlockNames);
ITCL_DEFINE_ERROR(UnknownGroup);
ITCL_DEFINE_ERROR(MissingTransform);
ITCL_DEFINE_ERROR(InsertionPointUnavailable);

// incremental classifier
ITCL_DEFINE_ERROR(UnregisteredSession);
ITCL_DEFINE_ERROR(NoTrainedSessions);

// regularizers
ITCL_DEFINE_ERROR(NoTeacher);

// trainer
ITCL_DEFINE_ERROR(OutOfOrderSession);
ITCL_DEFINE_ERROR(IncompatibleStrategy);

// metrics
ITCL_DEFINE_ERROR(IncompleteRow);
ITCL_DEFINE_ERROR(IncompleteMatrix);

// experiment front end / IO
ITCL_DEFINE_ERROR(ConfigInvalid);
ITCL_DEFINE_ERROR(CheckpointMissing);
ITCL_DEFINE_ERROR(MissingMatrix);
ITCL_DEFINE_ERROR(IoError);

#undef ITCL_DEFINE_ERROR

} // namespace itcl
