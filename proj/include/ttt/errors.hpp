#pragma once

#include <stdexcept>
#include <string>

namespace ttt {

// All library failures derive from Error so callers (CLI, bindings) can catch
// a single type and still report the category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* category() const noexcept { return "error"; }
};

#define TTT_DEFINE_ERROR(Name, tag)                                            \
    class Name : public Error {                                                \
    public:                                                                    \
        using Error::Error;                                                    \
        const char* category() const noexcept override { return tag; }         \
    };

TTT_DEFINE_ERROR(ShapeError, "shape")
TTT_DEFINE_ERROR(DimensionError, "dimension")
TTT_DEFINE_ERROR(ContractError, "contract")
TTT_DEFINE_ERROR(NumericError, "numeric")
TTT_DEFINE_ERROR(ConfigError, "config")
TTT_DEFINE_ERROR(DegenerateError, "degenerate")
TTT_DEFINE_ERROR(RankError, "rank")
TTT_DEFINE_ERROR(FormatError, "format")
TTT_DEFINE_ERROR(VersionError, "version")
TTT_DEFINE_ERROR(IoError, "io")
TTT_DEFINE_ERROR(SizeError, "size")

#undef TTT_DEFINE_ERROR

// Raised by training when a loss turns non-finite; carries where it happened.
class TrainingError : public NumericError {
public:
    TrainingError(const std::string& what, int epoch, int batch)
        : NumericError(what), epoch_(epoch), batch_(batch) {}
    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

}  // namespace ttt
