#pragma once

#include <stdexcept>
#include <string>

namespace polyterm {

// Every error the library raises derives from Error and carries a stable
// machine-readable kind used by the CLI diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define POLYTERM_DEFINE_ERROR(Name)                                            \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name, what) {}         \
    }

POLYTERM_DEFINE_ERROR(DegreeError);
POLYTERM_DEFINE_ERROR(ParamError);
POLYTERM_DEFINE_ERROR(ConstraintError);
POLYTERM_DEFINE_ERROR(IndexError);
POLYTERM_DEFINE_ERROR(OverflowError);
POLYTERM_DEFINE_ERROR(DomainError);
POLYTERM_DEFINE_ERROR(NonPositivePriceError);
POLYTERM_DEFINE_ERROR(ThetaError);
POLYTERM_DEFINE_ERROR(ConfigError);
POLYTERM_DEFINE_ERROR(CorrelationError);
POLYTERM_DEFINE_ERROR(MissingStockError);
POLYTERM_DEFINE_ERROR(OutOfBoundsError);
POLYTERM_DEFINE_ERROR(DivergenceError);
POLYTERM_DEFINE_ERROR(TruncationError);
POLYTERM_DEFINE_ERROR(SchemaError);

#undef POLYTERM_DEFINE_ERROR

} // namespace polyterm
