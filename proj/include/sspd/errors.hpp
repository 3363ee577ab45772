#pragma once

#include <stdexcept>
#include <string>

namespace sspd {

// All recoverable failures surface as SspdError subclasses. The `code()` is a
// stable machine-parseable tag, printed by the CLI as "error:<code>: <what>".
class SspdError : public std::runtime_error {
public:
    SspdError(std::string code, const std::string& msg)
        : std::runtime_error(msg), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define SSPD_DEFINE_ERROR(Name, Code)                                  \
    class Name : public SspdError {                                    \
    public:                                                            \
        explicit Name(const std::string& msg) : SspdError(Code, msg) {} \
    }

SSPD_DEFINE_ERROR(InvalidWindowError, "invalid-window");
SSPD_DEFINE_ERROR(DegenerateTokenError, "degenerate-token");
SSPD_DEFINE_ERROR(ZeroPowerError, "zero-power");
SSPD_DEFINE_ERROR(EmptyBandError, "empty-band");
SSPD_DEFINE_ERROR(DegenerateCorrelationError, "degenerate-correlation");
SSPD_DEFINE_ERROR(InsufficientPeaksError, "insufficient-peaks");
SSPD_DEFINE_ERROR(InvalidBboxError, "invalid-bbox");
SSPD_DEFINE_ERROR(ShapeError, "shape");
SSPD_DEFINE_ERROR(InvalidScaleError, "invalid-scale");
SSPD_DEFINE_ERROR(TrainingDivergenceError, "training-divergence");
SSPD_DEFINE_ERROR(ParseError, "parse");
SSPD_DEFINE_ERROR(ConfigError, "config");
SSPD_DEFINE_ERROR(IoError, "io");

#undef SSPD_DEFINE_ERROR

}  // namespace sspd
