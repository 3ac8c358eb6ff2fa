#include "ccr/errors.hpp"

namespace ccr {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Structural: return "structural";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Resource: return "resource";
    case ErrorKind::UndefinedEstimand: return "undefined_estimand";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Config: return "config";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::DataQuality: return "data_quality";
    }
    return "unknown";
}

} // namespace ccr
