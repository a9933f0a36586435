#include "epicsim/error.hpp"

namespace epicsim {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Config: return "config";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::NumericInput: return "numeric-input";
    case ErrorKind::DeviceStuck: return "device-stuck";
    case ErrorKind::Version: return "version";
    case ErrorKind::Runtime: return "runtime";
    }
    return "unknown";
}

} // namespace epicsim
