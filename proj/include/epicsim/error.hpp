#pragma once

#include <stdexcept>
#include <string>

namespace epicsim {

enum class ErrorKind {
    Validation,   // malformed documents, unknown ids, schema problems
    Config,       // parameters that violate a stability or range bound
    Domain,       // argument outside the mathematical domain of an operation
    NumericInput, // non-finite input to a dynamics step
    DeviceStuck,  // write to a device past its endurance
    Version,      // snapshot or message version/checksum mismatch
    Runtime,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

} // namespace epicsim
