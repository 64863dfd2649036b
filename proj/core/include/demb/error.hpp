#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace demb {

// Domain error with a stable code name ("ParseError", "ShapeMismatch", ...).
// The CLI prints the code and maps any Error to exit status 1.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void raise(std::string code, const std::string& message) {
    throw Error(std::move(code), message);
}

}  // namespace demb
