#pragma once

#include <stdexcept>
#include <string>

namespace mddra {

// Anything a caller did wrong: malformed config, bad CSV, domain violations.
// The CLI maps this to exit code 1; every other exception is internal (exit 2).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

}  // namespace mddra
