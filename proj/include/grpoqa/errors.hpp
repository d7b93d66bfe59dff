#pragma once

#include <stdexcept>
#include <string>

namespace grpoqa {

// Error taxonomy, mapped by the CLI to exit codes:
//   InputError / ParseError            -> 1  (validation)
//   StateError / IoError               -> 2  (runtime)
//   TransportError / ServiceError      -> 3  (external service)

struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ServiceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace grpoqa
