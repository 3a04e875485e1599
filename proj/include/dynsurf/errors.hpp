// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dynsurf {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };   // shape mismatch
struct ContractError : Error { using Error::Error; };    // API precondition violated
struct NumericError : Error { using Error::Error; };     // NaN/Inf where finite required
struct InputError : Error { using Error::Error; };       // bad user-supplied data
struct ConfigError : Error { using Error::Error; };      // invalid configuration
struct ParseError : Error { using Error::Error; };       // malformed file contents
struct IoError : Error { using Error::Error; };          // filesystem failures
struct DivergenceError : Error { using Error::Error; };  // training blew up
struct NoSurfaceError : Error { using Error::Error; };   // empty extraction

}  // namespace dynsurf
