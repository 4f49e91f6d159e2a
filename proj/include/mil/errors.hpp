#ifndef MIL_ERRORS_HPP
#define MIL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mil {

// Bad user-facing configuration: invalid option values, shape mismatches
// at model build, malformed config files. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid value fed to an otherwise well-configured operation
// (empty bag, single-class AUC, label outside {0,1}).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable or malformed input file (image, manifest, checkpoint).
class IngestError : public std::runtime_error {
public:
    explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken internal invariant; indicates a bug, not a user mistake.
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace mil

#endif
