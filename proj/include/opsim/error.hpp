#pragma once

#include <stdexcept>
#include <string>

namespace opsim {

// Input data or schema problems: missing files, bad fields, dangling refs,
// violated data invariants. Callers surface the message verbatim.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Misuse of an API contract (duplicate keys, unknown references, frozen
// layouts). Distinct from data validation so tests can tell them apart.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Filesystem failures while persisting or loading artifacts.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace opsim
