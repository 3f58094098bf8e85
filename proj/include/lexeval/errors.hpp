// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lexeval {

// Error taxonomy shared by every module. The CLI maps these onto its exit
// code contract: input/config/schema problems exit 2, backend problems exit 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller passed a value outside an operation's stated precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Configuration file or run setup is unusable.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A checklist item id or state file does not match the loaded schema.
class SchemaViolation : public Error {
public:
    using Error::Error;
};

// A patch or extraction broke a state-machine rule (missing evidence,
// sentinel misuse, duplicate patch keys).
class ProtocolViolation : public Error {
public:
    using Error::Error;
};

// Prompt rendering hit an unbound placeholder or unknown template id.
class TemplateError : public Error {
public:
    using Error::Error;
};

// No structured block matching the expected shape could be read from a
// model reply. Callers retry a bounded number of times, then degrade.
class ParseError : public Error {
public:
    using Error::Error;
};

// Transport retries exhausted, or a non-retryable backend failure.
class BackendUnavailable : public Error {
public:
    using Error::Error;
};

// Request exceeds the backend's declared context limit. The gateway never
// truncates; the caller decides what to cut.
class ContextOverflow : public Error {
public:
    using Error::Error;
};

// A score is mathematically undefined for the given inputs (e.g. zero
// applicable items). Reported, never silently folded to 0.
class UndefinedScore : public Error {
public:
    using Error::Error;
};

} // namespace lexeval
