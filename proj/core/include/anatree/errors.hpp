#pragma once

#include <stdexcept>
#include <string>

namespace anatree {

// Domain-specific error hierarchy. Everything derives from std::runtime_error
// so callers that don't care about the distinction can catch one base type.

struct SchemaError : std::runtime_error { using std::runtime_error::runtime_error; };
struct ParseError : std::runtime_error { using std::runtime_error::runtime_error; };
struct AttributeTypeError : std::runtime_error { using std::runtime_error::runtime_error; };
struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };
struct EligibilityError : std::runtime_error { using std::runtime_error::runtime_error; };
struct AnatomyError : std::runtime_error { using std::runtime_error::runtime_error; };
struct AuthenticationError : std::runtime_error { using std::runtime_error::runtime_error; };
struct IntegrityError : std::runtime_error { using std::runtime_error::runtime_error; };
struct FormatError : std::runtime_error { using std::runtime_error::runtime_error; };
struct ProtocolError : std::runtime_error { using std::runtime_error::runtime_error; };
struct EmptyInputError : std::runtime_error { using std::runtime_error::runtime_error; };
struct IoError : std::runtime_error { using std::runtime_error::runtime_error; };

} // namespace anatree
