#pragma once

#include <stdexcept>
#include <string>

namespace wlcg {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// token wire / crypto
class MalformedToken : public Error {
  public:
    using Error::Error;
};
class InvalidClaims : public Error {
  public:
    using Error::Error;
};
class UnsupportedAlgorithm : public Error {
  public:
    using Error::Error;
};
class KidMismatch : public Error {
  public:
    using Error::Error;
};

// trust anchor resolution
class FetchFailed : public Error {
  public:
    using Error::Error;
};
class IssuerMismatch : public Error {
  public:
    using Error::Error;
};
class MalformedMetadata : public Error {
  public:
    using Error::Error;
};
class UnknownIssuer : public Error {
  public:
    using Error::Error;
};
class UnknownKid : public Error {
  public:
    using Error::Error;
};
class DuplicateIssuer : public Error {
  public:
    using Error::Error;
};

// authorization
class MalformedScopeEntry : public Error {
  public:
    using Error::Error;
};
class MalformedPath : public Error {
  public:
    using Error::Error;
};

// profile conformance at issuance
class ShapeViolation : public Error {
  public:
    using Error::Error;
};

// configuration / io
class ConfigError : public Error {
  public:
    using Error::Error;
};
class IoError : public Error {
  public:
    using Error::Error;
};

// scenario harness
class ScenarioFailure : public Error {
  public:
    using Error::Error;
};

} // namespace wlcg
