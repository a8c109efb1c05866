#pragma once

#include <stdexcept>
#include <string>

namespace rpo {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedUrl : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class TechniqueNotApplicable : public Error {
public:
    using Error::Error;
};

class NetworkError : public Error {
public:
    using Error::Error;
};

class PortInUse : public Error {
public:
    using Error::Error;
};

// Raised while loading a profile file or mock configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace rpo
