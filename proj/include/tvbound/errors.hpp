#ifndef TVBOUND_ERRORS_HPP
#define TVBOUND_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tvbound
{

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class DegreeTooLow : public Error
{
public:
    using Error::Error;
};

class DimensionMismatch : public Error
{
public:
    using Error::Error;
};

class UnsupportedDimension : public Error
{
public:
    using Error::Error;
};

class InvalidMeasure : public Error
{
public:
    using Error::Error;
};

class EmptySample : public Error
{
public:
    using Error::Error;
};

class QuadratureNonConvergent : public Error
{
public:
    using Error::Error;
};

class CertificateMismatch : public Error
{
public:
    using Error::Error;
};

class NotFlat : public Error
{
public:
    using Error::Error;
};

class IllConditioned : public Error
{
public:
    using Error::Error;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

} // namespace tvbound

#endif
