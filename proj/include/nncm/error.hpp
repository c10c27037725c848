#ifndef NNCM_ERROR_HPP
#define NNCM_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nncm
{

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or degenerate input data (non-finite values, empty sets, off-grid samples).
class DataError : public Error
{
public:
    using Error::Error;
};

/// Inconsistent network or state dimensions.
class ShapeError : public Error
{
public:
    using Error::Error;
};

/// Training produced a non-finite cost.
class DivergenceError : public Error
{
public:
    DivergenceError(std::size_t epoch, const std::string &what)
        : Error(what), epoch_(epoch)
    {
    }
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

/// Malformed text input; carries a 1-based line (files) or 0-based offset (expressions).
class ParseError : public Error
{
public:
    ParseError(std::size_t position, const std::string &what)
        : Error(what), position_(position)
    {
    }
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class IoError : public Error
{
public:
    using Error::Error;
};

}

#endif
