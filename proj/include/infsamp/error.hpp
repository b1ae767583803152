// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file infsamp/error.hpp
//! Exception types shared by every module.
//---------------------------------------------------------------------------//
#ifndef INFSAMP_ERROR_HPP
#define INFSAMP_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace infsamp
{

enum class ErrorKind
{
    invalid_argument,
    invalid_state,
    empty_cell,
    empty_domain,
    singular_design,
    invalid_weight_model,
    degenerate_design,
    unrecoverable_support,
    empty_complement,
    unsupported_level,
    degenerate_weights,
};

inline char const* to_string(ErrorKind kind)
{
    switch (kind)
    {
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::invalid_state: return "invalid_state";
        case ErrorKind::empty_cell: return "empty_cell";
        case ErrorKind::empty_domain: return "empty_domain";
        case ErrorKind::singular_design: return "singular_design";
        case ErrorKind::invalid_weight_model: return "invalid_weight_model";
        case ErrorKind::degenerate_design: return "degenerate_design";
        case ErrorKind::unrecoverable_support: return "unrecoverable_support";
        case ErrorKind::empty_complement: return "empty_complement";
        case ErrorKind::unsupported_level: return "unsupported_level";
        case ErrorKind::degenerate_weights: return "degenerate_weights";
    }
    return "unknown";
}

/*!
 * Base error. Carries a machine-readable kind and, where one exists, the
 * index of the offending cell, domain, level or unit.
 */
class Error : public std::runtime_error
{
  public:
    static constexpr std::size_t no_index = static_cast<std::size_t>(-1);

    Error(ErrorKind kind, std::string const& what, std::size_t index = no_index)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what)
        , kind_(kind)
        , index_(index)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }
    std::size_t index() const noexcept { return index_; }
    bool has_index() const noexcept { return index_ != no_index; }

  private:
    ErrorKind kind_;
    std::size_t index_;
};

[[noreturn]] inline void
fail(ErrorKind kind, std::string const& what, std::size_t index = Error::no_index)
{
    throw Error(kind, what, index);
}

inline void require(bool cond, std::string const& what)
{
    if (!cond)
        fail(ErrorKind::invalid_argument, what);
}

}  // namespace infsamp

#endif  // INFSAMP_ERROR_HPP
