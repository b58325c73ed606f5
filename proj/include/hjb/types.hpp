#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hjb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Error categories used to map failures onto CLI exit codes.
enum class ErrorKind {
    config,   // malformed input, bad flags, unknown problem
    domain,   // non-finite coefficient evaluation, out-of-range query
    numeric,  // factorization failure, blow-up, step-size too large
    state,    // missing state (empty form set, missing layer)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline constexpr const char* kLibraryVersion = "0.1.0";

}  // namespace hjb
