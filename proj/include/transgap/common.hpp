#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace transgap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Failure classes, mapped one-to-one onto CLI exit codes.
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void usage_error(const std::string& msg) { throw Error(ErrorKind::Usage, msg); }
[[noreturn]] inline void data_error(const std::string& msg) { throw Error(ErrorKind::Data, msg); }
[[noreturn]] inline void numeric_error(const std::string& msg) { throw Error(ErrorKind::Numeric, msg); }

}  // namespace transgap
