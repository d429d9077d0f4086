#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace ttasgfem {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or index ranges that do not fit together.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid user input (configuration, parameters out of range).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown: indefinite systems, singular factorizations, ...
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace ttasgfem
