// SPDX-License-Identifier: Apache-2.0
//
// Dense matrix type and the error hierarchy shared by every module.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dropgan {

/// Row-major dense matrix of doubles. Samples, activations, parameters and
/// gradients all live in this one container; a batch is one row per item.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible for the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A NaN or Inf appeared where only finite values are allowed.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration; the message lists every violation found.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// Builds a matrix from nested initializer lists, row by row.
inline Matrix make_matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = r == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.begin()->size());
    Matrix m(r, c);
    Eigen::Index i = 0;
    for (const auto& row : rows) {
        if (static_cast<Eigen::Index>(row.size()) != c) {
            throw ShapeError("make_matrix: ragged rows");
        }
        Eigen::Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

inline Matrix scalar_matrix(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return m;
}

}  // namespace dropgan
