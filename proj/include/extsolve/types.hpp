#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace extsolve {

// Points live in R^3; planar geometry keeps z = 0.
using Point = Eigen::Vector3d;

// k x k block, k <= 3, stored without heap allocation.
using KernelValue = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OperatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown when a kernel is requested at (numerically) coincident points.
class SingularityError : public std::runtime_error {
public:
    SingularityError(const std::string& what, std::size_t target, std::size_t source)
        : std::runtime_error(what), target_index(target), source_index(source) {}

    std::size_t target_index;
    std::size_t source_index;
};

class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Evaluation requested outside the region where a solution is defined.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace extsolve
