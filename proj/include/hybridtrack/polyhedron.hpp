#pragma once

#include "hybridtrack/types.hpp"

#include <optional>

namespace hybridtrack {

/// {w : Aeq w = beq, Ain w <= bin}
struct Polyhedron {
    Mat Aeq;
    Vec beq;
    Mat Ain;
    Vec bin;

    explicit Polyhedron(Eigen::Index dim = 0) : Aeq(0, dim), beq(0), Ain(0, dim), bin(0) {}

    Eigen::Index dim() const { return Aeq.cols(); }
    void add_equality(const RowVec& a, double b);
    void add_inequality(const RowVec& a, double b);
    bool contains(const Vec& w, double tol) const;
};

/// Euclidean projection of w0, or nullopt when the polyhedron is empty.
/// Exact: enumerates active sets of the inequalities (intended for a handful of rows).
std::optional<Vec> project(const Polyhedron& poly, const Vec& w0, double tol = 1e-9);

/// Projection onto the affine set {A w = b}; nullopt if inconsistent.
std::optional<Vec> project_affine(const Mat& A, const Vec& b, const Vec& w0, double tol = 1e-9);

}  // namespace hybridtrack
