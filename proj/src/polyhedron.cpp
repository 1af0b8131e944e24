#include "hybridtrack/polyhedron.hpp"

#include <limits>

namespace hybridtrack {

void Polyhedron::add_equality(const RowVec& a, double b) {
    Aeq.conservativeResize(Aeq.rows() + 1, Eigen::NoChange);
    Aeq.row(Aeq.rows() - 1) = a;
    beq.conservativeResize(beq.size() + 1);
    beq(beq.size() - 1) = b;
}

void Polyhedron::add_inequality(const RowVec& a, double b) {
    Ain.conservativeResize(Ain.rows() + 1, Eigen::NoChange);
    Ain.row(Ain.rows() - 1) = a;
    bin.conservativeResize(bin.size() + 1);
    bin(bin.size() - 1) = b;
}

bool Polyhedron::contains(const Vec& w, double tol) const {
    for (Eigen::Index i = 0; i < Aeq.rows(); ++i)
        if (std::abs(Aeq.row(i).dot(w) - beq(i)) > tol * (1.0 + std::abs(beq(i)))) return false;
    for (Eigen::Index i = 0; i < Ain.rows(); ++i)
        if (Ain.row(i).dot(w) - bin(i) > tol * (1.0 + std::abs(bin(i)))) return false;
    return true;
}

std::optional<Vec> project_affine(const Mat& A, const Vec& b, const Vec& w0, double tol) {
    if (A.rows() == 0) return w0;
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(A);
    const Vec r = A * w0 - b;
    Vec w = w0 - cod.solve(r);
    if ((A * w - b).norm() > tol * (1.0 + b.norm())) return std::nullopt;
    return w;
}

std::optional<Vec> project(const Polyhedron& poly, const Vec& w0, double tol) {
    const Eigen::Index m = poly.Ain.rows();
    if (m > 20) throw HybridError(ErrorCode::InvalidDimension, "too many inequality rows for active-set enumeration");
    const Eigen::Index ne = poly.Aeq.rows();
    const Eigen::Index n = poly.dim();

    std::optional<Vec> best;
    double best_d = std::numeric_limits<double>::infinity();
    const unsigned long subsets = 1ul << m;
    for (unsigned long mask = 0; mask < subsets; ++mask) {
        const int active = __builtin_popcountl(mask);
        Mat A(ne + active, n);
        Vec b(ne + active);
        A.topRows(ne) = poly.Aeq;
        b.head(ne) = poly.beq;
        Eigen::Index row = ne;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (mask & (1ul << i)) {
                A.row(row) = poly.Ain.row(i);
                b(row) = poly.bin(i);
                ++row;
            }
        }
        auto w = project_affine(A, b, w0, tol);
        if (!w || !poly.contains(*w, tol)) continue;
        const double d = (*w - w0).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = std::move(w);
        }
        if (mask == 0) break;  // unconstrained optimum is feasible
    }
    return best;
}

}  // namespace hybridtrack
