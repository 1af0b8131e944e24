#include "hybridtrack/system.hpp"

#include <cmath>
#include <sstream>

namespace hybridtrack {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidDimension: return "InvalidDimension";
        case ErrorCode::InvalidSystem: return "InvalidSystem";
        case ErrorCode::NotInJumpSet: return "NotInJumpSet";
        case ErrorCode::OutsideStateSpace: return "OutsideStateSpace";
        case ErrorCode::EscapeDetected: return "EscapeDetected";
        case ErrorCode::IntegratorStall: return "IntegratorStall";
        case ErrorCode::ZenoLimit: return "ZenoLimit";
        case ErrorCode::EmptyDomain: return "EmptyDomain";
        case ErrorCode::OracleAccuracy: return "OracleAccuracy";
        case ErrorCode::AttributionAmbiguous: return "AttributionAmbiguous";
        case ErrorCode::SingularDesign: return "SingularDesign";
        case ErrorCode::InvalidGeometry: return "InvalidGeometry";
        case ErrorCode::AssumptionViolated: return "AssumptionViolated";
        case ErrorCode::OutOfHorizon: return "OutOfHorizon";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

void check_dim(const AffineHybridSystem& sys, const Vec& x, const char* what) {
    if (x.size() != sys.dim()) {
        std::ostringstream os;
        os << what << " has dimension " << x.size() << ", expected " << sys.dim();
        throw HybridError(ErrorCode::InvalidDimension, os.str());
    }
}

namespace {

// A point of D far enough from the truncation edge, used for orientation checks.
Vec sample_jump_point(const AffineHybridSystem& sys, double depth) {
    const Eigen::Index n = sys.dim();
    Mat A(2, n);
    A.row(0) = sys.J;
    A.row(1) = sys.z1;
    Vec b(2);
    b << -sys.K, -sys.z2 - sys.jump_margin - depth;
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(A);
    Vec p = cod.solve(b);
    if ((A * p - b).norm() > 1e-9 * (1.0 + b.norm())) {
        // guard hyperplane parallel to z1: D is empty or the whole hyperplane
        Mat a = sys.J;
        Vec bb(1);
        bb << -sys.K;
        p = Eigen::CompleteOrthogonalDecomposition<Mat>(a).solve(bb);
    }
    return p;
}

}  // namespace

void AffineHybridSystem::validate() const {
    const Eigen::Index n = A.rows();
    if (n == 0 || A.cols() != n) throw HybridError(ErrorCode::InvalidDimension, "A must be square and nonempty");
    if (B.size() != n) throw HybridError(ErrorCode::InvalidDimension, "B must have length n");
    if (E.size() != n) throw HybridError(ErrorCode::InvalidDimension, "E must have length n");
    if (L.rows() != n || L.cols() != n) throw HybridError(ErrorCode::InvalidDimension, "L must be n x n");
    if (H.size() != n) throw HybridError(ErrorCode::InvalidDimension, "H must have length n");
    if (J.size() != n) throw HybridError(ErrorCode::InvalidDimension, "J must have length n");
    if (z1.size() != n) throw HybridError(ErrorCode::InvalidDimension, "z1 must have length n");
    if (exclusion && exclusion->center.size() != n)
        throw HybridError(ErrorCode::InvalidDimension, "exclusion center must have length n");

    Eigen::JacobiSVD<Mat> svd(L);
    const auto& sv = svd.singularValues();
    if (sv(n - 1) < 1e-12 * sv(0)) throw HybridError(ErrorCode::InvalidSystem, "L is singular");
    if (J.norm() == 0.0) throw HybridError(ErrorCode::InvalidSystem, "J must be nonzero");
    if (z1.norm() == 0.0) throw HybridError(ErrorCode::InvalidSystem, "z1 must be nonzero");
    if (s != 1 && s != -1) throw HybridError(ErrorCode::InvalidSystem, "s must be +1 or -1");
    if (jump_margin < 0.0) throw HybridError(ErrorCode::InvalidSystem, "jump_margin must be nonnegative");

    // Orientation: G(D) must lie in the half-space Jx+K <= 0, and stepping from G(D)
    // against n_gd must enter that half-space, i.e. n_gd points out of C.
    const Vec n_gd = image_guard_normal(*this);
    for (double depth : {1.0, 10.0}) {
        const Vec p = sample_jump_point(*this, depth);
        const Vec gp = jump_map(*this, p);
        const double scale = 1.0 + gp.norm();
        if (J.dot(gp) + K > 1e-9 * scale)
            throw HybridError(ErrorCode::InvalidSystem, "jump map sends D outside the half-space Jx+K <= 0");
        const Vec q = gp - 1e-6 * scale * n_gd.normalized();
        if (J.dot(q) + K > 1e-9 * scale)
            throw HybridError(ErrorCode::InvalidSystem, "sign s does not orient n_gd out of the flow set");
    }
}

GuardValues guard_values(const AffineHybridSystem& sys, const Vec& x) {
    check_dim(sys, x, "state");
    return {sys.J.dot(x) + sys.K, sys.z1.dot(x) + sys.z2};
}

double image_guard_value(const AffineHybridSystem& sys, const Vec& x) {
    const RowVec JLinv = sys.L.transpose().partialPivLu().solve(sys.J.transpose()).transpose();
    return sys.s * (JLinv.dot(x) + sys.K - JLinv.dot(sys.H));
}

Vec image_guard_normal(const AffineHybridSystem& sys) {
    return sys.s * sys.L.transpose().partialPivLu().solve(sys.J.transpose());
}

bool in_exclusion(const AffineHybridSystem& sys, const Vec& x) {
    if (!sys.exclusion) return false;
    return (x - sys.exclusion->center).norm() < sys.exclusion->radius;
}

bool in_flow_set(const AffineHybridSystem& sys, const Vec& x, double tol) {
    const GuardValues gv = guard_values(sys, x);
    if (gv.g > tol) return false;
    if (image_guard_value(sys, x) > tol) return false;
    if (sys.exclusion && (x - sys.exclusion->center).norm() < sys.exclusion->radius - tol) return false;
    return true;
}

bool in_jump_set(const AffineHybridSystem& sys, const Vec& x, double tol) {
    const GuardValues gv = guard_values(sys, x);
    if (std::abs(gv.g) > tol) return false;
    if (gv.h + sys.jump_margin > tol) return false;
    return in_flow_set(sys, x, tol);
}

Vec jump_map(const AffineHybridSystem& sys, const Vec& x) { return sys.L * x + sys.H; }

Vec apply_jump(const AffineHybridSystem& sys, const Vec& x) {
    check_dim(sys, x, "state");
    if (!in_jump_set(sys, x, sys.tol.event)) throw HybridError(ErrorCode::NotInJumpSet, "state is not in D");
    return jump_map(sys, x);
}

Vec flow_rhs(const AffineHybridSystem& sys, double /*t*/, const Vec& x, double u) {
    return sys.A * x + sys.E + sys.B * u;
}

}  // namespace hybridtrack
