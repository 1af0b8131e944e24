#pragma once

#include "hybridtrack/types.hpp"

#include <functional>
#include <optional>

namespace hybridtrack {

/// Scalar input u(t, x) entering the flow through B.
using InputFn = std::function<double(double t, const Vec& x)>;

/// Open ball removed from the flow set (e.g. a neighbourhood of a grazing corner).
struct ExclusionBall {
    Vec center;
    double radius = 0.0;
};

struct Tolerances {
    double event = 1e-10;       ///< band on |Jx+K| and on z1 x + z2 for jump-set membership
    double membership = 1e-8;   ///< band used when validating that a state lies in C or D
};

/**
 * Affine hybrid plant
 *   flow   x' = A x + E + B u(t,x)   on C
 *   jump   x+ = L x + H              on D
 * with C = {Jx+K <= 0, s(J L^-1 x + K - J L^-1 H) <= 0} minus an optional open ball,
 * and D = {x in C : Jx+K = 0, z1 x + z2 <= -jump_margin}.
 */
struct AffineHybridSystem {
    Mat A;
    Vec B;
    Vec E;
    Mat L;
    Vec H;
    RowVec J;
    double K = 0.0;
    RowVec z1;
    double z2 = 0.0;
    int s = -1;
    double jump_margin = 0.0;
    std::optional<ExclusionBall> exclusion;
    Tolerances tol;

    Eigen::Index dim() const { return A.rows(); }

    /// Throws InvalidDimension / InvalidSystem when the data violates the class invariants.
    void validate() const;
};

struct GuardValues {
    double g = 0.0;  ///< J x + K
    double h = 0.0;  ///< z1 x + z2
};

GuardValues guard_values(const AffineHybridSystem& sys, const Vec& x);

/// s (J L^-1 x + K - J L^-1 H): nonpositive on C, zero on the image hyperplane of the guard.
double image_guard_value(const AffineHybridSystem& sys, const Vec& x);

/// n_gd = s L^-T J^T, the gradient of image_guard_value.
Vec image_guard_normal(const AffineHybridSystem& sys);

bool in_exclusion(const AffineHybridSystem& sys, const Vec& x);
bool in_flow_set(const AffineHybridSystem& sys, const Vec& x, double tol);
bool in_jump_set(const AffineHybridSystem& sys, const Vec& x, double tol);
inline bool in_flow_set(const AffineHybridSystem& sys, const Vec& x) { return in_flow_set(sys, x, sys.tol.event); }
inline bool in_jump_set(const AffineHybridSystem& sys, const Vec& x) { return in_jump_set(sys, x, sys.tol.event); }

/// L x + H; throws NotInJumpSet unless x is in D within the event tolerance.
Vec apply_jump(const AffineHybridSystem& sys, const Vec& x);

/// L x + H without the membership check.
Vec jump_map(const AffineHybridSystem& sys, const Vec& x);

Vec flow_rhs(const AffineHybridSystem& sys, double t, const Vec& x, double u);

void check_dim(const AffineHybridSystem& sys, const Vec& x, const char* what);

}  // namespace hybridtrack
