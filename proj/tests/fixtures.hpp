#pragma once

#include "hybridtrack/system.hpp"

#include <cmath>

namespace fixtures {

using hybridtrack::AffineHybridSystem;
using hybridtrack::Mat;
using hybridtrack::RowVec;
using hybridtrack::Vec;

inline Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

inline RowVec r2(double a, double b) {
    RowVec v(2);
    v << a, b;
    return v;
}

inline Mat m2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m << a, b, c, d;
    return m;
}

/// Ball data exactly as tabulated, with the guard row J = [1, 0].
inline AffineHybridSystem literal_ball() {
    AffineHybridSystem s;
    s.A = m2(0, 1, 0, 0);
    s.B = v2(0, 1);
    s.E = v2(0, -9.81);
    s.L = -Mat::Identity(2, 2);
    s.H = v2(0, 0);
    s.J = r2(1, 0);
    s.K = 0;
    s.z1 = r2(0, 1);
    s.z2 = 0;
    s.s = -1;
    return s;
}

/// Ball with the flow set {x1 >= 0}, truncated jump set and excluded corner.
inline AffineHybridSystem ball(double r = 0.01) {
    AffineHybridSystem s = literal_ball();
    s.J = r2(-1, 0);
    s.jump_margin = r;
    s.exclusion = hybridtrack::ExclusionBall{v2(0, 0), r};
    return s;
}

inline AffineHybridSystem oscillator(double eps = 0.9, double r = 0.01) {
    AffineHybridSystem s = ball(r);
    s.A = m2(0, 1, -1, -0.02);
    s.E = v2(0, 1);
    s.L = -eps * Mat::Identity(2, 2);
    s.exclusion = hybridtrack::ExclusionBall{v2(0, -(1 - eps) * r / 2), (1 + eps) * r / 2};
    return s;
}

}  // namespace fixtures
