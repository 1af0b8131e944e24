#include "hybridtrack/distance.hpp"

#include <cmath>
#include <limits>

namespace hybridtrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct AffinePower {
    Mat A;  // G^k(z) = A z + b
    Vec b;
};

std::vector<AffinePower> powers(const AffineHybridSystem& sys, int kmax) {
    const Eigen::Index n = sys.dim();
    std::vector<AffinePower> out;
    out.push_back({Mat::Identity(n, n), Vec::Zero(n)});
    for (int k = 1; k <= kmax; ++k) {
        const auto& p = out.back();
        out.push_back({sys.L * p.A, sys.L * p.b + sys.H});
    }
    return out;
}

// Flow-set half-spaces as rows a z <= b.
void flow_rows(const AffineHybridSystem& sys, RowVec& a1, double& b1, RowVec& a2, double& b2) {
    const RowVec JLinv = sys.L.transpose().partialPivLu().solve(sys.J.transpose()).transpose();
    a1 = sys.J;
    b1 = -sys.K;
    a2 = sys.s * JLinv;
    b2 = -sys.s * (sys.K - JLinv.dot(sys.H));
}

// Adds constraints "G^i(z) in C" and optionally "in D" for the block of w starting at offset.
void add_state_rows(const AffineHybridSystem& sys, Polyhedron& poly, Eigen::Index offset, const AffinePower& p,
                    bool in_jump) {
    const Eigen::Index n = sys.dim();
    const Eigen::Index dim = poly.dim();
    RowVec a1, a2;
    double b1, b2;
    flow_rows(sys, a1, b1, a2, b2);
    auto lift = [&](const RowVec& r) {
        RowVec full = RowVec::Zero(dim);
        full.segment(offset, n) = r * p.A;
        return full;
    };
    if (in_jump) {
        poly.add_equality(lift(sys.J), -sys.K - sys.J.dot(p.b));
        poly.add_inequality(lift(sys.z1), -sys.z2 - sys.jump_margin - sys.z1.dot(p.b));
    } else {
        poly.add_inequality(lift(a1), b1 - a1.dot(p.b));
    }
    poly.add_inequality(lift(a2), b2 - a2.dot(p.b));
}

// Branch z_b = G^k(z_a) with the chain of z_a in D, over w = (z_a, z_b).
Polyhedron forward_branch(const AffineHybridSystem& sys, const std::vector<AffinePower>& pw, int k) {
    const Eigen::Index n = sys.dim();
    Polyhedron poly(2 * n);
    for (int i = 0; i < k; ++i) add_state_rows(sys, poly, 0, pw[static_cast<std::size_t>(i)], true);
    const auto& pk = pw[static_cast<std::size_t>(k)];
    for (Eigen::Index r = 0; r < n; ++r) {
        RowVec row = RowVec::Zero(2 * n);
        row.segment(0, n) = -pk.A.row(r);
        row(n + r) = 1.0;
        poly.add_equality(row, pk.b(r));
    }
    // the image must lie in C
    RowVec a1, a2;
    double b1, b2;
    flow_rows(sys, a1, b1, a2, b2);
    for (const auto& [a, b] : {std::pair<RowVec, double>{a1, b1}, std::pair<RowVec, double>{a2, b2}}) {
        RowVec row = RowVec::Zero(2 * n);
        row.segment(n, n) = a;
        poly.add_inequality(row, b);
    }
    return poly;
}

Polyhedron mirror(const Polyhedron& p, Eigen::Index n) {
    Polyhedron out(2 * n);
    auto swap_cols = [n](const Mat& m) {
        Mat r(m.rows(), m.cols());
        r.leftCols(n) = m.rightCols(n);
        r.rightCols(n) = m.leftCols(n);
        return r;
    };
    out.Aeq = swap_cols(p.Aeq);
    out.beq = p.beq;
    out.Ain = swap_cols(p.Ain);
    out.bin = p.bin;
    return out;
}

double branch_value(const Polyhedron& poly, const Vec& a, const Vec& b) {
    Vec w0(a.size() + b.size());
    w0 << a, b;
    auto w = project(poly, w0);
    if (!w) return kInf;
    return (*w - w0).norm();
}

void require_state(const AffineHybridSystem& sys, const Vec& x, const char* name) {
    check_dim(sys, x, name);
    if (!in_flow_set(sys, x, sys.tol.membership) && !in_jump_set(sys, x, sys.tol.membership))
        throw HybridError(ErrorCode::OutsideStateSpace, std::string(name) + " is outside C and D");
}

}  // namespace

Polyhedron jump_chain_polyhedron(const AffineHybridSystem& sys, int len) {
    const auto pw = powers(sys, len);
    Polyhedron poly(sys.dim());
    for (int i = 0; i < len; ++i) add_state_rows(sys, poly, 0, pw[static_cast<std::size_t>(i)], true);
    return poly;
}

JumpChainSet build_jump_chains(const AffineHybridSystem& sys, int kbar_max) {
    const Eigen::Index n = sys.dim();
    JumpChainSet set;
    set.kbar = 0;
    for (int k = 1; k <= kbar_max; ++k) {
        if (!project(jump_chain_polyhedron(sys, k + 1), Vec::Zero(n))) {
            set.kbar = k;
            break;
        }
    }
    if (set.kbar == 0)
        throw HybridError(ErrorCode::InvalidGeometry,
                          "jump chains of length " + std::to_string(kbar_max + 1) + " stay in D; increase kbar_max");

    const auto pw = powers(sys, set.kbar);
    Polyhedron diag(2 * n);
    for (Eigen::Index r = 0; r < n; ++r) {
        RowVec row = RowVec::Zero(2 * n);
        row(r) = 1.0;
        row(n + r) = -1.0;
        diag.add_equality(row, 0.0);
    }
    add_state_rows(sys, diag, 0, pw[0], false);
    set.branches.push_back({0, 0, diag});
    for (int k = 1; k <= set.kbar; ++k) {
        Polyhedron fwd = forward_branch(sys, pw, k);
        set.branches.push_back({0, k, mirror(fwd, n)});
        set.branches.push_back({k, 0, std::move(fwd)});
    }
    return set;
}

double dist_to_flow_set(const AffineHybridSystem& sys, const Vec& p) {
    check_dim(sys, p, "point");
    const Eigen::Index n = sys.dim();
    RowVec a1, a2;
    double b1, b2;
    flow_rows(sys, a1, b1, a2, b2);
    const RowVec rows[2] = {a1, a2};
    const double rhs[2] = {b1, b2};
    constexpr double tol = 1e-12;

    auto halfspaces_ok = [&](const Vec& q) {
        for (int i = 0; i < 2; ++i)
            if (rows[i].dot(q) - rhs[i] > tol * (1.0 + std::abs(rhs[i]))) return false;
        return true;
    };
    auto outside_ball = [&](const Vec& q) {
        if (!sys.exclusion) return true;
        return (q - sys.exclusion->center).norm() >= sys.exclusion->radius * (1.0 - 1e-12);
    };

    double best = kInf;
    for (int mask = 0; mask < 4; ++mask) {
        Mat A(__builtin_popcount(mask), n);
        Vec b(A.rows());
        Eigen::Index r = 0;
        for (int i = 0; i < 2; ++i)
            if (mask & (1 << i)) {
                A.row(r) = rows[i];
                b(r++) = rhs[i];
            }
        auto q = project_affine(A, b, p);
        if (!q) continue;
        if (halfspaces_ok(*q) && outside_ball(*q)) best = std::min(best, (*q - p).norm());
        if (!sys.exclusion) continue;

        // nearest point of the sphere restricted to the affine set
        auto c = project_affine(A, b, sys.exclusion->center);
        if (!c) continue;
        const double rad2 = sys.exclusion->radius * sys.exclusion->radius - (*c - sys.exclusion->center).squaredNorm();
        if (rad2 < 0.0) continue;
        const double rad = std::sqrt(rad2);
        std::vector<Vec> dirs;
        const Vec v = *q - *c;
        if (v.norm() > 1e-14 * (1.0 + p.norm())) {
            dirs.push_back(v.normalized());
        } else {
            // degenerate: any tangent direction inside the affine set
            Mat basis = Mat::Identity(n, n);
            if (A.rows() > 0) basis = Eigen::FullPivLU<Mat>(A).kernel();
            for (Eigen::Index k = 0; k < basis.cols(); ++k) {
                if (basis.col(k).norm() == 0.0) continue;
                dirs.push_back(basis.col(k).normalized());
                dirs.push_back(-basis.col(k).normalized());
            }
        }
        for (const Vec& d : dirs) {
            const Vec cand = *c + rad * d;
            if (halfspaces_ok(cand)) best = std::min(best, (cand - p).norm());
        }
    }
    if (best == kInf) throw HybridError(ErrorCode::InvalidGeometry, "flow set has no feasible point near query");
    return best;
}

double dist_to_jump_set(const AffineHybridSystem& sys, const Vec& p) {
    check_dim(sys, p, "point");
    auto q = project(jump_chain_polyhedron(sys, 1), p);
    if (!q) throw HybridError(ErrorCode::InvalidGeometry, "jump set is empty");
    return (*q - p).norm();
}

double dist_to_jump_image(const AffineHybridSystem& sys, const Vec& p) {
    check_dim(sys, p, "point");
    // w in G(D)  <=>  L^{-1}(w - H) in D
    const Polyhedron d = jump_chain_polyhedron(sys, 1);
    const auto lu = sys.L.partialPivLu();
    const Mat Linv = lu.inverse();
    const Vec shift = Linv * sys.H;
    Polyhedron img(sys.dim());
    img.Aeq = d.Aeq * Linv;
    img.beq = d.beq + d.Aeq * shift;
    img.Ain = d.Ain * Linv;
    img.bin = d.bin + d.Ain * shift;
    auto q = project(img, p);
    if (!q) throw HybridError(ErrorCode::InvalidGeometry, "jump image is empty");
    return (*q - p).norm();
}

bool in_A(const AffineHybridSystem& sys, const JumpChainSet& chains, const Vec& x, const Vec& y, double tol) {
    check_dim(sys, x, "x");
    check_dim(sys, y, "y");
    if ((x - y).norm() <= tol) return true;
    auto chain_hits = [&](const Vec& a, const Vec& b) {
        Vec z = a;
        for (int k = 1; k <= chains.kbar; ++k) {
            if (!in_jump_set(sys, z, tol)) return false;
            z = jump_map(sys, z);
            if ((z - b).norm() <= tol) return true;
        }
        return false;
    };
    return chain_hits(x, y) || chain_hits(y, x);
}

bool in_A(const AffineHybridSystem& sys, const Vec& x, const Vec& y, double tol) {
    return in_A(sys, build_jump_chains(sys), x, y, tol);
}

std::vector<double> branch_distances(const AffineHybridSystem& sys, const JumpChainSet& chains, const Vec& x,
                                     const Vec& y) {
    require_state(sys, x, "x");
    require_state(sys, y, "y");
    std::vector<double> out;
    const Vec m = 0.5 * (x + y);
    const double dm = dist_to_flow_set(sys, m);
    out.push_back(std::sqrt(0.5 * (x - y).squaredNorm() + 2.0 * dm * dm));
    std::vector<double> fwd, bwd;
    for (const auto& br : chains.branches) {
        if (br.kx > 0 && br.ky == 0) {
            // both orientations use the same polyhedron so that d(x,y) = d(y,x) bit for bit
            fwd.push_back(branch_value(br.set, x, y));
            bwd.push_back(branch_value(br.set, y, x));
        }
    }
    out.insert(out.end(), fwd.begin(), fwd.end());
    out.insert(out.end(), bwd.begin(), bwd.end());
    return out;
}

double distance(const AffineHybridSystem& sys, const JumpChainSet& chains, const Vec& x, const Vec& y) {
    if (x.size() == y.size() && x == y) {
        require_state(sys, x, "x");
        return 0.0;
    }
    double best = kInf;
    for (double v : branch_distances(sys, chains, x, y)) best = std::min(best, v);
    return best;
}

double distance(const AffineHybridSystem& sys, const Vec& x, const Vec& y) {
    return distance(sys, build_jump_chains(sys), x, y);
}

double d0_closed(const Vec& x, const Vec& y) { return (x - y).norm() / std::sqrt(2.0); }

double d1_closed(const Vec& x, const Vec& y, double eps, double r) {
    const double z = (y(1) - eps * x(1)) / (1.0 + eps * eps);
    if (z < -r) return std::sqrt(x(0) * x(0) + y(0) * y(0) + std::pow(eps * y(1) + x(1), 2) / (1.0 + eps * eps));
    return std::sqrt(x(0) * x(0) + y(0) * y(0) + std::pow(x(1) - eps * r, 2) + std::pow(y(1) + r, 2));
}

}  // namespace hybridtrack
