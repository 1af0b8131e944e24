#include "hybridtrack/distance.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace hybridtrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

// Flow-set membership evaluated directly from the system data.
struct FlowSetTest {
    RowVec J, img;
    double K, img_off;
    std::optional<ExclusionBall> ball;

    explicit FlowSetTest(const AffineHybridSystem& sys) : J(sys.J), K(sys.K), ball(sys.exclusion) {
        const Mat Linv = sys.L.inverse();
        img = sys.s * (sys.J * Linv);
        img_off = sys.s * (sys.K - (sys.J * Linv).dot(sys.H));
    }

    bool operator()(const Vec& z, double tol) const {
        if (J.dot(z) + K > tol) return false;
        if (img.dot(z) + img_off > tol) return false;
        if (ball && (z - ball->center).norm() < ball->radius * (1.0 - 1e-12)) return false;
        return true;
    }
};

struct SearchResult {
    double value = kInf;
    double spacing = 0.0;
};

// Grid search over a p-dimensional box followed by repeated zooming around the best points.
// f returns +inf at infeasible parameters.
SearchResult zoom_minimize(int p, const std::function<double(const Vec&)>& f, const Vec& center, double half_width,
                           const OracleGridSpec& spec) {
    const int N = std::max(5, spec.points_per_dim | 1);
    struct Pt {
        double v;
        Vec u;
    };
    auto grid = [&](const Vec& c, double R, std::vector<Pt>& out) {
        const double s = 2.0 * R / (N - 1);
        std::vector<int> idx(static_cast<std::size_t>(p), 0);
        for (;;) {
            Vec u(p);
            for (int d = 0; d < p; ++d) u(d) = c(d) - R + s * idx[static_cast<std::size_t>(d)];
            const double v = f(u);
            if (v < kInf) out.push_back({v, u});
            int d = 0;
            while (d < p && ++idx[static_cast<std::size_t>(d)] == N) idx[static_cast<std::size_t>(d++)] = 0;
            if (d == p) break;
        }
        return s;
    };

    std::vector<Pt> pts;
    double s = grid(center, half_width, pts);
    SearchResult res;
    res.spacing = s;
    if (pts.empty()) return res;
    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.v < b.v; });

    std::vector<Pt> seeds;
    for (const auto& pt : pts) {
        bool distinct = true;
        for (const auto& sd : seeds)
            if ((sd.u - pt.u).lpNorm<Eigen::Infinity>() <= 2.0 * s) distinct = false;
        if (distinct) seeds.push_back(pt);
        if (static_cast<int>(seeds.size()) == spec.tracks) break;
    }

    double final_s = s;
    for (auto seed : seeds) {
        double R = 2.0 * s;
        double ss = s;
        for (int lvl = 1; lvl < spec.levels; ++lvl) {
            std::vector<Pt> local;
            ss = grid(seed.u, R, local);
            for (const auto& pt : local)
                if (pt.v < seed.v) seed = pt;
            R = 2.0 * ss;
        }
        final_s = ss;
        res.value = std::min(res.value, seed.v);
    }
    res.spacing = final_s;
    return res;
}

// Orthonormal basis of the null space of a single row.
Mat hyperplane_basis(const RowVec& a) {
    Eigen::JacobiSVD<Mat> svd(Mat(a), Eigen::ComputeFullV);
    return svd.matrixV().rightCols(a.size() - 1);
}

// Squared distance from m to C, minimized over the pieces of the boundary (and m itself).
double flow_set_distance_sq(const AffineHybridSystem& sys, const FlowSetTest& inC, const Vec& m,
                            const OracleGridSpec& spec, double& err) {
    if (inC(m, 0.0)) return 0.0;
    const Eigen::Index n = m.size();
    double best = kInf;
    err = 0.0;
    auto consider = [&](const SearchResult& r, double lipschitz, int p) {
        if (r.value < best) {
            best = r.value;
            err = lipschitz * std::sqrt(static_cast<double>(p)) * r.spacing;
        }
    };

    // hyperplane faces
    const Mat Linv = sys.L.inverse();
    const RowVec rows[2] = {sys.J, sys.s * (sys.J * Linv)};
    const double offs[2] = {sys.K, sys.s * (sys.K - (sys.J * Linv).dot(sys.H))};
    for (int i = 0; i < 2; ++i) {
        const RowVec& a = rows[i];
        const Vec p0 = -offs[i] * a.transpose() / a.squaredNorm();
        const Mat N = hyperplane_basis(a);
        const int p = static_cast<int>(n - 1);
        auto f = [&](const Vec& u) {
            const Vec z = p0 + N * u;
            return inC(z, 1e-12) ? (z - m).squaredNorm() : kInf;
        };
        const Vec uc = N.transpose() * (m - p0);
        // a point of C lies within this radius: the distance from m to the face plus the exclusion size
        const double R = 2.0 * ((m - p0 - N * uc).norm() + (sys.exclusion ? sys.exclusion->radius : 0.0)) + 1.0;
        consider(zoom_minimize(p, f, uc, R, spec), 1.0, p);
    }

    // sphere of the excluded ball (planar systems)
    if (sys.exclusion) {
        if (n != 2) throw HybridError(ErrorCode::InvalidDimension, "oracle supports excluded balls only in the plane");
        const Vec c = sys.exclusion->center;
        const double rad = sys.exclusion->radius;
        auto f = [&](const Vec& u) {
            Vec z(2);
            z << c(0) + rad * std::cos(u(0)), c(1) + rad * std::sin(u(0));
            if (!inC(z, 1e-12)) return kInf;
            return (z - m).squaredNorm();
        };
        Vec uc(1);
        uc << 0.0;
        consider(zoom_minimize(1, f, uc, kPi, spec), rad, 1);
    }
    return best;
}

}  // namespace

double distance_oracle(const AffineHybridSystem& sys, const Vec& x, const Vec& y, const OracleGridSpec& spec) {
    check_dim(sys, x, "x");
    check_dim(sys, y, "y");
    const FlowSetTest inC(sys);
    const double mt = sys.tol.membership;
    auto in_D = [&](const Vec& z, double tol) {
        return std::abs(sys.J.dot(z) + sys.K) <= tol && sys.z1.dot(z) + sys.z2 + sys.jump_margin <= tol && inC(z, tol);
    };
    if (!inC(x, mt) && !in_D(x, mt)) throw HybridError(ErrorCode::OutsideStateSpace, "x is outside C and D");
    if (!inC(y, mt) && !in_D(y, mt)) throw HybridError(ErrorCode::OutsideStateSpace, "y is outside C and D");
    if (x == y) return 0.0;

    const Eigen::Index n = x.size();
    // diagonal: ||x-z||^2 + ||y-z||^2 = ||x-y||^2/2 + 2||z-m||^2
    const Vec m = 0.5 * (x + y);
    double err = 0.0;
    const double dm2 = flow_set_distance_sq(sys, inC, m, spec, err);
    double best2 = 0.5 * (x - y).squaredNorm() + 2.0 * dm2;
    // d >= sqrt(2) dist(m, C), so the error in dist(m, C) is amplified by at most sqrt(2)
    double best_err = std::sqrt(2.0) * err;

    // jump branches: parameterize the first point of the chain on the guard hyperplane
    const Vec p0 = -sys.K * sys.J.transpose() / sys.J.squaredNorm();
    const Mat N = hyperplane_basis(sys.J);
    const int p = static_cast<int>(n - 1);
    for (int k = 1; k <= spec.kbar; ++k) {
        for (int orient = 0; orient < 2; ++orient) {
            const Vec& a = orient == 0 ? x : y;
            const Vec& b = orient == 0 ? y : x;
            auto f = [&](const Vec& u) {
                Vec z = p0 + N * u;
                const Vec za = z;
                for (int i = 0; i < k; ++i) {
                    if (!in_D(z, 1e-12)) return kInf;
                    z = sys.L * z + sys.H;
                }
                if (!inC(z, 1e-12) && !in_D(z, 1e-12)) return kInf;
                return (a - za).squaredNorm() + (b - z).squaredNorm();
            };
            const Vec uc = N.transpose() * (a - p0);
            // find any feasible point to bound the search box
            double ref = kInf;
            for (double R = 1.0; R < 1e7 && ref == kInf; R *= 4.0) {
                OracleGridSpec coarse = spec;
                coarse.levels = 1;
                coarse.points_per_dim = 201;
                ref = zoom_minimize(p, f, uc, R, coarse).value;
            }
            if (ref == kInf) continue;
            const SearchResult r = zoom_minimize(p, f, uc, 1.01 * std::sqrt(ref) + 1e-12, spec);
            if (r.value < best2) {
                best2 = r.value;
                Mat lift(2 * n, p);
                lift.topRows(n) = N;
                Mat Ak = Mat::Identity(n, n);
                for (int i = 0; i < k; ++i) Ak = sys.L * Ak;
                lift.bottomRows(n) = Ak * N;
                best_err = lift.norm() * std::sqrt(static_cast<double>(p)) * r.spacing;
            }
        }
    }
    if (best_err > spec.target_accuracy)
        throw HybridError(ErrorCode::OracleAccuracy,
                          "grid error bound " + std::to_string(best_err) + " exceeds requested accuracy");
    return std::sqrt(std::max(0.0, best2));
}

}  // namespace hybridtrack
