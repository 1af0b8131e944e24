#pragma once

#include "hybridtrack/polyhedron.hpp"
#include "hybridtrack/system.hpp"

#include <vector>

namespace hybridtrack {

/// One component of the set of pairs connected by jumps, over w = (z_x, z_y).
struct ChainBranch {
    int kx = 0;  ///< jumps applied to z_x
    int ky = 0;  ///< jumps applied to z_y
    Polyhedron set;
};

/**
 * Branches of the pair set: the diagonal (0,0) plus, for k = 1..kbar, the branches
 * z_y = G^k(z_x) with z_x, ..., G^{k-1} z_x in D, and their mirror images.
 * Branches with jumps on both sides are contained in these because G is injective.
 */
struct JumpChainSet {
    int kbar = 1;
    std::vector<ChainBranch> branches;
};

/// Smallest k >= 1 with G^k(D) intersect D empty; throws InvalidGeometry above kbar_max.
JumpChainSet build_jump_chains(const AffineHybridSystem& sys, int kbar_max = 3);

/// Polyhedron of states z with z, G z, ..., G^{len-1} z in D (the flow-set ball is ignored).
Polyhedron jump_chain_polyhedron(const AffineHybridSystem& sys, int len);

double dist_to_flow_set(const AffineHybridSystem& sys, const Vec& p);
double dist_to_jump_set(const AffineHybridSystem& sys, const Vec& p);
double dist_to_jump_image(const AffineHybridSystem& sys, const Vec& p);

bool in_A(const AffineHybridSystem& sys, const JumpChainSet& chains, const Vec& x, const Vec& y, double tol);
bool in_A(const AffineHybridSystem& sys, const Vec& x, const Vec& y, double tol);

/// Euclidean distance in R^{2n} from (x, y) to the pair set. Exactly symmetric in (x, y).
double distance(const AffineHybridSystem& sys, const JumpChainSet& chains, const Vec& x, const Vec& y);
double distance(const AffineHybridSystem& sys, const Vec& x, const Vec& y);

/// Per-branch values: [diagonal, z_y = G^k z_x for k=1..kbar, z_x = G^k z_y for k=1..kbar].
std::vector<double> branch_distances(const AffineHybridSystem& sys, const JumpChainSet& chains, const Vec& x,
                                     const Vec& y);

struct OracleGridSpec {
    int points_per_dim = 21;
    int levels = 20;
    int tracks = 3;                 ///< independent refinement tracks started from the best coarse points
    double target_accuracy = 1e-7;  ///< bound on the final grid error in the distance value
    int kbar = 1;
};

/// Brute-force grid search with zoom refinement over each branch parameterization.
/// Uses only membership predicates and the jump map. Throws OracleAccuracy when the
/// final grid error bound exceeds target_accuracy.
double distance_oracle(const AffineHybridSystem& sys, const Vec& x, const Vec& y, const OracleGridSpec& spec = {});

/// Diagonal branch for planar examples: ||x - y|| / sqrt(2), valid when the midpoint lies in C.
double d0_closed(const Vec& x, const Vec& y);

/// Branch x = G(z), z in D = {0} x (-inf, -r], for the planar restitution map L = -eps I.
double d1_closed(const Vec& x, const Vec& y, double eps, double r);

}  // namespace hybridtrack
