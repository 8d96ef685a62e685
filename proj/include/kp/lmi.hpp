#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kp/sysmodel.hpp"
#include "kp/types.hpp"

namespace kp {

/// One symmetric outer-product term (a w^T + w a^T)/2. Coefficient matrices
/// of affine LMI constraints are stored as sums of these; the low rank is
/// what the solver's Schur assembly exploits.
struct SymOuter {
  Vector a;
  Vector w;
};

/// Affine constraint  constant + sum_i x_i * coefficient(i)  >= 0.
struct LmiBlock {
  Index size = 0;
  Matrix constant;
  std::vector<std::vector<SymOuter>> terms;  // per variable, possibly empty

  /// Dense materialization of the i-th coefficient matrix.
  Matrix coefficient(Index var) const;

  /// constant + sum_i x_i coefficient(i).
  Matrix eval(const Vector& x) const;
};

/// Canonical container: minimize objective^T x subject to every block PSD and
/// boxLower <= x <= boxUpper (+-inf allowed).
struct SdpProblem {
  Index numVars = 0;
  Vector objective;
  std::vector<LmiBlock> blocks;
  Vector boxLower;
  Vector boxUpper;
  std::vector<std::string> varNames;

  void validate() const;
};

/// Packing of a symmetric matrix variable into scalar decision variables:
/// upper triangle row-wise, off-diagonal entries scaled by sqrt(2) so the
/// canonical inner product is preserved.
struct SymVarLayout {
  Index offset = 0;
  Index dim = 0;

  Index count() const { return dim * (dim + 1) / 2; }
  Index var(Index i, Index j) const;       // i <= j
  Matrix unpack(const Vector& x) const;
};

/// Theorem-1 constraint system: variables s, batch gain K, certificate F.
struct Thm1Problem {
  SdpProblem sdp;
  Index ny = 0;   // stacked measurement dimension
  Index mnx = 0;  // lifted state dimension
  Index nx = 0;
  SymVarLayout flayout;

  Vector s(const Vector& x) const { return x.head(ny); }
  Matrix gain(const Vector& x) const;  // m n_x x N_y
  Matrix F(const Vector& x) const { return flayout.unpack(x); }
};

/// Theorem-2 constraint system: variables s, steady gain K, Z, P^d.
struct Thm2Problem {
  SdpProblem sdp;
  Index ny = 0;
  Index Nx = 0;
  Index nx = 0;
  SymVarLayout zlayout;
  SymVarLayout playout;

  Vector s(const Vector& x) const { return x.head(ny); }
  Matrix gain(const Vector& x) const;  // N_x x N_y
  Matrix Z(const Vector& x) const { return zlayout.unpack(x); }
  Matrix Pd(const Vector& x) const { return playout.unpack(x); }
};

/// Assembles the one-update precision problem for a lifted window with prior
/// covariance Pminus of the stacked state.
Thm1Problem assemble_thm1(const LiftedSystem& lift, const Matrix& Pminus, double gamma_d,
                          const Vector& weights, const Vector& sMax);

/// Assembles the steady-state precision problem with the Young-relation
/// coupling parameterized by delta.
Thm2Problem assemble_thm2(const PeriodicAugmentedSystem& aug, double gamma_d, double delta,
                          const Vector& weights, const Vector& sMax);

/// Next reweighting iteration: W_i = 1/(sStar_i + eps). eps <= 0 selects the
/// default 1e-6 * max(1, ||sStar||_inf).
Vector reweight(const Vector& sStar, double eps = -1.0);

/// Plain-text sparse listing (sizes, objective, then per-variable triplets)
/// for external cross-checks. Box bounds are appended as 1x1 blocks.
void write_sdpa_like(const SdpProblem& p, std::ostream& os);

}  // namespace kp
