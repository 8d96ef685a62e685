#pragma once

#include <string>
#include <vector>

#include "kp/lmi.hpp"
#include "kp/types.hpp"

namespace kp {

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter, NumericalFailure };

std::string to_string(SolveStatus s);

struct SolverSettings {
  double tolFeas = 1e-8;
  double tolGap = 1e-8;
  int maxIter = 200;
  bool verbose = false;
  bool parallelSchur = true;   // serial reference kernel when false
  Vector interiorStart;        // strictly feasible start; empty means run phase 1
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  Vector x;
  double objective = 0.0;
  double primalResidual = 0.0;  // worst relative eigenvalue violation over blocks
  double dualResidual = 0.0;
  double gap = 0.0;             // relative complementarity gap
  int iterations = 0;
  Vector interiorPoint;  // strictly feasible point found in phase 1, reusable
};

/// Primal-dual interior-point solve (HKM direction, Mehrotra
/// predictor-corrector, two-phase feasibility).
SolveResult solve(const SdpProblem& p, const SolverSettings& settings = {});
SolveResult solve(const SdpProblem& p, double tolFeas, double tolGap, int maxIter);

/// Re-verifies feasibility of x by eigenvalue checks on every block evaluated
/// from the raw problem data, plus the box constraints.
bool verify_feasibility(const SdpProblem& p, const Vector& x, double tolFeas);

namespace detail {

/// Solver-internal form of one LMI block: coefficient terms flattened into
/// column matrices so the Schur complement assembly is a handful of GEMMs.
struct WorkBlock {
  Index size = 0;
  Matrix F0;
  Matrix A;                // size x T, left term vectors
  Matrix W;                // size x T, right term vectors
  std::vector<Index> var;  // T, owning variable of each term
};

std::vector<WorkBlock> make_work_blocks(const SdpProblem& p);

/// Schur matrix H_ij = sum_b tr(F_bi Sinv_b F_bj X_b); straightforward serial
/// loops, kept as the reference for the parallel kernel.
Matrix schur_reference(const std::vector<WorkBlock>& blocks, const std::vector<Matrix>& Sinv,
                       const std::vector<Matrix>& X, Index numVars);

/// Same contract as schur_reference; GEMM formulation with OpenMP.
Matrix schur_parallel(const std::vector<WorkBlock>& blocks, const std::vector<Matrix>& Sinv,
                      const std::vector<Matrix>& X, Index numVars);

}  // namespace detail

}  // namespace kp
