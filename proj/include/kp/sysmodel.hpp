#pragma once

#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include "kp/types.hpp"

namespace kp {

/// One step of the model x_{k+1} = A x_k + B w_k, y_k = C x_k + D w_k + n_k.
struct SystemStep {
  Matrix A;  // n_x x n_x
  Matrix B;  // n_x x n_w
  Matrix C;  // n_y x n_x
  Matrix D;  // n_y x n_w
  Matrix Q;  // n_w x n_w, process-noise variance
};

/// Discrete-time linear time-varying system over an m-step window.
///
/// When `periodic` is set, step indices wrap modulo the stored window, so the
/// same object describes the infinite m-periodic system.
struct TimeVaryingLinearSystem {
  int m = 0;
  std::vector<SystemStep> steps;
  bool periodic = false;
  double dt = 0.0;  // step duration in seconds, metadata only

  Index nx() const { return steps.empty() ? 0 : steps.front().A.rows(); }
  Index nw() const { return steps.empty() ? 0 : steps.front().B.cols(); }
  Index ny(Index k) const { return step(k).C.rows(); }

  /// Step accessor with periodic wrapping; throws ConfigError when a
  /// non-periodic window is indexed out of range.
  const SystemStep& step(Index k) const;

  void validate() const;
};

/// Block matrices of one m-step batch: X_k = calA x_{km} + calB W_k,
/// Y_k = calC X_k + calD W_k + N_k, with maskM extracting x_{(k+1)m}.
struct LiftedSystem {
  Matrix calA;  // m*n_x x n_x
  Matrix calB;  // m*n_x x m*n_w, block lower triangular
  Matrix calC;  // N_y x m*n_x, block diagonal
  Matrix calD;  // N_y x m*n_w, block diagonal
  Matrix calQ;  // m*n_w x m*n_w, block diagonal
  Matrix maskM;  // n_x x m*n_x, [0 | I]
  std::vector<Index> channelDims;  // per-step measurement dimensions

  Index totalMeasurements() const { return calC.rows(); }
};

/// Stable first-order shaping filter z_{k+1} = G z_k + H lambda_k feeding the
/// process-noise channel (colored noise).
struct NoiseFilter {
  Matrix G;
  Matrix H;
  Matrix inputVariance;  // variance of the white input lambda

  void validate() const;
};

/// Time-invariant augmented system for the stacked state Gamma_k = [x_km; Z_k]
/// of an m-periodic plant driven by filtered noise. N_x = n_x + m*n_w.
struct PeriodicAugmentedSystem {
  Matrix Am;      // N_x x N_x
  Matrix Bm;      // N_x x m*n_w, zero top block
  Matrix Cm;      // N_y x N_x
  Matrix Qm;      // m*n_w x m*n_w, block diagonal
  Matrix maskMx;  // n_x x N_x, [I | 0]
  std::vector<Index> channelDims;

  Index Nx() const { return Am.rows(); }
  Index nx() const { return maskMx.rows(); }
  Index ny() const { return Cm.rows(); }
};

/// Detectability/stabilizability report from the PBH rank tests.
struct StabilityReport {
  bool detectable = true;
  bool stabilizable = true;
  std::vector<std::complex<double>> undetectableModes;
  std::vector<std::complex<double>> unstabilizableModes;

  bool clean() const { return detectable && stabilizable; }
};

using MatrixFun = std::function<Matrix(double)>;

/// Builds the m-step lifted system starting at `startIndex`. Dynamics
/// matrices are taken at startIndex..startIndex+m-1, measurement matrices at
/// startIndex+1..startIndex+m.
LiftedSystem build_lifted(const TimeVaryingLinearSystem& sys, Index startIndex);

/// Builds the time-invariant Gamma-state system of an m-periodic plant with
/// colored process noise. Throws ConfigError for non-periodic input.
PeriodicAugmentedSystem build_periodic_augmented(const TimeVaryingLinearSystem& sys,
                                                 const NoiseFilter& filt);

/// Zero-order-hold discretization: Ad = exp(Ac dt), Bd = int_0^dt exp(Ac t) dt Bc,
/// both from one augmented matrix exponential.
std::pair<Matrix, Matrix> discretize_zoh(const Matrix& Ac, const Matrix& Bc, double dt);

struct TustinSystem {
  Matrix Ad, Bd, Cd, Dd;
};

/// Bilinear (Tustin) discretization of (Ac,Bc,Cc,Dc).
TustinSystem discretize_tustin(const Matrix& Ac, const Matrix& Bc, const Matrix& Cc,
                               const Matrix& Dc, double dt);

/// State-transition matrix Phi(t1,t0) of dx/dt = A(t)x by RK4 integration of
/// the fundamental matrix with `steps` uniform substeps.
Matrix state_transition(const MatrixFun& Afun, double t0, double t1, int steps);

/// PBH rank tests on (Am, Cm-with-active-channels) and (Am, sqrt(Bm Qm Bm^T)).
/// Channels with precisions[i] <= 0 are removed from Cm before the test.
StabilityReport check_detectability_stabilizability(const PeriodicAugmentedSystem& aug,
                                                    const Vector& precisions);

}  // namespace kp
