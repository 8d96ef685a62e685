#pragma once

#include <vector>

#include "kp/sysmodel.hpp"
#include "kp/types.hpp"

namespace kp {

/// Gaussian state belief. The covariance is symmetrized and eigenvalue-clipped
/// at zero on construction; asymmetry or negative eigenvalues beyond tolerance
/// raise ConfigError.
struct GaussianBelief {
  Vector mean;
  Matrix cov;

  GaussianBelief(Vector mean_, const Matrix& cov_);
};

/// Kalman time update: mean' = A mean, cov' = A cov A^T + B Q B^T.
GaussianBelief kf_predict(const GaussianBelief& b, const Matrix& A, const Matrix& B,
                          const Matrix& Q);

/// Kalman measurement update with the optimal gain, Joseph-form covariance.
GaussianBelief kf_update(const GaussianBelief& b, const Matrix& C, const Matrix& R,
                         const Vector& y);

struct BatchUpdateResult {
  GaussianBelief posteriorLast;  // statistics of x_{(k+1)m}
  Matrix gain;                   // m*n_x x N_y batch Kalman gain
};

/// One lifted measurement update: given the posterior of x_{km} and the
/// stacked window measurements Y, returns the posterior of x_{(k+1)m}.
BatchUpdateResult batch_update(const LiftedSystem& lift, const GaussianBelief& prior,
                               const Matrix& R, const Vector& Y);

/// Joseph-form posterior (I-KC) P (I-KC)^T + K R K^T for a given, possibly
/// suboptimal, gain.
Matrix posterior_with_gain(const Matrix& Pminus, const Matrix& C, const Matrix& R,
                           const Matrix& K);

/// One prior-to-prior Riccati iteration
/// P' = A (P - P C^T [C P C^T + R]^-1 C P) A^T + Qeff.
/// C may have zero rows (no sensing), giving the open-loop Lyapunov step.
Matrix rde_step(const Matrix& P, const Matrix& A, const Matrix& C, const Matrix& Qeff,
                const Matrix& R);

/// Stabilizing solution of the filter DARE, i.e. the fixed point of rde_step.
/// Doubling (SDA) accelerated with a plain fixed-point fallback; the result
/// satisfies ||rde_step(P)-P||/(1+||P||) <= tol.
Matrix solve_dare(const Matrix& A, const Matrix& C, const Matrix& Qeff, const Matrix& R,
                  double tol = 1e-11, int maxIter = 20000);

/// True iff the rde_step sequence started at P0 is monotone non-increasing in
/// the PSD order for `iters` steps.
bool rde_monotone_check(const Matrix& P0, const Matrix& A, const Matrix& C,
                        const Matrix& Qeff, const Matrix& R, int iters);

struct CovarianceTrajectory {
  std::vector<double> times;
  std::vector<Matrix> cov;
  std::vector<Vector> mean;  // empty unless a mean was propagated
};

/// RK4 integration of dSigma/dt = A(t) Sigma + Sigma A(t)^T + Qeff on a
/// uniform grid; optionally propagates a mean via dmu/dt = A(t) mu.
CovarianceTrajectory lyapunov_propagate(const MatrixFun& Afun, const Matrix& Qeff,
                                        const Matrix& Sigma0, double t0, double t1,
                                        int steps, const Vector* mu0 = nullptr);

/// Q_k = SigmaNext - Ad SigmaNow Ad^T, symmetrized and eigenvalue-clipped at
/// zero. Clipping beyond 1e-6 * ||.|| means the inputs were inconsistent and
/// raises NumericalError.
Matrix discrete_Q_from_continuous(const Matrix& SigmaNext, const Matrix& Ad,
                                  const Matrix& SigmaNow);

/// Principal square root of a symmetric PSD matrix by eigendecomposition,
/// negative eigenvalues clipped to zero.
Matrix matrix_sqrt_psd(const Matrix& P);

}  // namespace kp
