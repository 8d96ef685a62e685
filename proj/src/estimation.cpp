#include "kp/estimation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace kp {

namespace {

// Clips eigenvalues below zero; throws when the most negative eigenvalue
// exceeds rejectTol * ||M|| in magnitude.
Matrix psd_clipped(const Matrix& M, double rejectTol, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const double scale = std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -rejectTol * scale)
    throw ConfigError(std::string(what) + ": matrix is not positive semidefinite");
  Vector lam = es.eigenvalues().cwiseMax(0.0);
  return symmetrized(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

Eigen::LDLT<Matrix> innovation_ldlt(const Matrix& S) {
  Eigen::LDLT<Matrix> ldlt(symmetrized(S));
  const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 1e-14 * dmax))
    throw NumericalError("singular innovation covariance");
  return ldlt;
}

}  // namespace

GaussianBelief::GaussianBelief(Vector mean_, const Matrix& cov_) : mean(std::move(mean_)) {
  if (cov_.rows() != cov_.cols() || cov_.rows() != mean.size())
    throw ConfigError("belief covariance must be n x n with n = mean size");
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError("belief covariance must be symmetric");
  cov = psd_clipped(symmetrized(cov_), 1e-10, "belief covariance");
}

GaussianBelief kf_predict(const GaussianBelief& b, const Matrix& A, const Matrix& B,
                          const Matrix& Q) {
  const Index n = b.mean.size();
  if (A.rows() != n || A.cols() != n || B.rows() != n || Q.rows() != B.cols() ||
      Q.cols() != B.cols())
    throw ConfigError("kf_predict: inconsistent dimensions");
  return {A * b.mean, symmetrized(A * b.cov * A.transpose() + B * Q * B.transpose())};
}

GaussianBelief kf_update(const GaussianBelief& b, const Matrix& C, const Matrix& R,
                         const Vector& y) {
  const Index n = b.mean.size();
  if (C.cols() != n || R.rows() != C.rows() || R.cols() != C.rows() || y.size() != C.rows())
    throw ConfigError("kf_update: inconsistent dimensions");
  if (C.rows() == 0) return b;
  const auto ldlt = innovation_ldlt(C * b.cov * C.transpose() + R);
  const Matrix K = ldlt.solve(C * b.cov).transpose();
  const Matrix IKC = Matrix::Identity(n, n) - K * C;
  return {b.mean + K * (y - C * b.mean),
          symmetrized(IKC * b.cov * IKC.transpose() + K * R * K.transpose())};
}

BatchUpdateResult batch_update(const LiftedSystem& lift, const GaussianBelief& prior,
                               const Matrix& R, const Vector& Y) {
  const Index mn = lift.calA.rows();
  const Index Ny = lift.totalMeasurements();
  if (prior.mean.size() != lift.calA.cols())
    throw ConfigError("batch_update: prior dimension must equal n_x");
  if (R.rows() != Ny || R.cols() != Ny || Y.size() != Ny)
    throw ConfigError("batch_update: R and Y must match the stacked measurement size");

  const Matrix Pminus = symmetrized(lift.calA * prior.cov * lift.calA.transpose() +
                                    lift.calB * lift.calQ * lift.calB.transpose());
  const auto ldlt = innovation_ldlt(lift.calC * Pminus * lift.calC.transpose() + R);
  const Matrix K = ldlt.solve(lift.calC * Pminus).transpose();

  const Vector xbar = lift.calA * prior.mean;
  const Vector xplus = xbar + K * (Y - lift.calC * xbar);
  const Matrix IKC = Matrix::Identity(mn, mn) - K * lift.calC;
  const Matrix Pplus = symmetrized(IKC * Pminus * IKC.transpose() + K * R * K.transpose());

  return {GaussianBelief(lift.maskM * xplus,
                         symmetrized(lift.maskM * Pplus * lift.maskM.transpose())),
          K};
}

Matrix posterior_with_gain(const Matrix& Pminus, const Matrix& C, const Matrix& R,
                           const Matrix& K) {
  const Index n = Pminus.rows();
  if (C.cols() != n || K.rows() != n || K.cols() != C.rows() || R.rows() != C.rows() ||
      R.cols() != C.rows())
    throw ConfigError("posterior_with_gain: inconsistent dimensions");
  const Matrix IKC = Matrix::Identity(n, n) - K * C;
  return symmetrized(IKC * Pminus * IKC.transpose() + K * R * K.transpose());
}

Matrix rde_step(const Matrix& P, const Matrix& A, const Matrix& C, const Matrix& Qeff,
                const Matrix& R) {
  const Index n = P.rows();
  if (A.rows() != n || A.cols() != n || Qeff.rows() != n || Qeff.cols() != n ||
      C.cols() != n || R.rows() != C.rows() || R.cols() != C.rows())
    throw ConfigError("rde_step: inconsistent dimensions");
  if (C.rows() == 0) return symmetrized(A * P * A.transpose() + Qeff);
  const auto ldlt = innovation_ldlt(C * P * C.transpose() + R);
  const Matrix CP = C * P;
  return symmetrized(A * (P - CP.transpose() * ldlt.solve(CP)) * A.transpose() + Qeff);
}

namespace {

double dare_residual(const Matrix& P, const Matrix& A, const Matrix& C, const Matrix& Qeff,
                     const Matrix& R) {
  return (rde_step(P, A, C, Qeff, R) - P).norm() / (1.0 + P.norm());
}

// Structure-preserving doubling (SDA); see Chu, Fan, Lin & Wang, "Structure-
// Preserving Algorithms for Periodic Discrete-Time Algebraic Riccati
// Equations", Int. J. Control 77(8), 2004. H_k equals the rde_step iterate
// after 2^k steps from H_0 = Qeff, written here for the filter-form DARE
// (control form with A -> A^T, B -> C^T).
bool try_sda(const Matrix& A, const Matrix& C, const Matrix& Qeff, const Matrix& R,
             double tol, Matrix* out) {
  Matrix G;
  if (C.rows() == 0) {
    G = Matrix::Zero(A.rows(), A.rows());
  } else {
    Eigen::LLT<Matrix> Rllt(symmetrized(R));
    if (Rllt.info() != Eigen::Success) return false;
    G = C.transpose() * Rllt.solve(C);
  }
  Matrix Ak = A.transpose();
  Matrix H = Qeff;
  for (int it = 0; it < 100; ++it) {
    const Matrix W = Matrix::Identity(A.rows(), A.rows()) + G * H;
    Eigen::PartialPivLU<Matrix> lu(W);
    const Matrix V1 = lu.solve(Ak);
    const Matrix V2 = lu.solve(G.transpose()).transpose();
    G += Ak * V2 * Ak.transpose();
    const Matrix Hnext = H + V1.transpose() * H * Ak;
    Ak = Ak * V1;
    const double delta = (Hnext - H).norm();
    H = Hnext;
    if (!H.allFinite()) return false;
    if (delta <= tol * std::max(1.0, H.norm())) {
      *out = symmetrized(H);
      return true;
    }
  }
  return false;
}

}  // namespace

Matrix solve_dare(const Matrix& A, const Matrix& C, const Matrix& Qeff, const Matrix& R,
                  double tol, int maxIter) {
  if (tol <= 0) throw ConfigError("solve_dare: tol must be positive");
  Matrix P;
  bool have = try_sda(A, C, Qeff, R, tol, &P);
  if (!have) P = Qeff;

  // Polish (or run from scratch) with plain fixed-point iterations until the
  // residual contract holds.
  double res = dare_residual(P, A, C, Qeff, R);
  int it = 0;
  while (res > tol && it < maxIter) {
    P = rde_step(P, A, C, Qeff, R);
    if (!P.allFinite()) throw NumericalError("solve_dare: iteration diverged");
    res = dare_residual(P, A, C, Qeff, R);
    ++it;
  }
  if (res > tol) throw NumericalError("solve_dare: no convergence within maxIter");
  return symmetrized(P);
}

bool rde_monotone_check(const Matrix& P0, const Matrix& A, const Matrix& C,
                        const Matrix& Qeff, const Matrix& R, int iters) {
  Matrix P = symmetrized(P0);
  for (int j = 0; j < iters; ++j) {
    const Matrix Pnext = rde_step(P, A, C, Qeff, R);
    Eigen::SelfAdjointEigenSolver<Matrix> es(P - Pnext, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, P.norm())) return false;
    P = Pnext;
  }
  return true;
}

CovarianceTrajectory lyapunov_propagate(const MatrixFun& Afun, const Matrix& Qeff,
                                        const Matrix& Sigma0, double t0, double t1,
                                        int steps, const Vector* mu0) {
  if (steps < 1) throw ConfigError("lyapunov_propagate requires steps >= 1");
  const Index n = Sigma0.rows();
  if (Sigma0.cols() != n || Qeff.rows() != n || Qeff.cols() != n)
    throw ConfigError("lyapunov_propagate: inconsistent dimensions");

  const double h = (t1 - t0) / steps;
  const auto sigmaDot = [&](double t, const Matrix& S) -> Matrix {
    const Matrix At = Afun(t);
    return At * S + S * At.transpose() + Qeff;
  };

  CovarianceTrajectory traj;
  traj.times.reserve(steps + 1);
  traj.cov.reserve(steps + 1);
  Matrix S = symmetrized(Sigma0);
  Vector mu;
  if (mu0) {
    mu = *mu0;
    traj.mean.reserve(steps + 1);
    traj.mean.push_back(mu);
  }
  traj.times.push_back(t0);
  traj.cov.push_back(S);
  for (int i = 0; i < steps; ++i) {
    const double t = t0 + i * h;
    const Matrix k1 = sigmaDot(t, S);
    const Matrix k2 = sigmaDot(t + 0.5 * h, S + 0.5 * h * k1);
    const Matrix k3 = sigmaDot(t + 0.5 * h, S + 0.5 * h * k2);
    const Matrix k4 = sigmaDot(t + h, S + h * k3);
    S = symmetrized(S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    if (mu0) {
      const Matrix A1 = Afun(t);
      const Matrix Ah = Afun(t + 0.5 * h);
      const Matrix A2 = Afun(t + h);
      const Vector m1 = A1 * mu;
      const Vector m2 = Ah * (mu + 0.5 * h * m1);
      const Vector m3 = Ah * (mu + 0.5 * h * m2);
      const Vector m4 = A2 * (mu + h * m3);
      mu += (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
      traj.mean.push_back(mu);
    }
    traj.times.push_back(t0 + (i + 1) * h);
    traj.cov.push_back(S);
  }
  return traj;
}

Matrix discrete_Q_from_continuous(const Matrix& SigmaNext, const Matrix& Ad,
                                  const Matrix& SigmaNow) {
  const Index n = SigmaNext.rows();
  if (SigmaNext.cols() != n || Ad.rows() != n || Ad.cols() != n || SigmaNow.rows() != n ||
      SigmaNow.cols() != n)
    throw ConfigError("discrete_Q_from_continuous: inconsistent dimensions");
  const Matrix Qd = symmetrized(SigmaNext - Ad * SigmaNow * Ad.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(Qd);
  const double scale = std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-6 * scale)
    throw NumericalError("discrete_Q_from_continuous: inputs are inconsistent");
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  return symmetrized(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

Matrix matrix_sqrt_psd(const Matrix& P) {
  if (P.rows() != P.cols()) throw ConfigError("matrix_sqrt_psd: matrix must be square");
  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw ConfigError("matrix_sqrt_psd: matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(P));
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  return symmetrized(es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
                     es.eigenvectors().transpose());
}

}  // namespace kp
