#include "kp/sysmodel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "kp/estimation.hpp"

namespace kp {

namespace {

// Relative singular-value cutoff for the PBH rank tests.
constexpr double kRankTol = 1e-8;

bool approx_symmetric(const Matrix& M, double tol) {
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, M.cwiseAbs().maxCoeff());
}

Index rank_svd(const Eigen::MatrixXcd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cutoff = kRankTol * sv(0);
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++r;
  return r;
}

}  // namespace

const SystemStep& TimeVaryingLinearSystem::step(Index k) const {
  if (k < 0) throw ConfigError("step index must be non-negative");
  if (periodic) return steps[static_cast<size_t>(k) % steps.size()];
  if (static_cast<size_t>(k) >= steps.size())
    throw ConfigError("window out of range: step " + std::to_string(k) + " of " +
                      std::to_string(steps.size()));
  return steps[static_cast<size_t>(k)];
}

void TimeVaryingLinearSystem::validate() const {
  if (m < 1) throw ConfigError("window length m must be positive");
  if (steps.empty()) throw ConfigError("system has no steps");
  const Index n = steps.front().A.rows();
  const Index w = steps.front().B.cols();
  for (size_t j = 0; j < steps.size(); ++j) {
    const auto& s = steps[j];
    const std::string at = " at step " + std::to_string(j);
    if (s.A.rows() != n || s.A.cols() != n) throw ConfigError("A must be n_x x n_x" + at);
    if (s.B.rows() != n || s.B.cols() != w) throw ConfigError("B must be n_x x n_w" + at);
    if (s.C.cols() != n) throw ConfigError("C column count must equal n_x" + at);
    if (s.D.rows() != s.C.rows() || s.D.cols() != w)
      throw ConfigError("D must be n_y x n_w with n_y matching C" + at);
    if (s.Q.rows() != w || s.Q.cols() != w) throw ConfigError("Q must be n_w x n_w" + at);
    if (!approx_symmetric(s.Q, 1e-12)) throw ConfigError("Q must be symmetric" + at);
    if (w > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(s.Q), Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, s.Q.norm()))
        throw ConfigError("Q must be positive semidefinite" + at);
    }
  }
}

void NoiseFilter::validate() const {
  const Index w = G.rows();
  if (G.cols() != w || H.rows() != w || H.cols() != w ||
      inputVariance.rows() != w || inputVariance.cols() != w)
    throw ConfigError("noise filter matrices must all be n_w x n_w");
  if (!approx_symmetric(inputVariance, 1e-12))
    throw ConfigError("filter input variance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(inputVariance), Eigen::EigenvaluesOnly);
  if (w > 0 && es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, inputVariance.norm()))
    throw ConfigError("filter input variance must be positive semidefinite");
  if (w > 0) {
    Eigen::EigenSolver<Matrix> ges(G);
    if (ges.eigenvalues().cwiseAbs().maxCoeff() >= 1.0)
      throw ConfigError("noise filter must be stable (spectral radius of G < 1)");
  }
}

LiftedSystem build_lifted(const TimeVaryingLinearSystem& sys, Index startIndex) {
  sys.validate();
  if (startIndex < 0) throw ConfigError("startIndex must be non-negative");
  const Index n = sys.nx();
  const Index w = sys.nw();
  const Index m = sys.m;

  LiftedSystem lift;
  lift.channelDims.reserve(static_cast<size_t>(m));
  Index Ny = 0;
  for (Index j = 1; j <= m; ++j) {
    const Index d = sys.ny(startIndex + j);
    lift.channelDims.push_back(d);
    Ny += d;
  }

  // calA row block j = A_{s+j} ... A_{s}, the j+1 step transition from x_s.
  lift.calA.resize(m * n, n);
  Matrix prod = Matrix::Identity(n, n);
  for (Index j = 0; j < m; ++j) {
    prod = sys.step(startIndex + j).A * prod;
    lift.calA.middleRows(j * n, n) = prod;
  }

  // calB block (j,i) = A_{s+j} ... A_{s+i+1} B_{s+i} for j > i, B on the
  // block diagonal, zero above it.
  lift.calB = Matrix::Zero(m * n, m * w);
  for (Index i = 0; i < m; ++i) {
    Matrix acc = sys.step(startIndex + i).B;
    lift.calB.block(i * n, i * w, n, w) = acc;
    for (Index j = i + 1; j < m; ++j) {
      acc = sys.step(startIndex + j).A * acc;
      lift.calB.block(j * n, i * w, n, w) = acc;
    }
  }

  // Measurements are taken at steps s+1 .. s+m.
  lift.calC = Matrix::Zero(Ny, m * n);
  lift.calD = Matrix::Zero(Ny, m * w);
  Index row = 0;
  for (Index j = 0; j < m; ++j) {
    const auto& st = sys.step(startIndex + 1 + j);
    lift.calC.block(row, j * n, st.C.rows(), n) = st.C;
    lift.calD.block(row, j * w, st.C.rows(), w) = st.D;
    row += st.C.rows();
  }

  lift.calQ = Matrix::Zero(m * w, m * w);
  for (Index j = 0; j < m; ++j)
    lift.calQ.block(j * w, j * w, w, w) = sys.step(startIndex + j).Q;

  lift.maskM = Matrix::Zero(n, m * n);
  lift.maskM.rightCols(n) = Matrix::Identity(n, n);
  return lift;
}

PeriodicAugmentedSystem build_periodic_augmented(const TimeVaryingLinearSystem& sys,
                                                 const NoiseFilter& filt) {
  if (!sys.periodic) throw ConfigError("periodic augmentation requires a periodic system");
  filt.validate();
  if (filt.G.rows() != sys.nw())
    throw ConfigError("noise filter dimension must equal n_w");

  const LiftedSystem lift = build_lifted(sys, 0);
  const Index n = sys.nx();
  const Index w = sys.nw();
  const Index m = sys.m;
  const Index mw = m * w;

  const Matrix calG = Eigen::kroneckerProduct(Matrix::Identity(m, m), filt.G);
  const Matrix calH = Eigen::kroneckerProduct(Matrix::Identity(m, m), filt.H);

  PeriodicAugmentedSystem aug;
  aug.Am = Matrix::Zero(n + mw, n + mw);
  aug.Am.topLeftCorner(n, n) = lift.calA.bottomRows(n);    // M_m calA
  aug.Am.topRightCorner(n, mw) = lift.calB.bottomRows(n);  // M_m calB
  aug.Am.bottomRightCorner(mw, mw) = calG;

  aug.Bm = Matrix::Zero(n + mw, mw);
  aug.Bm.bottomRows(mw) = calH;

  aug.Cm.resize(lift.totalMeasurements(), n + mw);
  aug.Cm.leftCols(n) = lift.calC * lift.calA;
  aug.Cm.rightCols(mw) = lift.calC * lift.calB + lift.calD;

  aug.Qm = Eigen::kroneckerProduct(Matrix::Identity(m, m), filt.inputVariance);

  aug.maskMx = Matrix::Zero(n, n + mw);
  aug.maskMx.leftCols(n) = Matrix::Identity(n, n);
  aug.channelDims = lift.channelDims;
  return aug;
}

std::pair<Matrix, Matrix> discretize_zoh(const Matrix& Ac, const Matrix& Bc, double dt) {
  if (Ac.rows() != Ac.cols()) throw ConfigError("Ac must be square");
  if (Bc.rows() != Ac.rows()) throw ConfigError("Bc row count must equal n_x");
  if (dt <= 0) throw ConfigError("dt must be positive");
  const Index n = Ac.rows();
  const Index nb = Bc.cols();
  Matrix aug = Matrix::Zero(n + nb, n + nb);
  aug.topLeftCorner(n, n) = Ac * dt;
  aug.topRightCorner(n, nb) = Bc * dt;
  const Matrix expm = aug.exp();
  return {expm.topLeftCorner(n, n), expm.topRightCorner(n, nb)};
}

TustinSystem discretize_tustin(const Matrix& Ac, const Matrix& Bc, const Matrix& Cc,
                               const Matrix& Dc, double dt) {
  if (Ac.rows() != Ac.cols()) throw ConfigError("Ac must be square");
  if (dt <= 0) throw ConfigError("dt must be positive");
  const Index n = Ac.rows();
  const Matrix T = Matrix::Identity(n, n) - 0.5 * dt * Ac;
  Eigen::FullPivLU<Matrix> lu(T);
  if (!lu.isInvertible()) throw NumericalError("(I - Ac dt/2) is singular");
  const Matrix Tinv = lu.inverse();

  TustinSystem d;
  d.Ad = Tinv * (Matrix::Identity(n, n) + 0.5 * dt * Ac);
  d.Bd = Tinv * Bc * dt;
  d.Cd = Cc * Tinv;
  d.Dd = Dc + 0.5 * dt * Cc * Tinv * Bc;
  return d;
}

Matrix state_transition(const MatrixFun& Afun, double t0, double t1, int steps) {
  if (t1 <= t0) throw ConfigError("state_transition requires t1 > t0");
  if (steps < 1) throw ConfigError("state_transition requires steps >= 1");
  const Index n = Afun(t0).rows();
  Matrix phi = Matrix::Identity(n, n);
  const double h = (t1 - t0) / steps;
  for (int i = 0; i < steps; ++i) {
    const double t = t0 + i * h;
    const Matrix k1 = Afun(t) * phi;
    const Matrix Ah = Afun(t + 0.5 * h);
    const Matrix k2 = Ah * (phi + 0.5 * h * k1);
    const Matrix k3 = Ah * (phi + 0.5 * h * k2);
    const Matrix k4 = Afun(t + h) * (phi + h * k3);
    phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return phi;
}

StabilityReport check_detectability_stabilizability(const PeriodicAugmentedSystem& aug,
                                                    const Vector& precisions) {
  const Index N = aug.Nx();
  if (precisions.size() != aug.ny())
    throw ConfigError("precision vector length must equal the number of channels");

  std::vector<Index> active;
  for (Index i = 0; i < precisions.size(); ++i)
    if (precisions(i) > 0.0) active.push_back(i);
  Matrix Cact(static_cast<Index>(active.size()), N);
  for (size_t i = 0; i < active.size(); ++i) Cact.row(static_cast<Index>(i)) = aug.Cm.row(active[i]);

  const Matrix noiseSqrt = matrix_sqrt_psd(symmetrized(aug.Bm * aug.Qm * aug.Bm.transpose()));

  Eigen::EigenSolver<Matrix> es(aug.Am);
  StabilityReport report;
  for (Index i = 0; i < N; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    if (std::abs(lam) < 1.0 - 1e-9) continue;  // stable modes need no test

    Eigen::MatrixXcd pencil = -aug.Am.cast<std::complex<double>>();
    pencil.diagonal().array() += lam;

    Eigen::MatrixXcd det(N + Cact.rows(), N);
    det.topRows(N) = pencil;
    det.bottomRows(Cact.rows()) = Cact.cast<std::complex<double>>();
    if (rank_svd(det) < N) {
      report.detectable = false;
      report.undetectableModes.push_back(lam);
    }

    Eigen::MatrixXcd stab(N, N + noiseSqrt.cols());
    stab.leftCols(N) = pencil;
    stab.rightCols(noiseSqrt.cols()) = noiseSqrt.cast<std::complex<double>>();
    if (rank_svd(stab) < N) {
      report.stabilizable = false;
      report.unstabilizableModes.push_back(lam);
    }
  }
  return report;
}

}  // namespace kp
