#include "kp/lmi.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "kp/estimation.hpp"

namespace kp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

Vector unit(Index size, Index i) {
  Vector e = Vector::Zero(size);
  e(i) = 1.0;
  return e;
}

Vector embedded(Index size, Index offset, const Vector& v) {
  Vector e = Vector::Zero(size);
  e.segment(offset, v.size()) = v;
  return e;
}

void check_weights_and_bounds(const Vector& weights, const Vector& sMax, Index ny) {
  if (weights.size() != ny) throw ConfigError("weight vector length must equal N_y");
  if (sMax.size() != ny) throw ConfigError("sMax length must equal N_y");
  if ((weights.array() < 0).any()) throw ConfigError("weights must be non-negative");
  if (!(sMax.array() > 0).all()) throw ConfigError("sMax must be entrywise positive");
}

}  // namespace

Matrix LmiBlock::coefficient(Index var) const {
  Matrix M = Matrix::Zero(size, size);
  for (const auto& t : terms[static_cast<size_t>(var)])
    M += 0.5 * (t.a * t.w.transpose() + t.w * t.a.transpose());
  return M;
}

Matrix LmiBlock::eval(const Vector& x) const {
  Matrix S = constant;
  for (size_t i = 0; i < terms.size(); ++i) {
    const double xi = x(static_cast<Index>(i));
    if (xi == 0.0) continue;
    for (const auto& t : terms[i])
      S.selfadjointView<Eigen::Lower>().rankUpdate(t.a, t.w, 0.5 * xi);
  }
  return Matrix(S.selfadjointView<Eigen::Lower>());
}

void SdpProblem::validate() const {
  if (objective.size() != numVars) throw ConfigError("objective length must equal numVars");
  if (boxLower.size() != numVars || boxUpper.size() != numVars)
    throw ConfigError("box bound lengths must equal numVars");
  if ((boxLower.array() > boxUpper.array()).any())
    throw ConfigError("boxLower must not exceed boxUpper");
  for (const auto& b : blocks) {
    if (b.constant.rows() != b.size || b.constant.cols() != b.size)
      throw ConfigError("block constant size mismatch");
    if (static_cast<Index>(b.terms.size()) != numVars)
      throw ConfigError("block term table must cover all variables");
    if ((b.constant - b.constant.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * std::max(1.0, b.constant.cwiseAbs().maxCoeff()))
      throw ConfigError("block constant must be symmetric");
    for (const auto& vt : b.terms)
      for (const auto& t : vt)
        if (t.a.size() != b.size || t.w.size() != b.size)
          throw ConfigError("term vectors must match block size");
  }
}

Index SymVarLayout::var(Index i, Index j) const {
  // Row-wise upper triangle: (0,0),(0,1),...,(0,d-1),(1,1),...
  return offset + i * dim - i * (i - 1) / 2 + (j - i);
}

Matrix SymVarLayout::unpack(const Vector& x) const {
  Matrix M(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = i; j < dim; ++j) {
      const double v = x(var(i, j));
      M(i, j) = M(j, i) = (i == j) ? v : v / kSqrt2;
    }
  return M;
}

Matrix Thm1Problem::gain(const Vector& x) const {
  Matrix K(mnx, ny);
  for (Index r = 0; r < mnx; ++r)
    for (Index c = 0; c < ny; ++c) K(r, c) = x(ny + r * ny + c);
  return K;
}

Matrix Thm2Problem::gain(const Vector& x) const {
  Matrix K(Nx, ny);
  for (Index r = 0; r < Nx; ++r)
    for (Index c = 0; c < ny; ++c) K(r, c) = x(ny + r * ny + c);
  return K;
}

namespace {

// Adds the terms of one packed symmetric matrix variable placed as a diagonal
// sub-block starting at `at` of an LMI block.
void add_sym_variable_terms(LmiBlock& block, const SymVarLayout& lay, Index at) {
  for (Index i = 0; i < lay.dim; ++i)
    for (Index j = i; j < lay.dim; ++j) {
      auto& terms = block.terms[static_cast<size_t>(lay.var(i, j))];
      const Vector ei = unit(block.size, at + i);
      if (i == j) {
        terms.push_back({ei, ei});
      } else {
        terms.push_back({ei, kSqrt2 * unit(block.size, at + j)});
      }
    }
}

// Adds the terms of a packed symmetric variable placed at off-diagonal
// position (rowAt, colAt) of a block (plus the transposed copy).
void add_sym_variable_offdiag_terms(LmiBlock& block, const SymVarLayout& lay, Index rowAt,
                                    Index colAt) {
  for (Index i = 0; i < lay.dim; ++i)
    for (Index j = i; j < lay.dim; ++j) {
      auto& terms = block.terms[static_cast<size_t>(lay.var(i, j))];
      if (i == j) {
        terms.push_back({unit(block.size, rowAt + i), 2.0 * unit(block.size, colAt + i)});
      } else {
        terms.push_back({unit(block.size, rowAt + i), kSqrt2 * unit(block.size, colAt + j)});
        terms.push_back({unit(block.size, rowAt + j), kSqrt2 * unit(block.size, colAt + i)});
      }
    }
}

}  // namespace

Thm1Problem assemble_thm1(const LiftedSystem& lift, const Matrix& Pminus, double gamma_d,
                          const Vector& weights, const Vector& sMax) {
  const Index ny = lift.totalMeasurements();
  const Index mnx = lift.calA.rows();
  const Index nx = lift.calA.cols();
  if (Pminus.rows() != mnx || Pminus.cols() != mnx)
    throw ConfigError("Pminus must match the lifted state dimension");
  if (gamma_d < 0) throw ConfigError("gamma_d must be non-negative");
  check_weights_and_bounds(weights, sMax, ny);

  const Matrix sqrtP = matrix_sqrt_psd(Pminus);
  const Matrix CsqrtP = lift.calC * sqrtP;

  Thm1Problem prob;
  prob.ny = ny;
  prob.mnx = mnx;
  prob.nx = nx;
  prob.flayout = {ny + mnx * ny, nx};

  SdpProblem& p = prob.sdp;
  p.numVars = ny + mnx * ny + prob.flayout.count();
  p.objective = Vector::Zero(p.numVars);
  p.objective.head(ny) = weights;
  p.boxLower = Vector::Constant(p.numVars, -kInf);
  p.boxUpper = Vector::Constant(p.numVars, kInf);
  p.boxLower.head(ny).setZero();
  p.boxUpper.head(ny) = sMax;

  p.varNames.reserve(static_cast<size_t>(p.numVars));
  for (Index i = 0; i < ny; ++i) p.varNames.push_back("s[" + std::to_string(i) + "]");
  for (Index r = 0; r < mnx; ++r)
    for (Index c = 0; c < ny; ++c)
      p.varNames.push_back("K[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  for (Index i = 0; i < nx; ++i)
    for (Index j = i; j < nx; ++j)
      p.varNames.push_back("F[" + std::to_string(i) + "][" + std::to_string(j) + "]");

  // [ F                M_m (I-KC) sqrtP   M_m K ]
  // [ *                I                  0     ]
  // [ *                *                  S     ]
  LmiBlock main;
  main.size = nx + mnx + ny;
  main.constant = Matrix::Zero(main.size, main.size);
  main.constant.block(0, nx, nx, mnx) = lift.maskM * sqrtP;
  main.constant.block(nx, 0, mnx, nx) = (lift.maskM * sqrtP).transpose();
  main.constant.block(nx, nx, mnx, mnx) = Matrix::Identity(mnx, mnx);
  main.terms.resize(static_cast<size_t>(p.numVars));

  for (Index i = 0; i < ny; ++i) {
    const Vector e = unit(main.size, nx + mnx + i);
    main.terms[static_cast<size_t>(i)].push_back({e, e});
  }
  for (Index r = 0; r < mnx; ++r) {
    const Vector mcol = lift.maskM.col(r);
    if (mcol.isZero(0.0)) continue;  // rows of K outside the mask never appear
    const Vector a = embedded(main.size, 0, mcol);
    for (Index c = 0; c < ny; ++c) {
      Vector w = Vector::Zero(main.size);
      w.segment(nx, mnx) = -CsqrtP.row(c).transpose();
      w(nx + mnx + c) = 1.0;
      main.terms[static_cast<size_t>(ny + r * ny + c)].push_back({a, 2.0 * w});
    }
  }
  add_sym_variable_terms(main, prob.flayout, 0);
  p.blocks.push_back(std::move(main));

  // trace(F) <= gamma_d
  LmiBlock tr;
  tr.size = 1;
  tr.constant = Matrix::Constant(1, 1, gamma_d);
  tr.terms.resize(static_cast<size_t>(p.numVars));
  for (Index i = 0; i < nx; ++i) {
    tr.terms[static_cast<size_t>(prob.flayout.var(i, i))].push_back(
        {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)});
  }
  p.blocks.push_back(std::move(tr));

  p.validate();
  return prob;
}

Thm2Problem assemble_thm2(const PeriodicAugmentedSystem& aug, double gamma_d, double delta,
                          const Vector& weights, const Vector& sMax) {
  const Index nx = aug.nx();
  const Index Nx = aug.Nx();
  const Index ny = aug.ny();
  if (delta <= 0) throw ConfigError("delta must be positive");
  if (gamma_d < 0) throw ConfigError("gamma_d must be non-negative");
  check_weights_and_bounds(weights, sMax, ny);

  const Matrix MA = aug.maskMx * aug.Am;  // n_x x N_x
  const Matrix noise = aug.maskMx * aug.Bm * aug.Qm * aug.Bm.transpose() * aug.maskMx.transpose();

  Thm2Problem prob;
  prob.ny = ny;
  prob.Nx = Nx;
  prob.nx = nx;
  prob.zlayout = {ny + Nx * ny, Nx};
  prob.playout = {prob.zlayout.offset + prob.zlayout.count(), Nx};

  SdpProblem& p = prob.sdp;
  p.numVars = prob.playout.offset + prob.playout.count();
  p.objective = Vector::Zero(p.numVars);
  p.objective.head(ny) = weights;
  p.boxLower = Vector::Constant(p.numVars, -kInf);
  p.boxUpper = Vector::Constant(p.numVars, kInf);
  p.boxLower.head(ny).setZero();
  p.boxUpper.head(ny) = sMax;

  p.varNames.reserve(static_cast<size_t>(p.numVars));
  for (Index i = 0; i < ny; ++i) p.varNames.push_back("s[" + std::to_string(i) + "]");
  for (Index r = 0; r < Nx; ++r)
    for (Index c = 0; c < ny; ++c)
      p.varNames.push_back("K[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  for (Index i = 0; i < Nx; ++i)
    for (Index j = i; j < Nx; ++j)
      p.varNames.push_back("Z[" + std::to_string(i) + "][" + std::to_string(j) + "]");
  for (Index i = 0; i < Nx; ++i)
    for (Index j = i; j < Nx; ++j)
      p.varNames.push_back("P[" + std::to_string(i) + "][" + std::to_string(j) + "]");

  // [ M_x (P - Bm Qm Bm^T) M_x^T   M_x Am (I - K Cm)   M_x Am K ]
  // [ *                            Z                   0        ]
  // [ *                            *                   S        ]
  LmiBlock main;
  main.size = nx + Nx + ny;
  main.constant = Matrix::Zero(main.size, main.size);
  main.constant.topLeftCorner(nx, nx) = -noise;
  main.constant.block(0, nx, nx, Nx) = MA;
  main.constant.block(nx, 0, Nx, nx) = MA.transpose();
  main.terms.resize(static_cast<size_t>(p.numVars));

  for (Index i = 0; i < ny; ++i) {
    const Vector e = unit(main.size, nx + Nx + i);
    main.terms[static_cast<size_t>(i)].push_back({e, e});
  }
  for (Index r = 0; r < Nx; ++r) {
    const Vector a = embedded(main.size, 0, Vector(MA.col(r)));
    if (a.isZero(0.0)) continue;
    for (Index c = 0; c < ny; ++c) {
      Vector w = Vector::Zero(main.size);
      w.segment(nx, Nx) = -aug.Cm.row(c).transpose();
      w(nx + Nx + c) = 1.0;
      main.terms[static_cast<size_t>(ny + r * ny + c)].push_back({a, 2.0 * w});
    }
  }
  add_sym_variable_terms(main, prob.zlayout, nx);
  // M_x P M_x^T keeps only the top-left n_x block of P.
  for (Index i = 0; i < nx; ++i)
    for (Index j = i; j < nx; ++j) {
      auto& terms = main.terms[static_cast<size_t>(prob.playout.var(i, j))];
      const Vector ei = unit(main.size, i);
      if (i == j)
        terms.push_back({ei, ei});
      else
        terms.push_back({ei, kSqrt2 * unit(main.size, j)});
    }
  p.blocks.push_back(std::move(main));

  // Young relation: [2I, P, Z; P, I/delta, 0; Z, 0, delta I] >= 0.
  LmiBlock young;
  young.size = 3 * Nx;
  young.constant = Matrix::Zero(young.size, young.size);
  young.constant.topLeftCorner(Nx, Nx) = 2.0 * Matrix::Identity(Nx, Nx);
  young.constant.block(Nx, Nx, Nx, Nx) = Matrix::Identity(Nx, Nx) / delta;
  young.constant.bottomRightCorner(Nx, Nx) = delta * Matrix::Identity(Nx, Nx);
  young.terms.resize(static_cast<size_t>(p.numVars));
  add_sym_variable_offdiag_terms(young, prob.playout, 0, Nx);
  add_sym_variable_offdiag_terms(young, prob.zlayout, 0, 2 * Nx);
  p.blocks.push_back(std::move(young));

  // trace(M_x P M_x^T) <= gamma_d
  LmiBlock tr;
  tr.size = 1;
  tr.constant = Matrix::Constant(1, 1, gamma_d);
  tr.terms.resize(static_cast<size_t>(p.numVars));
  for (Index i = 0; i < nx; ++i)
    tr.terms[static_cast<size_t>(prob.playout.var(i, i))].push_back(
        {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)});
  p.blocks.push_back(std::move(tr));

  // P^d is a covariance certificate, keep it in the PSD cone.
  LmiBlock psd;
  psd.size = Nx;
  psd.constant = Matrix::Zero(Nx, Nx);
  psd.terms.resize(static_cast<size_t>(p.numVars));
  add_sym_variable_terms(psd, prob.playout, 0);
  p.blocks.push_back(std::move(psd));

  p.validate();
  return prob;
}

Vector reweight(const Vector& sStar, double eps) {
  if ((sStar.array() < 0).any()) throw ConfigError("reweight: sStar must be non-negative");
  double e = eps;
  if (e <= 0) {
    const double smax = sStar.size() > 0 ? sStar.cwiseAbs().maxCoeff() : 0.0;
    e = 1e-6 * std::max(1.0, smax);
  }
  return (sStar.array() + e).inverse().matrix();
}

void write_sdpa_like(const SdpProblem& p, std::ostream& os) {
  os << "* sparse LMI listing: minimize c'x s.t. F0 + sum x_i Fi >= 0 per block\n";
  Index nblocks = static_cast<Index>(p.blocks.size());
  std::vector<double> boxEntries;  // appended as 1x1 blocks
  for (Index i = 0; i < p.numVars; ++i) {
    if (std::isfinite(p.boxLower(i))) ++nblocks;
    if (std::isfinite(p.boxUpper(i))) ++nblocks;
  }
  os << p.numVars << " variables\n" << nblocks << " blocks\n";
  for (const auto& b : p.blocks) os << b.size << " ";
  for (Index i = 0; i < p.numVars; ++i) {
    if (std::isfinite(p.boxLower(i))) os << 1 << " ";
    if (std::isfinite(p.boxUpper(i))) os << 1 << " ";
  }
  os << "\n";
  for (Index i = 0; i < p.numVars; ++i) os << p.objective(i) << (i + 1 < p.numVars ? " " : "");
  os << "\n";
  // var block row col value, 1-based, var 0 = constant, upper triangle only
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    const auto& blk = p.blocks[b];
    for (Index i = 0; i < blk.size; ++i)
      for (Index j = i; j < blk.size; ++j)
        if (blk.constant(i, j) != 0.0)
          os << 0 << " " << b + 1 << " " << i + 1 << " " << j + 1 << " " << blk.constant(i, j)
             << "\n";
    for (Index v = 0; v < p.numVars; ++v) {
      if (blk.terms[static_cast<size_t>(v)].empty()) continue;
      const Matrix M = blk.coefficient(v);
      for (Index i = 0; i < blk.size; ++i)
        for (Index j = i; j < blk.size; ++j)
          if (M(i, j) != 0.0)
            os << v + 1 << " " << b + 1 << " " << i + 1 << " " << j + 1 << " " << M(i, j) << "\n";
    }
  }
  Index bidx = static_cast<Index>(p.blocks.size());
  for (Index i = 0; i < p.numVars; ++i) {
    if (std::isfinite(p.boxLower(i))) {
      ++bidx;
      if (p.boxLower(i) != 0.0) os << 0 << " " << bidx << " 1 1 " << -p.boxLower(i) << "\n";
      os << i + 1 << " " << bidx << " 1 1 " << 1.0 << "\n";
    }
    if (std::isfinite(p.boxUpper(i))) {
      ++bidx;
      os << 0 << " " << bidx << " 1 1 " << p.boxUpper(i) << "\n";
      os << i + 1 << " " << bidx << " 1 1 " << -1.0 << "\n";
    }
  }
}

}  // namespace kp
