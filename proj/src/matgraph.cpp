#include "consynth/matgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace consynth {

bool all_finite(const Matrix & a) { return a.allFinite(); }

Matrix kron(const Matrix & a, const Matrix & b)
{
  constexpr Eigen::Index kMax = Eigen::Index(1) << 28;
  if (a.rows() * b.rows() > kMax || a.cols() * b.cols() > kMax) {
    throw DimensionError("kron: result dimensions overflow");
  }
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix block_scale(const Matrix & pattern, const std::vector<Matrix> & blocks)
{
  if (static_cast<Eigen::Index>(blocks.size()) != pattern.cols()) {
    throw DimensionError("block_scale: need one block per pattern column");
  }
  if (blocks.empty()) { return Matrix(0, 0); }
  const auto p = blocks[0].rows();
  const auto q = blocks[0].cols();
  for (const auto & b : blocks) {
    if (b.rows() != p || b.cols() != q) { throw DimensionError("block_scale: mismatched block dims"); }
  }
  Matrix out = Matrix::Zero(pattern.rows() * p, pattern.cols() * q);
  for (Eigen::Index i = 0; i < pattern.rows(); ++i) {
    for (Eigen::Index j = 0; j < pattern.cols(); ++j) {
      if (pattern(i, j) != 0.0) { out.block(i * p, j * q, p, q) = pattern(i, j) * blocks[j]; }
    }
  }
  return out;
}

Matrix block_diag(const std::vector<Matrix> & blocks)
{
  Eigen::Index r = 0, c = 0;
  for (const auto & b : blocks) {
    r += b.rows();
    c += b.cols();
  }
  Matrix out = Matrix::Zero(r, c);
  r = c = 0;
  for (const auto & b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

Matrix pinv(const Matrix & a, double rcond)
{
  if (a.size() == 0) { return Matrix::Zero(a.cols(), a.rows()); }
  if (!a.allFinite()) { throw NumericalError("pinv: non-finite input"); }
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) { throw NumericalError("pinv: SVD did not converge"); }
  const Vector & s = svd.singularValues();
  if (rcond < 0) { rcond = static_cast<double>(std::max(a.rows(), a.cols())) * std::numeric_limits<double>::epsilon(); }
  const double cutoff = s.size() > 0 ? rcond * s(0) : 0.0;
  Vector s_inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) { s_inv(i) = 1.0 / s(i); }
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::Index numerical_rank(const Matrix & a, double rel_tol)
{
  if (a.size() == 0) { return 0; }
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector & s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) { return 0; }
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) { ++r; }
  }
  return r;
}

double spectral_norm(const Matrix & a)
{
  if (a.size() == 0) { return 0.0; }
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

double spectral_abscissa(const Matrix & a)
{
  if (a.rows() != a.cols()) { throw DimensionError("spectral_abscissa: matrix not square"); }
  if (a.size() == 0) { return -std::numeric_limits<double>::infinity(); }
  Eigen::EigenSolver<Matrix> es(a, false);
  if (es.info() != Eigen::Success) { throw NumericalError("spectral_abscissa: eigenvalue iteration failed"); }
  return es.eigenvalues().real().maxCoeff();
}

namespace {

Vector sym_eigenvalues(const Matrix & a, double rel_tol)
{
  if (a.rows() != a.cols()) { throw DimensionError("symmetric eigenvalues: matrix not square"); }
  if (!a.allFinite()) { throw NumericalError("symmetric eigenvalues: non-finite input"); }
  const double scale = a.norm();
  if ((a - a.transpose()).norm() > rel_tol * std::max(scale, std::numeric_limits<double>::min())) {
    throw NumericalError("symmetric eigenvalues: input not symmetric");
  }
  Matrix s = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

double max_eig_sym(const Matrix & a, double rel_tol)
{
  if (a.size() == 0) { return -std::numeric_limits<double>::infinity(); }
  return sym_eigenvalues(a, rel_tol).maxCoeff();
}

double min_eig_sym(const Matrix & a, double rel_tol)
{
  if (a.size() == 0) { return std::numeric_limits<double>::infinity(); }
  return sym_eigenvalues(a, rel_tol).minCoeff();
}

Matrix laplacian(const Matrix & adjacency)
{
  if (adjacency.rows() != adjacency.cols()) { throw DimensionError("laplacian: adjacency not square"); }
  if (!adjacency.allFinite()) { throw NumericalError("laplacian: non-finite weight"); }
  const auto n = adjacency.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) { throw std::invalid_argument("laplacian: adjacency diagonal must be zero"); }
    double deg = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (adjacency(i, j) < 0.0) { throw std::invalid_argument("laplacian: negative edge weight"); }
      if (i != j) {
        l(i, j) = -adjacency(i, j);
        deg += adjacency(i, j);
      }
    }
    l(i, i) = deg;
  }
  return l;
}

Matrix reduce_laplacian(const Matrix & l, double rel_tol)
{
  const auto n = l.rows();
  if (n == 0 || l.cols() != n) { throw DimensionError("reduce_laplacian: Laplacian must be square and nonempty"); }
  if (n == 1) { return Matrix(0, 1); }
  Matrix head = l.topRows(n - 1);
  if (numerical_rank(head, rel_tol) == n - 1) { return head; }

  Eigen::ColPivHouseholderQR<Matrix> qr(l.transpose());
  qr.setThreshold(rel_tol);
  if (qr.rank() < n - 1) {
    throw GraphError("reduce_laplacian: Laplacian rank " + std::to_string(qr.rank()) + " < N-1 (graph not connected)");
  }
  std::vector<Eigen::Index> rows;
  for (Eigen::Index k = 0; k < n - 1; ++k) { rows.push_back(qr.colsPermutation().indices()(k)); }
  std::sort(rows.begin(), rows.end());
  Matrix out(n - 1, n);
  for (std::size_t k = 0; k < rows.size(); ++k) { out.row(static_cast<Eigen::Index>(k)) = l.row(rows[k]); }
  if (numerical_rank(out, rel_tol) != n - 1) { throw GraphError("reduce_laplacian: selected rows are rank deficient"); }
  return out;
}

bool spectral_connectivity(const Matrix & l, double rel_tol)
{
  const auto n = l.rows();
  if (n <= 1) { return true; }
  Matrix s = 0.5 * (l + l.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  const Vector & ev = es.eigenvalues();
  const double tol = rel_tol * std::max(1.0, s.norm()) * 10.0;
  int zeros = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(ev(i)) <= tol) {
      ++zeros;
    } else if (ev(i) < 0.0) {
      return false;
    }
  }
  return zeros == 1;
}

NetworkGraph NetworkGraph::from_adjacency(const Matrix & adjacency)
{
  NetworkGraph g;
  g.n_agents = static_cast<int>(adjacency.rows());
  g.adjacency = adjacency;
  g.laplacian = consynth::laplacian(adjacency);
  g.connected = spectral_connectivity(g.laplacian);
  try {
    g.reduced_laplacian = reduce_laplacian(g.laplacian);
  } catch (const GraphError &) {
    g.reduced_laplacian = Matrix(0, 0);
    g.connected = false;
  }
  return g;
}

}  // namespace consynth
