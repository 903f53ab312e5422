#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace consynth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when operands have incompatible shapes.
class DimensionError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on non-finite data, asymmetric input to symmetric kernels, or
/// decomposition failures.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Raised when the graph cannot be reduced to N-1 independent Laplacian rows
/// or is not connected.
class GraphError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

bool all_finite(const Matrix & a);

Matrix kron(const Matrix & a, const Matrix & b);

/**
 * @brief Blockwise pattern scaling.
 *
 * Block (i, j) of the result is pattern(i, j) * blocks[j]. All blocks must
 * share the same shape.
 */
Matrix block_scale(const Matrix & pattern, const std::vector<Matrix> & blocks);

Matrix block_diag(const std::vector<Matrix> & blocks);

/// Moore-Penrose pseudo-inverse via SVD. Singular values below
/// rcond * sigma_max are treated as zero (default: max(rows, cols) * eps).
Matrix pinv(const Matrix & a, double rcond = -1.0);

/// Numerical rank via SVD with relative tolerance.
Eigen::Index numerical_rank(const Matrix & a, double rel_tol = 1e-9);

double spectral_norm(const Matrix & a);

/// Largest real part among the eigenvalues of a square matrix.
double spectral_abscissa(const Matrix & a);

/// Largest eigenvalue of a symmetric matrix. Throws NumericalError if the
/// asymmetry exceeds rel_tol * ||a||.
double max_eig_sym(const Matrix & a, double rel_tol = 1e-9);
double min_eig_sym(const Matrix & a, double rel_tol = 1e-9);

/// L = D - A. Rejects negative weights and nonzero diagonal.
Matrix laplacian(const Matrix & adjacency);

/**
 * @brief N-1 independent rows of a Laplacian.
 *
 * Drops the last row when that leaves rank N-1, otherwise picks rows by
 * column-pivoted QR of L^T (returned in ascending row order).
 */
Matrix reduce_laplacian(const Matrix & l, double rel_tol = 1e-9);

/// Zero is a simple eigenvalue of (L + L^T)/2 and all others are positive.
bool spectral_connectivity(const Matrix & l, double rel_tol = 1e-9);

struct NetworkGraph
{
  int n_agents = 0;
  Matrix adjacency;
  Matrix laplacian;
  Matrix reduced_laplacian;
  bool connected = false;

  /// Builds L and L_hat. Reduction failure leaves reduced_laplacian empty and
  /// connected false instead of throwing, so callers can report it.
  static NetworkGraph from_adjacency(const Matrix & adjacency);
};

}  // namespace consynth
