#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "consynth/matgraph.hpp"

namespace consynth {

/// One structured decision variable and its slice of the scalar vector.
struct VariableBlock
{
  enum class Kind { kSymmetric, kFull, kScalar };
  std::string name;
  Kind kind = Kind::kScalar;
  int rows = 1;
  int cols = 1;
  int offset = 0;

  int size() const;
};

/**
 * @brief Bijection between structured variables and scalar indices.
 *
 * Symmetric blocks own their upper triangle (row-major over i <= j), full
 * blocks are stored row-major.
 */
class VariableLayout
{
public:
  int add_symmetric(const std::string & name, int n);
  int add_full(const std::string & name, int rows, int cols);
  int add_scalar(const std::string & name);

  int n_scalars() const { return n_scalars_; }
  int n_blocks() const { return static_cast<int>(blocks_.size()); }
  const VariableBlock & block(int id) const { return blocks_.at(static_cast<std::size_t>(id)); }
  int find(const std::string & name) const;
  bool contains(const std::string & name) const { return find(name) >= 0; }

  /// Scalar index of entry (i, j) of block id.
  int index(int id, int i, int j) const;

  Vector pack(const std::map<std::string, Matrix> & values) const;
  std::map<std::string, Matrix> unpack(const Vector & x) const;
  Matrix value(const Vector & x, int id) const;
  std::vector<std::string> scalar_names() const;

private:
  int add(VariableBlock blk);

  std::vector<VariableBlock> blocks_;
  int n_scalars_ = 0;
};

/// Matrix-valued affine function of the scalar decision vector.
class AffineMatrix
{
public:
  AffineMatrix() = default;
  AffineMatrix(Eigen::Index rows, Eigen::Index cols);
  explicit AffineMatrix(const Matrix & constant);

  static AffineMatrix zero(Eigen::Index rows, Eigen::Index cols) { return AffineMatrix(rows, cols); }
  /// The structured variable itself (symmetric blocks are symmetric in x).
  static AffineMatrix variable(const VariableLayout & layout, int id);
  /// x_k * m
  static AffineMatrix scalar_times(int var, const Matrix & m);

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  const Matrix & constant() const { return constant_; }
  const std::map<int, Matrix> & terms() const { return terms_; }

  Matrix evaluate(const Vector & x) const;
  AffineMatrix transpose() const;

  AffineMatrix & operator+=(const AffineMatrix & o);
  AffineMatrix & operator-=(const AffineMatrix & o);

  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix & b) { return a += b; }
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix & b) { return a -= b; }
  friend AffineMatrix operator*(const Matrix & m, const AffineMatrix & a);
  friend AffineMatrix operator*(const AffineMatrix & a, const Matrix & m);
  friend AffineMatrix operator*(double s, const AffineMatrix & a);

  /// Assemble from a grid of blocks. Every row of the grid must have the same
  /// number of entries; all blocks in a grid row share rows, all in a grid
  /// column share cols.
  static AffineMatrix from_blocks(const std::vector<std::vector<AffineMatrix>> & grid);
  static AffineMatrix block_diag(const std::vector<AffineMatrix> & blocks);

private:
  Matrix constant_;
  std::map<int, Matrix> terms_;
};

struct PencilTerm
{
  int var = 0;
  Matrix coeff;
};

/// f0 + sum_k x_k F_k < -margin * I
struct Pencil
{
  std::string name;
  Matrix f0;
  std::vector<PencilTerm> terms;
  double margin = 0.0;

  int dim() const { return static_cast<int>(f0.rows()); }
  /// max(||f0||_2, ||F_k||_2)
  double scale() const;
  static Pencil from_affine(const std::string & name, const AffineMatrix & m);
};

struct LmiProblem
{
  int n_vars = 0;
  std::vector<Pencil> pencils;
  Vector objective;
  std::vector<std::string> var_names;
  /// relative strictness eps; per-pencil margin = eps * max(1, scale)
  double margin_rel = 1e-6;
  /// |x_k| <= box for every scalar
  double box = 1e6;
  /// optional linear equalities eq_a x = eq_b
  Matrix eq_a;
  Vector eq_b;

  void validate() const;
  void apply_relative_margin(double eps);
  int pencil_index(const std::string & name) const;
  void add_equalities(const Matrix & a, const Vector & b);
};

Matrix evaluate_pencil(const LmiProblem & problem, int constraint_index, const Vector & x);

/// Largest value of lambda_max(pencil) + margin over all pencils.
double max_constraint_violation(const LmiProblem & problem, const Vector & x);

/**
 * @brief Problem with an extra scalar t appended (index n_vars).
 *
 * Every pencil listed in `which` gets the term -t I, the objective becomes t,
 * and t >= t_min is added. An empty `which` selects all pencils.
 */
LmiProblem with_slack(const LmiProblem & problem, const std::vector<int> & which, double t_min);

void export_problem(const LmiProblem & problem, std::ostream & os);
LmiProblem import_problem(std::istream & is);

}  // namespace consynth
