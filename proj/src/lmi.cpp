#include "consynth/lmi.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace consynth {

int VariableBlock::size() const
{
  switch (kind) {
    case Kind::kSymmetric: return rows * (rows + 1) / 2;
    case Kind::kFull: return rows * cols;
    case Kind::kScalar: return 1;
  }
  return 0;
}

int VariableLayout::add(VariableBlock blk)
{
  if (blk.name.empty()) { throw std::invalid_argument("layout: empty variable name"); }
  if (find(blk.name) >= 0) { throw std::invalid_argument("layout: duplicate variable name '" + blk.name + "'"); }
  if (blk.rows < 0 || blk.cols < 0) { throw DimensionError("layout: negative dimension"); }
  blk.offset = n_scalars_;
  n_scalars_ += blk.size();
  blocks_.push_back(std::move(blk));
  return static_cast<int>(blocks_.size()) - 1;
}

int VariableLayout::add_symmetric(const std::string & name, int n)
{
  return add({name, VariableBlock::Kind::kSymmetric, n, n, 0});
}

int VariableLayout::add_full(const std::string & name, int rows, int cols)
{
  return add({name, VariableBlock::Kind::kFull, rows, cols, 0});
}

int VariableLayout::add_scalar(const std::string & name) { return add({name, VariableBlock::Kind::kScalar, 1, 1, 0}); }

int VariableLayout::find(const std::string & name) const
{
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) { return static_cast<int>(i); }
  }
  return -1;
}

int VariableLayout::index(int id, int i, int j) const
{
  const VariableBlock & b = block(id);
  if (i < 0 || j < 0 || i >= b.rows || j >= b.cols) { throw DimensionError("layout: entry outside block " + b.name); }
  switch (b.kind) {
    case VariableBlock::Kind::kSymmetric: {
      if (i > j) { std::swap(i, j); }
      // row-major upper triangle: rows before i contribute n + (n-1) + ...
      return b.offset + i * b.rows - i * (i - 1) / 2 + (j - i);
    }
    case VariableBlock::Kind::kFull: return b.offset + i * b.cols + j;
    case VariableBlock::Kind::kScalar: return b.offset;
  }
  return -1;
}

Vector VariableLayout::pack(const std::map<std::string, Matrix> & values) const
{
  Vector x = Vector::Zero(n_scalars_);
  for (int id = 0; id < n_blocks(); ++id) {
    const VariableBlock & b = block(id);
    auto it = values.find(b.name);
    if (it == values.end()) { throw std::invalid_argument("layout: missing value for '" + b.name + "'"); }
    const Matrix & m = it->second;
    if (m.rows() != b.rows || m.cols() != b.cols) { throw DimensionError("layout: wrong shape for '" + b.name + "'"); }
    for (int i = 0; i < b.rows; ++i) {
      for (int j = (b.kind == VariableBlock::Kind::kSymmetric ? i : 0); j < b.cols; ++j) { x(index(id, i, j)) = m(i, j); }
    }
  }
  return x;
}

Matrix VariableLayout::value(const Vector & x, int id) const
{
  const VariableBlock & b = block(id);
  Matrix m(b.rows, b.cols);
  for (int i = 0; i < b.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) { m(i, j) = x(index(id, i, j)); }
  }
  return m;
}

std::map<std::string, Matrix> VariableLayout::unpack(const Vector & x) const
{
  if (x.size() != n_scalars_) { throw DimensionError("layout: vector length differs from scalar count"); }
  std::map<std::string, Matrix> out;
  for (int id = 0; id < n_blocks(); ++id) { out[block(id).name] = value(x, id); }
  return out;
}

std::vector<std::string> VariableLayout::scalar_names() const
{
  std::vector<std::string> names(static_cast<std::size_t>(n_scalars_));
  for (int id = 0; id < n_blocks(); ++id) {
    const VariableBlock & b = block(id);
    for (int i = 0; i < b.rows; ++i) {
      for (int j = (b.kind == VariableBlock::Kind::kSymmetric ? i : 0); j < b.cols; ++j) {
        names[static_cast<std::size_t>(index(id, i, j))] =
          b.kind == VariableBlock::Kind::kScalar ? b.name : b.name + "(" + std::to_string(i) + "," + std::to_string(j) + ")";
      }
    }
  }
  return names;
}

AffineMatrix::AffineMatrix(Eigen::Index rows, Eigen::Index cols) : constant_(Matrix::Zero(rows, cols)) {}

AffineMatrix::AffineMatrix(const Matrix & constant) : constant_(constant) {}

AffineMatrix AffineMatrix::variable(const VariableLayout & layout, int id)
{
  const VariableBlock & b = layout.block(id);
  AffineMatrix out(b.rows, b.cols);
  for (int i = 0; i < b.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      const int k = layout.index(id, i, j);
      auto it = out.terms_.find(k);
      if (it == out.terms_.end()) { it = out.terms_.emplace(k, Matrix::Zero(b.rows, b.cols)).first; }
      it->second(i, j) = 1.0;
    }
  }
  return out;
}

AffineMatrix AffineMatrix::scalar_times(int var, const Matrix & m)
{
  AffineMatrix out(m.rows(), m.cols());
  out.terms_.emplace(var, m);
  return out;
}

Matrix AffineMatrix::evaluate(const Vector & x) const
{
  Matrix out = constant_;
  for (const auto & [k, c] : terms_) {
    if (k >= x.size()) { throw DimensionError("affine evaluate: variable index out of range"); }
    out += x(k) * c;
  }
  return out;
}

AffineMatrix AffineMatrix::transpose() const
{
  AffineMatrix out(constant_.transpose());
  for (const auto & [k, c] : terms_) { out.terms_.emplace(k, c.transpose()); }
  return out;
}

AffineMatrix & AffineMatrix::operator+=(const AffineMatrix & o)
{
  if (o.rows() != rows() || o.cols() != cols()) { throw DimensionError("affine +: shape mismatch"); }
  constant_ += o.constant_;
  for (const auto & [k, c] : o.terms_) {
    auto it = terms_.find(k);
    if (it == terms_.end()) {
      terms_.emplace(k, c);
    } else {
      it->second += c;
    }
  }
  return *this;
}

AffineMatrix & AffineMatrix::operator-=(const AffineMatrix & o) { return *this += (-1.0) * o; }

AffineMatrix operator*(const Matrix & m, const AffineMatrix & a)
{
  if (m.cols() != a.rows()) { throw DimensionError("affine *: shape mismatch"); }
  AffineMatrix out(m * a.constant_);
  for (const auto & [k, c] : a.terms_) { out.terms_.emplace(k, m * c); }
  return out;
}

AffineMatrix operator*(const AffineMatrix & a, const Matrix & m)
{
  if (a.cols() != m.rows()) { throw DimensionError("affine *: shape mismatch"); }
  AffineMatrix out(a.constant_ * m);
  for (const auto & [k, c] : a.terms_) { out.terms_.emplace(k, c * m); }
  return out;
}

AffineMatrix operator*(double s, const AffineMatrix & a)
{
  AffineMatrix out(s * a.constant_);
  for (const auto & [k, c] : a.terms_) { out.terms_.emplace(k, s * c); }
  return out;
}

AffineMatrix AffineMatrix::from_blocks(const std::vector<std::vector<AffineMatrix>> & grid)
{
  if (grid.empty()) { return AffineMatrix(0, 0); }
  const std::size_t nc = grid.front().size();
  std::vector<Eigen::Index> row_dims(grid.size()), col_dims(nc);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].size() != nc) { throw DimensionError("from_blocks: ragged block grid"); }
    for (std::size_t j = 0; j < nc; ++j) {
      const AffineMatrix & b = grid[i][j];
      if (j == 0) {
        row_dims[i] = b.rows();
      } else if (b.rows() != row_dims[i]) {
        throw DimensionError("from_blocks: row dims differ in block row " + std::to_string(i));
      }
      if (i == 0) {
        col_dims[j] = b.cols();
      } else if (b.cols() != col_dims[j]) {
        throw DimensionError("from_blocks: col dims differ in block column " + std::to_string(j));
      }
    }
  }
  Eigen::Index total_r = 0, total_c = 0;
  for (auto r : row_dims) { total_r += r; }
  for (auto c : col_dims) { total_c += c; }
  AffineMatrix out(total_r, total_c);
  Eigen::Index r0 = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Eigen::Index c0 = 0;
    for (std::size_t j = 0; j < nc; ++j) {
      const AffineMatrix & b = grid[i][j];
      out.constant_.block(r0, c0, b.rows(), b.cols()) = b.constant_;
      for (const auto & [k, c] : b.terms_) {
        auto it = out.terms_.find(k);
        if (it == out.terms_.end()) { it = out.terms_.emplace(k, Matrix::Zero(total_r, total_c)).first; }
        it->second.block(r0, c0, b.rows(), b.cols()) += c;
      }
      c0 += col_dims[j];
    }
    r0 += row_dims[i];
  }
  return out;
}

AffineMatrix AffineMatrix::block_diag(const std::vector<AffineMatrix> & blocks)
{
  std::vector<std::vector<AffineMatrix>> grid(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      grid[i].push_back(i == j ? blocks[i] : AffineMatrix(blocks[i].rows(), blocks[j].cols()));
    }
  }
  return from_blocks(grid);
}

double Pencil::scale() const
{
  double s = spectral_norm(f0);
  for (const auto & t : terms) { s = std::max(s, spectral_norm(t.coeff)); }
  return s;
}

Pencil Pencil::from_affine(const std::string & name, const AffineMatrix & m)
{
  if (m.rows() != m.cols()) { throw DimensionError("pencil '" + name + "': matrix not square"); }
  auto check_sym = [&](const Matrix & a) {
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
      throw NumericalError("pencil '" + name + "': coefficient matrix not symmetric");
    }
  };
  Pencil p;
  p.name = name;
  if (m.rows() == 0) {
    p.f0 = Matrix(0, 0);
    return p;
  }
  check_sym(m.constant());
  p.f0 = 0.5 * (m.constant() + m.constant().transpose());
  for (const auto & [k, c] : m.terms()) {
    if (c.cwiseAbs().maxCoeff() == 0.0) { continue; }
    check_sym(c);
    p.terms.push_back({k, 0.5 * (c + c.transpose())});
  }
  return p;
}

void LmiProblem::validate() const
{
  if (n_vars < 0) { throw DimensionError("lmi: negative variable count"); }
  if (objective.size() != n_vars) { throw DimensionError("lmi: objective length differs from n_vars"); }
  if (!var_names.empty() && static_cast<int>(var_names.size()) != n_vars) {
    throw DimensionError("lmi: var_names length differs from n_vars");
  }
  for (const auto & p : pencils) {
    if (p.f0.rows() != p.f0.cols()) { throw DimensionError("lmi: pencil '" + p.name + "' f0 not square"); }
    if (!p.f0.isApprox(p.f0.transpose(), 1e-12) && p.f0.norm() > 0) {
      throw NumericalError("lmi: pencil '" + p.name + "' f0 not symmetric");
    }
    for (const auto & t : p.terms) {
      if (t.var < 0 || t.var >= n_vars) { throw DimensionError("lmi: pencil '" + p.name + "' variable index out of range"); }
      if (t.coeff.rows() != p.f0.rows() || t.coeff.cols() != p.f0.cols()) {
        throw DimensionError("lmi: pencil '" + p.name + "' term dims differ");
      }
      if ((t.coeff - t.coeff.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, t.coeff.cwiseAbs().maxCoeff())) {
        throw NumericalError("lmi: pencil '" + p.name + "' term not symmetric");
      }
    }
  }
  if (eq_a.rows() != eq_b.size() || (eq_a.rows() > 0 && eq_a.cols() != n_vars)) {
    throw DimensionError("lmi: equality system shape mismatch");
  }
}

void LmiProblem::apply_relative_margin(double eps)
{
  margin_rel = eps;
  for (auto & p : pencils) { p.margin = eps * std::max(1.0, p.scale()); }
}

int LmiProblem::pencil_index(const std::string & name) const
{
  for (std::size_t i = 0; i < pencils.size(); ++i) {
    if (pencils[i].name == name) { return static_cast<int>(i); }
  }
  return -1;
}

void LmiProblem::add_equalities(const Matrix & a, const Vector & b)
{
  if (a.rows() == 0) { return; }
  if (a.cols() != n_vars || a.rows() != b.size()) { throw DimensionError("lmi: equality block shape mismatch"); }
  Matrix na(eq_a.rows() + a.rows(), n_vars);
  Vector nb(eq_b.size() + b.size());
  if (eq_a.rows() > 0) {
    na.topRows(eq_a.rows()) = eq_a;
    nb.head(eq_b.size()) = eq_b;
  }
  na.bottomRows(a.rows()) = a;
  nb.tail(b.size()) = b;
  eq_a = std::move(na);
  eq_b = std::move(nb);
}

Matrix evaluate_pencil(const LmiProblem & problem, int constraint_index, const Vector & x)
{
  if (constraint_index < 0 || constraint_index >= static_cast<int>(problem.pencils.size())) {
    throw std::out_of_range("evaluate_pencil: constraint index out of range");
  }
  if (x.size() != problem.n_vars) { throw DimensionError("evaluate_pencil: x length differs from n_vars"); }
  const Pencil & p = problem.pencils[static_cast<std::size_t>(constraint_index)];
  Matrix out = p.f0;
  for (const auto & t : p.terms) { out += x(t.var) * t.coeff; }
  return 0.5 * (out + out.transpose());
}

double max_constraint_violation(const LmiProblem & problem, const Vector & x)
{
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(problem.pencils.size()); ++i) {
    if (problem.pencils[static_cast<std::size_t>(i)].dim() == 0) { continue; }
    worst = std::max(worst, max_eig_sym(evaluate_pencil(problem, i, x)) + problem.pencils[static_cast<std::size_t>(i)].margin);
  }
  return worst;
}

LmiProblem with_slack(const LmiProblem & problem, const std::vector<int> & which, double t_min)
{
  LmiProblem out = problem;
  const int t = problem.n_vars;
  out.n_vars = t + 1;
  out.objective = Vector::Zero(out.n_vars);
  out.objective(t) = 1.0;
  if (!out.var_names.empty()) { out.var_names.push_back("slack_t"); }
  for (int i = 0; i < static_cast<int>(out.pencils.size()); ++i) {
    const bool pick = which.empty() || std::find(which.begin(), which.end(), i) != which.end();
    Pencil & p = out.pencils[static_cast<std::size_t>(i)];
    if (pick && p.dim() > 0) { p.terms.push_back({t, -Matrix::Identity(p.dim(), p.dim())}); }
  }
  Pencil lower;
  lower.name = "slack_lower_bound";
  lower.f0 = Matrix::Constant(1, 1, t_min);
  lower.terms.push_back({t, -Matrix::Ones(1, 1)});
  lower.margin = 0.0;
  out.pencils.push_back(lower);
  if (out.eq_a.rows() > 0) {
    Matrix a = Matrix::Zero(out.eq_a.rows(), out.n_vars);
    a.leftCols(t) = out.eq_a;
    out.eq_a = a;
  }
  return out;
}

namespace {

std::string fmt(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string & s)
{
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("lmi import: bad number '" + s + "'");
  }
  return v;
}

std::string sanitize(std::string s)
{
  for (auto & ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) { ch = '_'; }
  }
  return s.empty() ? "_" : s;
}

void write_sym(std::ostream & os, const Matrix & m)
{
  std::vector<std::string> lines;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) { lines.push_back("e " + std::to_string(i) + " " + std::to_string(j) + " " + fmt(m(i, j))); }
    }
  }
  os << lines.size() << "\n";
  for (const auto & l : lines) { os << l << "\n"; }
}

class Reader
{
public:
  explicit Reader(std::istream & is) : is_(is) {}

  std::string word()
  {
    std::string w;
    if (!(is_ >> w)) { throw std::invalid_argument("lmi import: unexpected end of input"); }
    return w;
  }

  void expect(const std::string & w)
  {
    const std::string got = word();
    if (got != w) { throw std::invalid_argument("lmi import: expected '" + w + "', got '" + got + "'"); }
  }

  long integer()
  {
    const std::string w = word();
    std::size_t pos = 0;
    long v = std::stol(w, &pos);
    if (pos != w.size()) { throw std::invalid_argument("lmi import: bad integer '" + w + "'"); }
    return v;
  }

  double real() { return parse_double(word()); }

private:
  std::istream & is_;
};

Matrix read_sym(Reader & rd, int dim)
{
  Matrix m = Matrix::Zero(dim, dim);
  const long nnz = rd.integer();
  for (long e = 0; e < nnz; ++e) {
    rd.expect("e");
    const long i = rd.integer(), j = rd.integer();
    const double v = rd.real();
    if (i < 0 || j < 0 || i >= dim || j >= dim) { throw std::invalid_argument("lmi import: entry outside pencil"); }
    m(i, j) = v;
    m(j, i) = v;
  }
  return m;
}

}  // namespace

void export_problem(const LmiProblem & problem, std::ostream & os)
{
  problem.validate();
  os << "consynth-lmi 1\n";
  os << "vars " << problem.n_vars << "\n";
  for (int k = 0; k < problem.n_vars; ++k) {
    os << "var " << k << " "
       << (problem.var_names.empty() ? "x" + std::to_string(k) : sanitize(problem.var_names[static_cast<std::size_t>(k)]))
       << "\n";
  }
  os << "margin_rel " << fmt(problem.margin_rel) << "\n";
  os << "box " << fmt(problem.box) << "\n";
  int nnz = 0;
  for (int k = 0; k < problem.n_vars; ++k) { nnz += problem.objective(k) != 0.0; }
  os << "objective " << nnz << "\n";
  for (int k = 0; k < problem.n_vars; ++k) {
    if (problem.objective(k) != 0.0) { os << "c " << k << " " << fmt(problem.objective(k)) << "\n"; }
  }
  os << "pencils " << problem.pencils.size() << "\n";
  for (const auto & p : problem.pencils) {
    os << "pencil " << sanitize(p.name) << " " << p.dim() << " " << fmt(p.margin) << " " << p.terms.size() << "\n";
    os << "term -1 ";
    write_sym(os, p.f0);
    for (const auto & t : p.terms) {
      os << "term " << t.var << " ";
      write_sym(os, t.coeff);
    }
  }
  os << "equalities " << problem.eq_a.rows() << "\n";
  for (Eigen::Index r = 0; r < problem.eq_a.rows(); ++r) {
    std::vector<std::pair<Eigen::Index, double>> nzs;
    for (Eigen::Index k = 0; k < problem.eq_a.cols(); ++k) {
      if (problem.eq_a(r, k) != 0.0) { nzs.emplace_back(k, problem.eq_a(r, k)); }
    }
    os << "row " << fmt(problem.eq_b(r)) << " " << nzs.size() << "\n";
    for (const auto & [k, v] : nzs) { os << "a " << k << " " << fmt(v) << "\n"; }
  }
  os << "end\n";
}

LmiProblem import_problem(std::istream & is)
{
  Reader rd(is);
  rd.expect("consynth-lmi");
  if (rd.integer() != 1) { throw std::invalid_argument("lmi import: unsupported format version"); }
  LmiProblem p;
  rd.expect("vars");
  p.n_vars = static_cast<int>(rd.integer());
  if (p.n_vars < 0) { throw std::invalid_argument("lmi import: negative variable count"); }
  for (int k = 0; k < p.n_vars; ++k) {
    rd.expect("var");
    if (rd.integer() != k) { throw std::invalid_argument("lmi import: variables out of order"); }
    p.var_names.push_back(rd.word());
  }
  rd.expect("margin_rel");
  p.margin_rel = rd.real();
  rd.expect("box");
  p.box = rd.real();
  rd.expect("objective");
  p.objective = Vector::Zero(p.n_vars);
  const long nobj = rd.integer();
  for (long e = 0; e < nobj; ++e) {
    rd.expect("c");
    const long k = rd.integer();
    if (k < 0 || k >= p.n_vars) { throw std::invalid_argument("lmi import: objective index out of range"); }
    p.objective(k) = rd.real();
  }
  rd.expect("pencils");
  const long npen = rd.integer();
  for (long i = 0; i < npen; ++i) {
    rd.expect("pencil");
    Pencil pen;
    pen.name = rd.word();
    const int dim = static_cast<int>(rd.integer());
    pen.margin = rd.real();
    const long nterms = rd.integer();
    rd.expect("term");
    if (rd.integer() != -1) { throw std::invalid_argument("lmi import: constant term must come first"); }
    pen.f0 = read_sym(rd, dim);
    for (long t = 0; t < nterms; ++t) {
      rd.expect("term");
      const long var = rd.integer();
      if (var < 0 || var >= p.n_vars) { throw std::invalid_argument("lmi import: term variable out of range"); }
      pen.terms.push_back({static_cast<int>(var), read_sym(rd, dim)});
    }
    p.pencils.push_back(std::move(pen));
  }
  rd.expect("equalities");
  const long neq = rd.integer();
  p.eq_a = Matrix::Zero(neq, p.n_vars);
  p.eq_b = Vector::Zero(neq);
  for (long r = 0; r < neq; ++r) {
    rd.expect("row");
    p.eq_b(r) = rd.real();
    const long nnz = rd.integer();
    for (long e = 0; e < nnz; ++e) {
      rd.expect("a");
      const long k = rd.integer();
      if (k < 0 || k >= p.n_vars) { throw std::invalid_argument("lmi import: equality index out of range"); }
      p.eq_a(r, k) = rd.real();
    }
  }
  rd.expect("end");
  p.validate();
  return p;
}

}  // namespace consynth
