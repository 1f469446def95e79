#include "nlos/presolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "nlos/error.hpp"

namespace nlos {
namespace {

constexpr double kDropRelative = 1e-13;

void drop_noise(AffineExpr& e) {
  double biggest = 0.0;
  for (const auto& t : e.terms) biggest = std::max(biggest, std::abs(t.coeff));
  std::erase_if(e.terms, [&](const LinearTerm& t) { return std::abs(t.coeff) <= kDropRelative * biggest; });
}

class Eliminator {
 public:
  explicit Eliminator(const ConicProblem& problem)
      : defs_(problem.num_vars()), users_(problem.num_vars()), occurrences_(problem.num_vars(), 0) {
    for (const auto& block : problem.blocks()) {
      for (const auto& entry : block.entries) {
        for (const auto& t : entry.value.terms) ++occurrences_[t.var];
      }
    }
  }

  AffineExpr substitute(const AffineExpr& e) const {
    AffineExpr out(e.constant);
    for (const auto& t : e.terms) {
      if (defs_[t.var]) {
        out.add(*defs_[t.var], t.coeff);
      } else {
        out.terms.push_back(t);
      }
    }
    out.normalize();
    drop_noise(out);
    return out;
  }

  enum class Outcome { kEliminated, kDependent, kContradiction };

  Outcome add(const AffineExpr& lhs, double rhs) {
    AffineExpr row = substitute(lhs);
    const double target = rhs - row.constant;
    row.constant = 0.0;
    if (row.terms.empty()) {
      const double scale = 1.0 + std::abs(rhs) + std::abs(lhs.constant);
      return std::abs(target) <= 1e-9 * scale ? Outcome::kDependent : Outcome::kContradiction;
    }
    double biggest = 0.0;
    for (const auto& t : row.terms) biggest = std::max(biggest, std::abs(t.coeff));
    // Among numerically safe pivots prefer the variable touching the fewest blocks,
    // then the most recently declared one.
    const LinearTerm* pivot = nullptr;
    for (const auto& t : row.terms) {
      if (std::abs(t.coeff) < 0.1 * biggest) continue;
      if (pivot == nullptr || occurrences_[t.var] < occurrences_[pivot->var] ||
          (occurrences_[t.var] == occurrences_[pivot->var] && t.var > pivot->var)) {
        pivot = &t;
      }
    }
    const VarIndex p = pivot->var;
    AffineExpr def(target / pivot->coeff);
    for (const auto& t : row.terms) {
      if (t.var != p) def.terms.push_back({t.var, -t.coeff / pivot->coeff});
    }
    def.normalize();

    for (const int u : users_[p]) {
      if (!defs_[u]) continue;
      const auto it = std::find_if(defs_[u]->terms.begin(), defs_[u]->terms.end(),
                                   [&](const LinearTerm& t) { return t.var == p; });
      if (it == defs_[u]->terms.end()) continue;
      const double coeff = it->coeff;
      defs_[u]->terms.erase(it);
      defs_[u]->add(def, coeff);
      defs_[u]->normalize();
      drop_noise(*defs_[u]);
      for (const auto& t : def.terms) users_[t.var].push_back(u);
    }
    users_[p].clear();
    users_[p].shrink_to_fit();
    for (const auto& t : def.terms) users_[t.var].push_back(p);
    defs_[p] = std::move(def);
    return Outcome::kEliminated;
  }

  bool eliminated(VarIndex v) const { return defs_[v].has_value(); }
  const AffineExpr& definition(VarIndex v) const { return *defs_[v]; }

 private:
  std::vector<std::optional<AffineExpr>> defs_;
  std::vector<std::vector<int>> users_;
  std::vector<int> occurrences_;
};

// Block under reduction: symmetric matrix of affine expressions.
struct WorkBlock {
  int source = 0;
  int dim = 0;
  std::vector<AffineExpr> upper;  // row-major, only row <= col used

  AffineExpr& at(int r, int c) { return r <= c ? upper[r * dim + c] : upper[c * dim + r]; }
  const AffineExpr& at(int r, int c) const { return r <= c ? upper[r * dim + c] : upper[c * dim + r]; }
};

WorkBlock make_work_block(const PsdBlock& block, int source) {
  WorkBlock w;
  w.source = source;
  w.dim = block.dim;
  w.upper.assign(static_cast<std::size_t>(block.dim) * block.dim, AffineExpr{});
  for (const auto& e : block.entries) w.upper[e.row * block.dim + e.col] = e.value;
  return w;
}

void resubstitute(WorkBlock& block, const Eliminator& elim) {
  for (int r = 0; r < block.dim; ++r) {
    for (int c = r; c < block.dim; ++c) block.at(r, c) = elim.substitute(block.at(r, c));
  }
}

Eigen::MatrixXd constant_part(const WorkBlock& block) {
  Eigen::MatrixXd m(block.dim, block.dim);
  for (int r = 0; r < block.dim; ++r) {
    for (int c = r; c < block.dim; ++c) {
      m(r, c) = block.at(r, c).constant;
      m(c, r) = m(r, c);
    }
  }
  return m;
}

enum class FaceResult { kUnchanged, kReduced, kInfeasible };

// Greedy fixed principal index set: every entry among these rows/cols is constant.
std::vector<int> fixed_indices(const WorkBlock& block) {
  std::vector<int> fixed;
  for (int i = 0; i < block.dim; ++i) {
    if (!block.at(i, i).is_constant()) continue;
    const bool ok = std::all_of(fixed.begin(), fixed.end(), [&](int f) { return block.at(i, f).is_constant(); });
    if (ok) fixed.push_back(i);
  }
  return fixed;
}

FaceResult reduce_face(WorkBlock& block, Eliminator& elim, std::string& message) {
  const std::vector<int> fixed = fixed_indices(block);
  if (fixed.empty()) return FaceResult::kUnchanged;
  const int nf = static_cast<int>(fixed.size());
  Eigen::MatrixXd c(nf, nf);
  for (int a = 0; a < nf; ++a) {
    for (int b = 0; b < nf; ++b) c(a, b) = block.at(fixed[a], fixed[b]).constant;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -1e-7 * scale) {
    message = "fixed principal submatrix is not PSD";
    return FaceResult::kInfeasible;
  }
  const double tol = 1e-9 * scale;
  std::vector<int> range_cols;
  std::vector<int> null_cols;
  for (int k = 0; k < nf; ++k) (lambda(k) > tol ? range_cols : null_cols).push_back(k);
  if (null_cols.empty()) return FaceResult::kUnchanged;

  std::vector<int> free_rows;
  for (int i = 0; i < block.dim; ++i) {
    if (std::find(fixed.begin(), fixed.end(), i) == fixed.end()) free_rows.push_back(i);
  }

  // Null basis in echelon form: identity on a well-conditioned subset of fixed rows.
  const int nk = static_cast<int>(null_cols.size());
  Eigen::MatrixXd null_basis(nf, nk);
  for (int q = 0; q < nk; ++q) null_basis.col(q) = eig.eigenvectors().col(null_cols[q]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(null_basis.transpose());
  Eigen::MatrixXd pivot_rows(nk, nk);
  for (int q = 0; q < nk; ++q) pivot_rows.row(q) = null_basis.row(qr.colsPermutation().indices()(q));
  null_basis = null_basis * pivot_rows.inverse();

  // Z ⪰ 0 forces Z[free, fixed] * null = 0.
  for (const int i : free_rows) {
    for (int q = 0; q < nk; ++q) {
      AffineExpr row;
      for (int a = 0; a < nf; ++a) {
        if (null_basis(a, q) != 0.0) row.add(block.at(i, fixed[a]), null_basis(a, q));
      }
      row.normalize();
      drop_noise(row);
      const double rhs = -row.constant;
      row.constant = 0.0;
      if (elim.add(row, rhs) == Eliminator::Outcome::kContradiction) {
        message = "face restriction contradicts fixed entries";
        return FaceResult::kInfeasible;
      }
    }
  }
  resubstitute(block, elim);

  // T = [range(C) 0; 0 I] in (fixed, free) coordinates.
  const int nr = static_cast<int>(range_cols.size());
  const int new_dim = nr + static_cast<int>(free_rows.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(block.dim, new_dim);
  for (int p = 0; p < nr; ++p) {
    for (int a = 0; a < nf; ++a) t(fixed[a], p) = eig.eigenvectors()(a, range_cols[p]);
  }
  for (std::size_t q = 0; q < free_rows.size(); ++q) t(free_rows[q], nr + static_cast<int>(q)) = 1.0;

  WorkBlock reduced;
  reduced.source = block.source;
  reduced.dim = new_dim;
  reduced.upper.assign(static_cast<std::size_t>(new_dim) * new_dim, AffineExpr{});
  for (int p = 0; p < nr; ++p) reduced.at(p, p) = AffineExpr(lambda(range_cols[p]));
  for (int p = 0; p < nr; ++p) {
    for (std::size_t q = 0; q < free_rows.size(); ++q) {
      AffineExpr e;
      for (int a = 0; a < nf; ++a) {
        const double u = t(fixed[a], p);
        if (u != 0.0) e.add(block.at(fixed[a], free_rows[q]), u);
      }
      e.normalize();
      drop_noise(e);
      reduced.at(p, nr + static_cast<int>(q)) = std::move(e);
    }
  }
  for (std::size_t a = 0; a < free_rows.size(); ++a) {
    for (std::size_t b = a; b < free_rows.size(); ++b) {
      reduced.at(nr + static_cast<int>(a), nr + static_cast<int>(b)) = block.at(free_rows[a], free_rows[b]);
    }
  }
  block = std::move(reduced);
  return FaceResult::kReduced;
}

}  // namespace

ReducedProblem presolve(const ConicProblem& problem) {
  problem.validate();
  ReducedProblem out;
  Eliminator elim(problem);

  const auto& eqs = problem.equalities();
  for (std::size_t k = 0; k < eqs.size(); ++k) {
    switch (elim.add(eqs[k].lhs, eqs[k].rhs)) {
      case Eliminator::Outcome::kEliminated:
        break;
      case Eliminator::Outcome::kDependent:
        out.dependent_equalities.push_back(static_cast<int>(k));
        out.warnings.push_back("equality " + std::to_string(k) + " is linearly dependent and was removed");
        break;
      case Eliminator::Outcome::kContradiction:
        out.status = ReducedProblem::Status::kInfeasible;
        out.message = "equality " + std::to_string(k) + " contradicts earlier equalities";
        return out;
    }
  }

  std::vector<WorkBlock> work;
  work.reserve(problem.blocks().size());
  for (std::size_t b = 0; b < problem.blocks().size(); ++b) {
    work.push_back(make_work_block(problem.blocks()[b], static_cast<int>(b)));
    resubstitute(work.back(), elim);
  }

  for (bool changed = true; changed;) {
    changed = false;
    for (auto& block : work) {
      if (block.dim == 0) continue;
      resubstitute(block, elim);
      std::string message;
      const FaceResult r = reduce_face(block, elim, message);
      if (r == FaceResult::kInfeasible) {
        out.status = ReducedProblem::Status::kInfeasible;
        out.message = "block " + problem.blocks()[block.source].name + ": " + message;
        return out;
      }
      if (r == FaceResult::kReduced) {
        changed = true;
        out.faces_reduced = true;
      }
    }
  }
  for (auto& block : work) resubstitute(block, elim);

  // Reduced variable numbering: free variables that appear in some block.
  const int n = problem.num_vars();
  std::vector<int> reduced_index(n, -1);
  std::vector<char> in_block(n, 0);
  for (const auto& block : work) {
    for (int r = 0; r < block.dim; ++r) {
      for (int c = r; c < block.dim; ++c) {
        for (const auto& t : block.at(r, c).terms) in_block[t.var] = 1;
      }
    }
  }
  for (VarIndex v = 0; v < n; ++v) {
    if (!elim.eliminated(v) && in_block[v]) reduced_index[v] = out.num_vars++;
  }

  const AffineExpr objective = elim.substitute(problem.objective());
  out.cost = Eigen::VectorXd::Zero(out.num_vars);
  out.cost_constant = objective.constant;
  for (const auto& t : objective.terms) {
    if (reduced_index[t.var] < 0) {
      if (std::abs(t.coeff) > 1e-12) {
        out.status = ReducedProblem::Status::kUnbounded;
        out.message = "variable " + problem.label(t.var) + " has cost but no conic constraint";
        return out;
      }
      continue;
    }
    out.cost(reduced_index[t.var]) = t.coeff;
  }

  for (const auto& block : work) {
    if (block.dim == 0) continue;
    ReducedBlock rb;
    rb.source = block.source;
    rb.constant = constant_part(block);
    std::map<int, std::vector<SymEntry>> by_var;
    for (int r = 0; r < block.dim; ++r) {
      for (int c = r; c < block.dim; ++c) {
        for (const auto& t : block.at(r, c).terms) by_var[reduced_index[t.var]].push_back({r, c, t.coeff});
      }
    }
    if (by_var.empty()) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rb.constant, Eigen::EigenvaluesOnly);
      const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
      if (eig.eigenvalues().minCoeff() < -1e-9 * scale) {
        out.status = ReducedProblem::Status::kInfeasible;
        out.message = "block " + problem.blocks()[block.source].name + " is constant and not PSD";
        return out;
      }
      continue;
    }
    for (auto& [var, entries] : by_var) rb.terms.push_back({var, std::move(entries)});
    out.blocks.push_back(std::move(rb));
  }

  out.offset = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> triplets;
  for (VarIndex v = 0; v < n; ++v) {
    if (elim.eliminated(v)) {
      const auto& def = elim.definition(v);
      out.offset(v) = def.constant;
      for (const auto& t : def.terms) {
        if (reduced_index[t.var] >= 0) triplets.emplace_back(v, reduced_index[t.var], t.coeff);
      }
    } else if (reduced_index[v] >= 0) {
      triplets.emplace_back(v, reduced_index[v], 1.0);
    }
  }
  out.expansion.resize(n, out.num_vars);
  out.expansion.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

}  // namespace nlos
