#include "nlos/sdp_solver.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "nlos/error.hpp"
#include "nlos/presolve.hpp"

namespace nlos {

void SolverSettings::validate() const {
  if (!(gap_tol > 0.0) || !(feas_tol > 0.0)) throw InvalidInput("solver tolerances must be positive");
  if (max_iters < 1) throw InvalidInput("max_iters must be at least 1");
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kMaxIters: return "max-iters";
    case SolveStatus::kInfeasibleDetected: return "infeasible-detected";
    case SolveStatus::kNumericalFailure: break;
  }
  return "numerical-failure";
}

namespace {

constexpr double kStepFraction = 0.95;
constexpr int kMaxRegularizations = 6;

double relative_gap(double p, double d) { return std::abs(p - d) / (1.0 + std::abs(p) + std::abs(d)); }

double frobenius(const BlockMatrices& m) {
  double sum = 0.0;
  for (const auto& b : m) sum += b.squaredNorm();
  return std::sqrt(sum);
}

// Cholesky of the Schur complement, dense or sparse depending on the plan.
class SchurFactor {
 public:
  explicit SchurFactor(const KernelPlan& plan) : plan_(plan), values_(plan.schur_size()) {
    if (!plan.dense_schur()) {
      sparse_ = plan.sparse_pattern();
      sparse_llt_.analyzePattern(sparse_);
    }
  }

  std::span<double> values() { return values_; }

  // Factorizes the assembled values, adding diagonal shifts if needed.
  bool factorize(std::string& note) {
    const int n = plan_.num_vars();
    double max_diag = 0.0;
    for (const int s : plan_.diagonal_slots()) max_diag = std::max(max_diag, values_[s]);
    double shift = 0.0;
    for (int attempt = 0; attempt <= kMaxRegularizations; ++attempt) {
      if (attempt > 0) {
        const double next = max_diag * 1e-14 * std::pow(100.0, attempt - 1);
        for (const int s : plan_.diagonal_slots()) values_[s] += next - shift;
        shift = next;
        note = "schur complement regularized by " + std::to_string(shift);
      }
      if (plan_.dense_schur()) {
        Eigen::Map<Eigen::MatrixXd> m(values_.data(), n, n);
        dense_llt_.compute(m);
        if (dense_llt_.info() == Eigen::Success) return true;
      } else {
        std::copy(values_.begin(), values_.end(), sparse_.valuePtr());
        sparse_llt_.factorize(sparse_);
        if (sparse_llt_.info() == Eigen::Success) return true;
      }
    }
    return false;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    return plan_.dense_schur() ? Eigen::VectorXd(dense_llt_.solve(rhs)) : Eigen::VectorXd(sparse_llt_.solve(rhs));
  }

 private:
  const KernelPlan& plan_;
  std::vector<double> values_;
  Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> dense_llt_;
  Eigen::SparseMatrix<double> sparse_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> sparse_llt_;
};

struct IpmResult {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Eigen::VectorXd w;           // unscaled reduced variables
  BlockMatrices x;             // unscaled block duals
  double primal = 0.0;         // reduced objective incl. constant
  double dual = 0.0;
  int iterations = 0;
  std::vector<std::string> messages;
};

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

IpmResult run_ipm(const ReducedProblem& rp, const SolverSettings& settings) {
  const Execution exec = settings.execution;
  const int nv = rp.num_vars;

  // Column scaling d_k = 1 / ||F_k|| and objective normalization.
  Eigen::VectorXd col_norm = Eigen::VectorXd::Zero(nv);
  for (const auto& block : rp.blocks) {
    for (const auto& term : block.terms) {
      for (const auto& e : term.entries) col_norm(term.var) += (e.row == e.col ? 1.0 : 2.0) * e.value * e.value;
    }
  }
  Eigen::VectorXd d(nv);
  for (int k = 0; k < nv; ++k) d(k) = col_norm(k) > 0.0 ? 1.0 / std::sqrt(col_norm(k)) : 1.0;
  std::vector<ReducedBlock> blocks = rp.blocks;
  for (auto& block : blocks) {
    for (auto& term : block.terms) {
      for (auto& e : term.entries) e.value *= d(term.var);
    }
  }
  Eigen::VectorXd cost = rp.cost.cwiseProduct(d);
  const double cost_scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  cost /= cost_scale;

  KernelPlan plan(blocks, nv);
  SchurFactor factor(plan);

  BlockMatrices f0(blocks.size());
  BlockMatrices x(blocks.size());
  BlockMatrices s(blocks.size());
  double n_total = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const int dim = blocks[b].dim();
    f0[b] = blocks[b].constant;
    const double xi = std::max(10.0, static_cast<double>(dim));
    const double eta = std::max(10.0, f0[b].norm());
    x[b] = xi * Eigen::MatrixXd::Identity(dim, dim);
    s[b] = eta * Eigen::MatrixXd::Identity(dim, dim);
    n_total += dim;
  }
  const double f0_norm = frobenius(f0);
  const double cost_norm = cost.norm();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(nv);

  const auto unscale = [&](double scaled) { return cost_scale * scaled + rp.cost_constant; };

  IpmResult result;
  int stalled = 0;
  for (int iter = 0;; ++iter) {
    result.iterations = iter;
    const BlockMatrices fw = kernels::apply(plan, w, true, exec);
    BlockMatrices rp_res(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) rp_res[b] = fw[b] - s[b];
    const Eigen::VectorXd rd = cost - kernels::adjoint(plan, x, exec);
    const double pobj = cost.dot(w);
    const double dobj = -kernels::inner(f0, x, exec);
    const double mu = kernels::inner(x, s, exec) / n_total;
    const double gap = relative_gap(unscale(pobj), unscale(dobj));
    const double pinf = frobenius(rp_res) / (1.0 + f0_norm);
    const double dinf = rd.norm() / (1.0 + cost_norm);

    if (!std::isfinite(pobj) || !std::isfinite(dobj) || !std::isfinite(mu)) {
      result.status = SolveStatus::kNumericalFailure;
      result.messages.push_back("non-finite iterate");
      break;
    }
    if (gap <= settings.gap_tol && pinf <= settings.feas_tol && dinf <= settings.feas_tol) {
      result.status = SolveStatus::kOptimal;
      break;
    }
    if (iter >= settings.max_iters) {
      result.status = SolveStatus::kMaxIters;
      break;
    }

    BlockMatrices s_inv(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      Eigen::LLT<Eigen::MatrixXd> llt(s[b]);
      s_inv[b] = llt.solve(Eigen::MatrixXd::Identity(s[b].rows(), s[b].cols()));
      s_inv[b] = symmetrize(s_inv[b]);
    }
    kernels::assemble_schur(plan, x, s_inv, factor.values(), exec);
    std::string note;
    if (!factor.factorize(note)) {
      result.status = SolveStatus::kNumericalFailure;
      result.messages.push_back("schur complement factorization failed at iteration " + std::to_string(iter));
      break;
    }

    // Predictor (sigma = 0) then Mehrotra corrector, sharing the factorization.
    BlockMatrices xrs(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) xrs[b] = x[b] * rp_res[b] * s_inv[b];
    const auto direction = [&](double target_mu, const BlockMatrices* corr, Eigen::VectorXd& dw, BlockMatrices& dx,
                               BlockMatrices& ds) {
      BlockMatrices g(blocks.size());
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        g[b] = target_mu * s_inv[b] - xrs[b];
        if (corr != nullptr) g[b] -= (*corr)[b];
      }
      const Eigen::VectorXd rhs = kernels::adjoint(plan, g, exec) - cost;
      dw = factor.solve(rhs);
      ds = kernels::apply(plan, dw, false, exec);
      dx.resize(blocks.size());
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        ds[b] += rp_res[b];
        dx[b] = target_mu * s_inv[b] - x[b] - symmetrize(x[b] * ds[b] * s_inv[b]);
        if (corr != nullptr) dx[b] -= symmetrize((*corr)[b]);
      }
    };

    Eigen::VectorXd dw;
    BlockMatrices dx;
    BlockMatrices ds;
    direction(0.0, nullptr, dw, dx, ds);
    const double ap_aff = std::min(1.0, kernels::max_step(x, dx, exec));
    const double ad_aff = std::min(1.0, kernels::max_step(s, ds, exec));
    BlockMatrices xa(blocks.size());
    BlockMatrices sa(blocks.size());
    BlockMatrices corr(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      xa[b] = x[b] + ap_aff * dx[b];
      sa[b] = s[b] + ad_aff * ds[b];
      corr[b] = dx[b] * ds[b] * s_inv[b];
    }
    const double mu_aff = kernels::inner(xa, sa, exec) / n_total;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    direction(sigma * mu, &corr, dw, dx, ds);
    const double ap = std::min(1.0, kStepFraction * kernels::max_step(x, dx, exec));
    const double ad = std::min(1.0, kStepFraction * kernels::max_step(s, ds, exec));
    if (!std::isfinite(dw.norm())) {
      result.status = SolveStatus::kNumericalFailure;
      result.messages.push_back("non-finite search direction");
      break;
    }

    if (settings.verbosity > 0 && settings.log != nullptr) {
      char line[256];
      std::snprintf(line, sizeof line,
                    "iter %3d pobj %+.9e dobj %+.9e gap %.3e pinf %.3e dinf %.3e mu %.3e ap %.3f ad %.3f%s%s\n", iter,
                    unscale(pobj), unscale(dobj), gap, pinf, dinf, mu, ap, ad, note.empty() ? "" : " ", note.c_str());
      *settings.log << line;
    }

    for (std::size_t b = 0; b < blocks.size(); ++b) {
      x[b] += ap * dx[b];
      s[b] += ad * ds[b];
    }
    w += ad * dw;

    stalled = (ap < 1e-10 && ad < 1e-10) ? stalled + 1 : 0;
    if (stalled >= 3) {
      result.status = SolveStatus::kNumericalFailure;
      result.messages.push_back("step lengths collapsed");
      result.iterations = iter + 1;
      break;
    }
  }

  result.w = w.cwiseProduct(d);
  result.x.resize(x.size());
  for (std::size_t b = 0; b < x.size(); ++b) result.x[b] = cost_scale * x[b];
  result.primal = unscale(cost.dot(w));
  result.dual = unscale(-kernels::inner(f0, x, exec));
  return result;
}

// Least-squares multipliers y for A'y = r.
std::vector<double> equality_multipliers(const ConicProblem& problem, const Eigen::VectorXd& r) {
  const auto& eqs = problem.equalities();
  if (eqs.empty()) return {};
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t e = 0; e < eqs.size(); ++e) {
    for (const auto& t : eqs[e].lhs.terms) triplets.emplace_back(static_cast<int>(e), t.var, t.coeff);
  }
  Eigen::SparseMatrix<double> a(static_cast<int>(eqs.size()), problem.num_vars());
  a.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseMatrix<double> normal = a * a.transpose();
  double max_diag = 0.0;
  for (int k = 0; k < normal.rows(); ++k) max_diag = std::max(max_diag, normal.coeff(k, k));
  Eigen::SparseMatrix<double> ridge(normal.rows(), normal.cols());
  ridge.setIdentity();
  normal += (1e-14 * std::max(1.0, max_diag)) * ridge;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(normal);
  const Eigen::VectorXd y = ldlt.solve(a * r);
  return {y.data(), y.data() + y.size()};
}

// c - B*(X): objective gradient minus the block adjoint, per original variable.
Eigen::VectorXd block_stationarity(const ConicProblem& problem, const std::vector<Eigen::MatrixXd>& duals) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(problem.num_vars());
  for (const auto& t : problem.objective().terms) r(t.var) += t.coeff;
  for (std::size_t b = 0; b < problem.blocks().size(); ++b) {
    const auto& block = problem.blocks()[b];
    for (const auto& e : block.entries) {
      const double weight = e.row == e.col ? duals[b](e.row, e.col) : duals[b](e.row, e.col) + duals[b](e.col, e.row);
      for (const auto& t : e.value.terms) r(t.var) -= t.coeff * weight;
    }
  }
  return r;
}

double equality_residual(const ConicProblem& problem, std::span<const double> v) {
  double worst = 0.0;
  for (const auto& eq : problem.equalities()) worst = std::max(worst, std::abs(eq.lhs.evaluate(v) - eq.rhs));
  return worst;
}

double min_block_eig(const ConicProblem& problem, std::span<const double> v) {
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& block : problem.blocks()) {
    const Eigen::MatrixXd m = block.evaluate(v);
    if (m.rows() == 1) {
      lowest = std::min(lowest, m(0, 0));
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
      lowest = std::min(lowest, eig.eigenvalues()(0));
    }
  }
  return problem.blocks().empty() ? 0.0 : lowest;
}

}  // namespace

Solution solve(const ConicProblem& problem, const SolverSettings& settings) {
  settings.validate();
  const ReducedProblem rp = presolve(problem);
  Solution sol;
  sol.messages = rp.warnings;
  sol.primal_values.assign(problem.num_vars(), 0.0);

  if (rp.status != ReducedProblem::Status::kOk) {
    sol.status = SolveStatus::kInfeasibleDetected;
    sol.messages.push_back(rp.message);
    return sol;
  }

  IpmResult ipm;
  if (rp.num_vars == 0 || rp.blocks.empty()) {
    ipm.status = SolveStatus::kOptimal;
    ipm.w = Eigen::VectorXd::Zero(rp.num_vars);
    ipm.primal = ipm.dual = rp.cost_constant;
  } else {
    ipm = run_ipm(rp, settings);
  }

  const Eigen::VectorXd v = rp.expand(ipm.w);
  sol.primal_values.assign(v.data(), v.data() + v.size());
  sol.iterations = ipm.iterations;
  sol.objective_value = problem.objective_value(sol.primal_values);
  sol.dual_objective = ipm.dual;
  sol.duality_gap = relative_gap(sol.objective_value, sol.dual_objective);
  sol.equality_residual_inf_norm = equality_residual(problem, sol.primal_values);
  sol.min_block_eigenvalue = min_block_eig(problem, sol.primal_values);
  sol.messages.insert(sol.messages.end(), ipm.messages.begin(), ipm.messages.end());

  if (!rp.faces_reduced) {
    DualValues dual;
    dual.block_duals.resize(problem.blocks().size());
    for (std::size_t b = 0; b < problem.blocks().size(); ++b) {
      const int dim = problem.blocks()[b].dim;
      dual.block_duals[b] = Eigen::MatrixXd::Zero(dim, dim);
    }
    for (std::size_t r = 0; r < ipm.x.size(); ++r) dual.block_duals[rp.blocks[r].source] = ipm.x[r];
    dual.equality_multipliers = equality_multipliers(problem, block_stationarity(problem, dual.block_duals));
    sol.dual = std::move(dual);
  }

  sol.status = ipm.status;
  if (sol.status == SolveStatus::kOptimal) {
    const bool ok = sol.duality_gap <= settings.gap_tol && sol.equality_residual_inf_norm <= settings.feas_tol &&
                    sol.min_block_eigenvalue >= -settings.feas_tol;
    if (!ok) {
      sol.status = SolveStatus::kNumericalFailure;
      sol.messages.push_back("reduced problem converged but original residuals exceed tolerance");
    }
  }
  return sol;
}

bool KktReport::within(double gap_tol, double feas_tol) const {
  bool ok = duality_gap <= gap_tol && equality_residual_inf_norm <= feas_tol && min_block_eigenvalue >= -feas_tol;
  if (has_dual) {
    ok = ok && min_dual_block_eigenvalue >= -feas_tol &&
         stationarity_residual_inf_norm <= feas_tol * (1.0 + objective_scale);
  }
  return ok;
}

KktReport check_kkt(const ConicProblem& problem, const Solution& solution) {
  if (static_cast<int>(solution.primal_values.size()) != problem.num_vars()) {
    throw InvalidInput("solution does not match the problem's variable count");
  }
  const std::span<const double> v = solution.primal_values;
  KktReport report;
  report.equality_residual_inf_norm = equality_residual(problem, v);
  report.min_block_eigenvalue = min_block_eig(problem, v);
  report.primal_objective = problem.objective_value(v);
  report.duality_gap = solution.duality_gap;
  for (const auto& t : problem.objective().terms) report.objective_scale = std::max(report.objective_scale, std::abs(t.coeff));
  if (!solution.dual) return report;

  const auto& dual = *solution.dual;
  if (dual.block_duals.size() != problem.blocks().size() ||
      dual.equality_multipliers.size() != problem.equalities().size()) {
    throw InvalidInput("dual values do not match the problem structure");
  }
  report.has_dual = true;
  Eigen::VectorXd r = block_stationarity(problem, dual.block_duals);
  double dual_obj = problem.objective().constant;
  for (std::size_t e = 0; e < problem.equalities().size(); ++e) {
    const auto& eq = problem.equalities()[e];
    const double y = dual.equality_multipliers[e];
    dual_obj += y * eq.rhs;
    for (const auto& t : eq.lhs.terms) r(t.var) -= y * t.coeff;
  }
  report.min_dual_block_eigenvalue = std::numeric_limits<double>::infinity();
  const std::vector<double> zeros(problem.num_vars(), 0.0);
  for (std::size_t b = 0; b < problem.blocks().size(); ++b) {
    const Eigen::MatrixXd f0 = problem.blocks()[b].evaluate(zeros);
    dual_obj -= f0.cwiseProduct(dual.block_duals[b]).sum();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dual.block_duals[b], Eigen::EigenvaluesOnly);
    report.min_dual_block_eigenvalue = std::min(report.min_dual_block_eigenvalue, eig.eigenvalues()(0));
  }
  if (problem.blocks().empty()) report.min_dual_block_eigenvalue = 0.0;
  report.stationarity_residual_inf_norm = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
  report.dual_objective = dual_obj;
  report.duality_gap = relative_gap(report.primal_objective, dual_obj);
  return report;
}

}  // namespace nlos
