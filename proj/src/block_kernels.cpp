#include "nlos/block_kernels.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace nlos {

KernelPlan::KernelPlan(std::span<const ReducedBlock> blocks, int num_vars) : blocks_(blocks), num_vars_(num_vars) {
  const int nb = static_cast<int>(blocks.size());
  term_offset_.assign(nb + 1, 0);
  entry_offset_.push_back(0);
  std::vector<int> var_count(num_vars, 0);
  for (int b = 0; b < nb; ++b) {
    for (const auto& term : blocks[b].terms) {
      term_var_.push_back(term.var);
      term_block_.push_back(b);
      ++var_count[term.var];
      for (const auto& e : term.entries) {
        entries_.push_back({e.row, e.col, e.value});
        if (e.row != e.col) entries_.push_back({e.col, e.row, e.value});
      }
      entry_offset_.push_back(static_cast<int>(entries_.size()));
    }
    term_offset_[b + 1] = static_cast<int>(term_var_.size());
  }

  var_term_offset_.assign(num_vars + 1, 0);
  for (int v = 0; v < num_vars; ++v) var_term_offset_[v + 1] = var_term_offset_[v] + var_count[v];
  var_terms_.resize(term_var_.size());
  std::vector<int> fill(var_term_offset_.begin(), var_term_offset_.end() - 1);
  for (int t = 0; t < static_cast<int>(term_var_.size()); ++t) var_terms_[fill[term_var_[t]]++] = t;

  // Schur pairs.
  pair_offset_.assign(term_var_.size() + 1, 0);
  std::vector<std::pair<int, int>> pairs;  // (row, col) of the lower triangle
  for (int b = 0; b < nb; ++b) {
    for (int a = term_offset_[b]; a < term_offset_[b + 1]; ++a) {
      for (int c = a; c < term_offset_[b + 1]; ++c) {
        pairs.emplace_back(std::max(term_var_[a], term_var_[c]), std::min(term_var_[a], term_var_[c]));
      }
      pair_offset_[a + 1] = pairs.size();
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(pairs.size() + num_vars);
  for (const auto& [r, c] : pairs) triplets.emplace_back(r, c, 1.0);
  for (int v = 0; v < num_vars; ++v) triplets.emplace_back(v, v, 1.0);
  pattern_.resize(num_vars, num_vars);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();
  nnz_ = static_cast<std::size_t>(pattern_.nonZeros());
  const double full = 0.5 * static_cast<double>(num_vars) * (num_vars + 1);
  dense_ = num_vars <= 4000 && static_cast<double>(nnz_) > 0.3 * full;

  const auto slot_of = [&](int r, int c) -> std::size_t {
    if (dense_) return static_cast<std::size_t>(c) * num_vars + r;
    const int* begin = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[c];
    const int* end = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[c + 1];
    return static_cast<std::size_t>(std::lower_bound(begin, end, r) - pattern_.innerIndexPtr());
  };
  pair_slot_.resize(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) pair_slot_[p] = slot_of(pairs[p].first, pairs[p].second);
  diag_slots_.resize(num_vars);
  for (int v = 0; v < num_vars; ++v) diag_slots_[v] = static_cast<int>(slot_of(v, v));

  const std::size_t nslots = schur_size();
  slot_pair_offset_.assign(nslots + 1, 0);
  for (const std::size_t s : pair_slot_) ++slot_pair_offset_[s + 1];
  std::partial_sum(slot_pair_offset_.begin(), slot_pair_offset_.end(), slot_pair_offset_.begin());
  slot_pairs_.resize(pairs.size());
  std::vector<std::size_t> cursor(slot_pair_offset_.begin(), slot_pair_offset_.end() - 1);
  for (std::size_t p = 0; p < pairs.size(); ++p) slot_pairs_[cursor[pair_slot_[p]]++] = p;
}

namespace kernels {
namespace {

double term_inner(const KernelPlan& plan, int t, const Eigen::MatrixXd& m) {
  double sum = 0.0;
  for (int e = plan.entry_offset_[t]; e < plan.entry_offset_[t + 1]; ++e) {
    const auto& en = plan.entries_[e];
    sum += en.value * m(en.col, en.row);
  }
  return sum;
}

// tr(F_a X F_c S^{-1}) = sum_{(p,q) in F_a} sum_{(s,t) in F_c} F_a[p,q] F_c[s,t] X[q,s] Sinv[t,p]
double pair_value(const KernelPlan& plan, int a, int c, const Eigen::MatrixXd& x, const Eigen::MatrixXd& s_inv) {
  double sum = 0.0;
  for (int e = plan.entry_offset_[a]; e < plan.entry_offset_[a + 1]; ++e) {
    const auto& fa = plan.entries_[e];
    for (int f = plan.entry_offset_[c]; f < plan.entry_offset_[c + 1]; ++f) {
      const auto& fc = plan.entries_[f];
      sum += fa.value * fc.value * x(fa.col, fc.row) * s_inv(fc.col, fa.row);
    }
  }
  return sum;
}

}  // namespace

BlockMatrices apply(const KernelPlan& plan, const Eigen::VectorXd& w, bool with_constant, Execution exec) {
  const int nb = plan.num_blocks();
  BlockMatrices out(nb);
  const auto one = [&](int b) {
    const auto& block = plan.blocks()[b];
    out[b] = with_constant ? block.constant : Eigen::MatrixXd::Zero(block.dim(), block.dim());
    for (int t = plan.term_offset_[b]; t < plan.term_offset_[b + 1]; ++t) {
      const double wt = w(plan.term_var_[t]);
      if (wt == 0.0) continue;
      for (int e = plan.entry_offset_[t]; e < plan.entry_offset_[t + 1]; ++e) {
        const auto& en = plan.entries_[e];
        out[b](en.row, en.col) += wt * en.value;
      }
    }
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (int b = 0; b < nb; ++b) one(b);
  } else {
    for (int b = 0; b < nb; ++b) one(b);
  }
  return out;
}

Eigen::VectorXd adjoint(const KernelPlan& plan, const BlockMatrices& mats, Execution exec) {
  const int nv = plan.num_vars();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nv);
  if (exec == Execution::kSerial) {
    for (int b = 0; b < plan.num_blocks(); ++b) {
      for (int t = plan.term_offset_[b]; t < plan.term_offset_[b + 1]; ++t) {
        out(plan.term_var_[t]) += term_inner(plan, t, mats[b]);
      }
    }
    return out;
  }
  const int nt = static_cast<int>(plan.term_var_.size());
  std::vector<double> contrib(nt);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < nt; ++t) contrib[t] = term_inner(plan, t, mats[plan.term_block_[t]]);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < nv; ++v) {
    double sum = 0.0;
    for (int k = plan.var_term_offset_[v]; k < plan.var_term_offset_[v + 1]; ++k) sum += contrib[plan.var_terms_[k]];
    out(v) = sum;
  }
  return out;
}

void assemble_schur(const KernelPlan& plan, const BlockMatrices& x, const BlockMatrices& s_inv,
                    std::span<double> values, Execution exec) {
  std::fill(values.begin(), values.end(), 0.0);
  const int nt = static_cast<int>(plan.term_var_.size());
  if (exec == Execution::kSerial) {
    for (int a = 0; a < nt; ++a) {
      const int b = plan.term_block_[a];
      std::size_t p = plan.pair_offset_[a];
      for (int c = a; c < plan.term_offset_[b + 1]; ++c, ++p) {
        values[plan.pair_slot_[p]] += pair_value(plan, a, c, x[b], s_inv[b]);
      }
    }
    return;
  }
  std::vector<double> contrib(plan.pair_slot_.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (int a = 0; a < nt; ++a) {
    const int b = plan.term_block_[a];
    std::size_t p = plan.pair_offset_[a];
    for (int c = a; c < plan.term_offset_[b + 1]; ++c, ++p) contrib[p] = pair_value(plan, a, c, x[b], s_inv[b]);
  }
  const auto nslots = static_cast<std::int64_t>(plan.schur_size());
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < nslots; ++s) {
    const std::size_t begin = plan.slot_pair_offset_[s];
    const std::size_t end = plan.slot_pair_offset_[s + 1];
    if (begin == end) continue;
    double sum = 0.0;
    for (std::size_t k = begin; k < end; ++k) sum += contrib[plan.slot_pairs_[k]];
    values[s] = sum;
  }
}

namespace {

double block_step(const Eigen::MatrixXd& m, const Eigen::MatrixXd& dm) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (m.rows() == 1) {
    if (!(m(0, 0) > 0.0)) return 0.0;
    return dm(0, 0) < 0.0 ? -m(0, 0) / dm(0, 0) : kInf;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return 0.0;
  const auto& l = llt.matrixL();
  Eigen::MatrixXd scaled = l.solve(dm);
  scaled = l.solve(scaled.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
  const double lowest = eig.eigenvalues()(0);
  return lowest < 0.0 ? -1.0 / lowest : kInf;
}

double block_min_eig(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

}  // namespace

double max_step(const BlockMatrices& m, const BlockMatrices& dm, Execution exec) {
  const int nb = static_cast<int>(m.size());
  double alpha = std::numeric_limits<double>::infinity();
  if (exec == Execution::kParallel) {
#pragma omp parallel for reduction(min : alpha) schedule(dynamic, 64)
    for (int b = 0; b < nb; ++b) alpha = std::min(alpha, block_step(m[b], dm[b]));
  } else {
    for (int b = 0; b < nb; ++b) alpha = std::min(alpha, block_step(m[b], dm[b]));
  }
  return alpha;
}

double inner(const BlockMatrices& a, const BlockMatrices& b, Execution exec) {
  const int nb = static_cast<int>(a.size());
  std::vector<double> parts(nb);
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < nb; ++k) parts[k] = a[k].cwiseProduct(b[k]).sum();
  } else {
    for (int k = 0; k < nb; ++k) parts[k] = a[k].cwiseProduct(b[k]).sum();
  }
  double sum = 0.0;
  for (const double p : parts) sum += p;
  return sum;
}

double min_eigenvalue(const BlockMatrices& m, Execution exec) {
  const int nb = static_cast<int>(m.size());
  double lowest = std::numeric_limits<double>::infinity();
  if (exec == Execution::kParallel) {
#pragma omp parallel for reduction(min : lowest) schedule(dynamic, 64)
    for (int b = 0; b < nb; ++b) lowest = std::min(lowest, block_min_eig(m[b]));
  } else {
    for (int b = 0; b < nb; ++b) lowest = std::min(lowest, block_min_eig(m[b]));
  }
  return lowest;
}

}  // namespace kernels
}  // namespace nlos
