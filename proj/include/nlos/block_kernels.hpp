#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <span>
#include <vector>

#include "nlos/presolve.hpp"

namespace nlos {

enum class Execution { kSerial, kParallel };

using BlockMatrices = std::vector<Eigen::MatrixXd>;

// Index structures over a set of reduced blocks, built once per solve.
//
// The parallel kernels compute per-(block, term) and per-(block, term pair)
// contributions independently and then sum each output slot over its
// contributions in block order, which is exactly the order the serial
// kernels accumulate in. Both paths therefore produce bitwise-identical results.
class KernelPlan {
 public:
  KernelPlan(std::span<const ReducedBlock> blocks, int num_vars);

  int num_vars() const { return num_vars_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  std::span<const ReducedBlock> blocks() const { return blocks_; }

  // Schur complement storage: lower triangle, either dense column-major (N*N) or the
  // value array of `sparse_pattern()`.
  bool dense_schur() const { return dense_; }
  std::size_t schur_size() const { return dense_ ? static_cast<std::size_t>(num_vars_) * num_vars_ : nnz_; }
  const Eigen::SparseMatrix<double>& sparse_pattern() const { return pattern_; }
  std::span<const int> diagonal_slots() const { return diag_slots_; }

  struct FullEntry {
    int row;
    int col;
    double value;
  };

  std::span<const ReducedBlock> blocks_;
  int num_vars_;

  // Terms flattened across blocks, entries expanded to both triangles.
  std::vector<int> term_offset_;  // per block, size B+1
  std::vector<int> term_var_;
  std::vector<int> term_block_;
  std::vector<int> entry_offset_;  // per global term, size T+1
  std::vector<FullEntry> entries_;
  // var -> global term ids in block order
  std::vector<int> var_term_offset_;
  std::vector<int> var_terms_;

  // Schur pairs (a <= c within a block), flattened; one work item per (block, a).
  bool dense_ = false;
  std::size_t nnz_ = 0;
  Eigen::SparseMatrix<double> pattern_;
  std::vector<std::size_t> pair_offset_;  // per global term a: first pair index of row a
  std::vector<std::size_t> pair_slot_;
  std::vector<std::size_t> slot_pair_offset_;  // slot -> pair ids in block order
  std::vector<std::size_t> slot_pairs_;
  std::vector<int> diag_slots_;
};

namespace kernels {

// F0 + sum w_k F_k per block (or without F0).
BlockMatrices apply(const KernelPlan& plan, const Eigen::VectorXd& w, bool with_constant, Execution exec);

// (<F_k, M>)_k summed over blocks.
Eigen::VectorXd adjoint(const KernelPlan& plan, const BlockMatrices& mats, Execution exec);

// Lower triangle of M_kl = sum_b tr(F_k X F_l S^{-1}) into `values` (sized plan.schur_size()).
void assemble_schur(const KernelPlan& plan, const BlockMatrices& x, const BlockMatrices& s_inv,
                    std::span<double> values, Execution exec);

// Largest alpha with M + alpha dM >= 0 in every block (infinity if unbounded, 0 if M is not PD).
double max_step(const BlockMatrices& m, const BlockMatrices& dm, Execution exec);

// Sum over blocks of <A_b, B_b>, accumulated in block order.
double inner(const BlockMatrices& a, const BlockMatrices& b, Execution exec);

// Smallest eigenvalue over all blocks.
double min_eigenvalue(const BlockMatrices& m, Execution exec);

}  // namespace kernels
}  // namespace nlos
