#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "nlos/conic_problem.hpp"

namespace nlos {

struct SymEntry {
  int row = 0;  // row <= col
  int col = 0;
  double value = 0.0;
};

// Coefficient matrix of one reduced variable inside one block.
struct BlockTerm {
  int var = 0;
  std::vector<SymEntry> entries;
};

// constant + sum(w[var] * term) >= 0
struct ReducedBlock {
  int source = 0;  // index of the originating ConicProblem block
  Eigen::MatrixXd constant;
  std::vector<BlockTerm> terms;  // sorted by var

  int dim() const { return static_cast<int>(constant.rows()); }
};

// min cost'w + cost_constant  s.t.  every ReducedBlock >= 0.
// Original variables are recovered as offset + expansion * w.
struct ReducedProblem {
  enum class Status { kOk, kInfeasible, kUnbounded };

  Status status = Status::kOk;
  std::string message;
  int num_vars = 0;
  Eigen::VectorXd cost;
  double cost_constant = 0.0;
  std::vector<ReducedBlock> blocks;
  Eigen::VectorXd offset;
  Eigen::SparseMatrix<double> expansion;
  // True when some block was restricted to a proper face of its cone; the reduced
  // block duals then no longer map one-to-one onto the original blocks.
  bool faces_reduced = false;
  std::vector<int> dependent_equalities;
  std::vector<std::string> warnings;

  Eigen::VectorXd expand(const Eigen::VectorXd& w) const { return offset + expansion * w; }
};

// Eliminates the affine equalities by substitution, then repeatedly restricts every
// block whose fully fixed principal submatrix is singular to the face spanned by
// that submatrix's range (adding the implied equalities), until no block changes.
ReducedProblem presolve(const ConicProblem& problem);

}  // namespace nlos
