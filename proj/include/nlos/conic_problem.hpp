#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nlos {

using VarIndex = int;

struct LinearTerm {
  VarIndex var = 0;
  double coeff = 0.0;
  friend bool operator==(const LinearTerm&, const LinearTerm&) = default;
};

// constant + sum(coeff * v[var])
struct AffineExpr {
  double constant = 0.0;
  std::vector<LinearTerm> terms;

  AffineExpr() = default;
  explicit AffineExpr(double c) : constant(c) {}
  static AffineExpr variable(VarIndex v, double coeff = 1.0) {
    AffineExpr e;
    e.terms.push_back({v, coeff});
    return e;
  }

  AffineExpr& add(VarIndex v, double coeff) {
    terms.push_back({v, coeff});
    return *this;
  }
  AffineExpr& add(const AffineExpr& other, double scale = 1.0);

  // Sorts terms by variable, merges duplicates and drops exact zeros.
  void normalize();
  bool is_constant() const { return terms.empty(); }
  double evaluate(std::span<const double> values) const;

  friend bool operator==(const AffineExpr&, const AffineExpr&) = default;
};

// lhs == rhs, lhs carries no constant part.
struct EqualityConstraint {
  AffineExpr lhs;
  double rhs = 0.0;
};

struct BlockEntry {
  int row = 0;  // row <= col
  int col = 0;
  AffineExpr value;
};

// Symmetric matrix affine in the scalar variables; unlisted entries are zero.
struct PsdBlock {
  std::string name;
  int dim = 0;
  std::vector<BlockEntry> entries;

  void set(int row, int col, AffineExpr value);
  Eigen::MatrixXd evaluate(std::span<const double> values) const;
};

// Linear objective, affine equalities and PSD block constraints over scalar variables.
class ConicProblem {
 public:
  VarIndex add_variable(std::string label);
  int num_vars() const { return static_cast<int>(labels_.size()); }
  const std::string& label(VarIndex v) const { return labels_.at(v); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<VarIndex> find(const std::string& label) const;
  VarIndex at(const std::string& label) const;

  AffineExpr& objective() { return objective_; }
  const AffineExpr& objective() const { return objective_; }

  void add_equality(AffineExpr lhs, double rhs);
  void add_block(PsdBlock block);
  const std::vector<EqualityConstraint>& equalities() const { return equalities_; }
  const std::vector<PsdBlock>& blocks() const { return blocks_; }

  // Throws InvalidInput if any expression references an undeclared variable or
  // a block entry is out of range.
  void validate() const;

  double objective_value(std::span<const double> values) const { return objective_.evaluate(values); }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, VarIndex> index_;
  AffineExpr objective_;
  std::vector<EqualityConstraint> equalities_;
  std::vector<PsdBlock> blocks_;
};

// Structured text (JSON) with a fixed field order:
// {"format", "num_vars", "labels", "objective", "equalities", "psd_blocks"}.
// Affine expressions are {"constant": c, "terms": [[var, coeff], ...]}.
std::string serialize(const ConicProblem& problem);
ConicProblem deserialize(const std::string& text);

}  // namespace nlos
