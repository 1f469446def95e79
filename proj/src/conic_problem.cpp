#include "nlos/conic_problem.hpp"

#include <algorithm>
#include "json.hpp"

#include "nlos/error.hpp"

namespace nlos {

AffineExpr& AffineExpr::add(const AffineExpr& other, double scale) {
  constant += scale * other.constant;
  for (const auto& t : other.terms) terms.push_back({t.var, scale * t.coeff});
  return *this;
}

void AffineExpr::normalize() {
  std::sort(terms.begin(), terms.end(), [](const LinearTerm& a, const LinearTerm& b) { return a.var < b.var; });
  std::vector<LinearTerm> merged;
  merged.reserve(terms.size());
  for (const auto& t : terms) {
    if (!merged.empty() && merged.back().var == t.var) {
      merged.back().coeff += t.coeff;
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const LinearTerm& t) { return t.coeff == 0.0; });
  terms = std::move(merged);
}

double AffineExpr::evaluate(std::span<const double> values) const {
  double sum = constant;
  for (const auto& t : terms) sum += t.coeff * values[t.var];
  return sum;
}

void PsdBlock::set(int row, int col, AffineExpr value) {
  if (row > col) std::swap(row, col);
  value.normalize();
  for (auto& e : entries) {
    if (e.row == row && e.col == col) {
      e.value = std::move(value);
      return;
    }
  }
  entries.push_back({row, col, std::move(value)});
}

Eigen::MatrixXd PsdBlock::evaluate(std::span<const double> values) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& e : entries) {
    const double v = e.value.evaluate(values);
    m(e.row, e.col) = v;
    m(e.col, e.row) = v;
  }
  return m;
}

VarIndex ConicProblem::add_variable(std::string label) {
  const VarIndex v = num_vars();
  if (!index_.emplace(label, v).second) throw InvalidInput("duplicate variable label " + label);
  labels_.push_back(std::move(label));
  return v;
}

std::optional<VarIndex> ConicProblem::find(const std::string& label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

VarIndex ConicProblem::at(const std::string& label) const {
  const auto v = find(label);
  if (!v) throw InvalidInput("no variable labelled " + label);
  return *v;
}

void ConicProblem::add_equality(AffineExpr lhs, double rhs) {
  rhs -= lhs.constant;
  lhs.constant = 0.0;
  lhs.normalize();
  equalities_.push_back({std::move(lhs), rhs});
}

void ConicProblem::add_block(PsdBlock block) {
  for (auto& e : block.entries) {
    if (e.row > e.col) std::swap(e.row, e.col);
    e.value.normalize();
  }
  std::sort(block.entries.begin(), block.entries.end(),
            [](const BlockEntry& a, const BlockEntry& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  blocks_.push_back(std::move(block));
}

void ConicProblem::validate() const {
  const auto check = [&](const AffineExpr& e, const std::string& where) {
    for (const auto& t : e.terms) {
      if (t.var < 0 || t.var >= num_vars()) {
        throw InvalidInput(where + " references undeclared variable " + std::to_string(t.var));
      }
      if (!std::isfinite(t.coeff)) throw InvalidInput(where + " has a non-finite coefficient");
    }
    if (!std::isfinite(e.constant)) throw InvalidInput(where + " has a non-finite constant");
  };
  check(objective_, "objective");
  for (std::size_t i = 0; i < equalities_.size(); ++i) check(equalities_[i].lhs, "equality " + std::to_string(i));
  for (const auto& b : blocks_) {
    if (b.dim <= 0) throw InvalidInput("block " + b.name + " has nonpositive dimension");
    for (const auto& e : b.entries) {
      if (e.row < 0 || e.col >= b.dim || e.row > e.col) throw InvalidInput("block " + b.name + " entry out of range");
      check(e.value, "block " + b.name);
    }
  }
}

namespace {

using ojson = nlohmann::ordered_json;

ojson to_json(const AffineExpr& e) {
  ojson terms = ojson::array();
  for (const auto& t : e.terms) terms.push_back(ojson::array({t.var, t.coeff}));
  ojson out;
  out["constant"] = e.constant;
  out["terms"] = std::move(terms);
  return out;
}

AffineExpr affine_from_json(const ojson& j) {
  AffineExpr e(j.at("constant").get<double>());
  for (const auto& t : j.at("terms")) e.terms.push_back({t.at(0).get<VarIndex>(), t.at(1).get<double>()});
  return e;
}

}  // namespace

std::string serialize(const ConicProblem& problem) {
  ojson root;
  root["format"] = "nlos-conic-problem/1";
  root["num_vars"] = problem.num_vars();
  root["labels"] = problem.labels();
  root["objective"] = to_json(problem.objective());
  ojson eqs = ojson::array();
  for (const auto& eq : problem.equalities()) {
    ojson row;
    row["lhs"] = to_json(eq.lhs);
    row["rhs"] = eq.rhs;
    eqs.push_back(std::move(row));
  }
  root["equalities"] = std::move(eqs);
  ojson blocks = ojson::array();
  for (const auto& b : problem.blocks()) {
    ojson block;
    block["name"] = b.name;
    block["dim"] = b.dim;
    ojson entries = ojson::array();
    for (const auto& e : b.entries) {
      ojson entry;
      entry["row"] = e.row;
      entry["col"] = e.col;
      entry["value"] = to_json(e.value);
      entries.push_back(std::move(entry));
    }
    block["entries"] = std::move(entries);
    blocks.push_back(std::move(block));
  }
  root["psd_blocks"] = std::move(blocks);
  return root.dump(1) + "\n";
}

ConicProblem deserialize(const std::string& text) {
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw InvalidInput(std::string("malformed conic problem: ") + e.what());
  }
  try {
    if (root.at("format") != "nlos-conic-problem/1") throw InvalidInput("unsupported conic problem format");
    ConicProblem p;
    for (const auto& label : root.at("labels")) p.add_variable(label.get<std::string>());
    if (p.num_vars() != root.at("num_vars").get<int>()) throw InvalidInput("num_vars does not match labels");
    p.objective() = affine_from_json(root.at("objective"));
    for (const auto& row : root.at("equalities")) {
      p.add_equality(affine_from_json(row.at("lhs")), row.at("rhs").get<double>());
    }
    for (const auto& jb : root.at("psd_blocks")) {
      PsdBlock b;
      b.name = jb.at("name").get<std::string>();
      b.dim = jb.at("dim").get<int>();
      for (const auto& je : jb.at("entries")) {
        b.entries.push_back({je.at("row").get<int>(), je.at("col").get<int>(), affine_from_json(je.at("value"))});
      }
      p.add_block(std::move(b));
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed conic problem: ") + e.what());
  }
}

}  // namespace nlos
