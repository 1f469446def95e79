#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

#include "nlos/conic_model.hpp"
#include "nlos/error.hpp"
#include "oracles.hpp"

namespace nlos {
namespace {

double min_eig(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

int count_blocks(const ConicProblem& p, int dim, const std::string& prefix) {
  return static_cast<int>(std::count_if(p.blocks().begin(), p.blocks().end(), [&](const PsdBlock& b) {
    return b.dim == dim && b.name.rfind(prefix, 0) == 0;
  }));
}

bool references_gamma(const ConicProblem& p, const EqualityConstraint& eq) {
  return std::any_of(eq.lhs.terms.begin(), eq.lhs.terms.end(),
                     [&](const LinearTerm& t) { return p.label(t.var).rfind("gamma[", 0) == 0; });
}

// Equality rows of the form "one variable = constant", keyed by label.
std::map<std::string, double> pinned(const ConicProblem& p) {
  std::map<std::string, double> out;
  for (const auto& eq : p.equalities()) {
    if (eq.lhs.terms.size() == 1 && eq.lhs.terms[0].coeff == 1.0) out[p.label(eq.lhs.terms[0].var)] = eq.rhs;
  }
  return out;
}

// Random instance: ids 1..n sensors, n+1..n+m anchors, all sensor-anchor and sensor-sensor edges.
struct Instance {
  int n = 0;
  AnchorMap anchors;
  std::vector<Point2> positions;  // indexed by id, entry 0 unused
  std::vector<DistanceBounds> bounds;
};

Instance random_instance(std::uint64_t seed, int n, int m, bool sensor_pairs = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> c(-20, 20), w(0, 1);
  Instance inst;
  inst.n = n;
  inst.positions.resize(n + m + 1);
  for (int k = 1; k <= n + m; ++k) inst.positions[k] = {c(rng), c(rng)};
  for (int a = n + 1; a <= n + m; ++a) inst.anchors[a] = inst.positions[a];
  for (int i = 1; i <= n; ++i) {
    for (int j = i + 1; j <= n + m; ++j) {
      if (!sensor_pairs && j <= n) continue;
      const double r = distance(inst.positions[i], inst.positions[j]);
      const double lo = std::max(0.0, r - w(rng)), hi = r + w(rng);
      inst.bounds.push_back({i, j, lo, hi, true});
    }
  }
  return inst;
}

std::map<NodeId, Point2> as_map(const std::vector<Point2>& positions) {
  std::map<NodeId, Point2> out;
  for (std::size_t k = 1; k < positions.size(); ++k) out[static_cast<NodeId>(k)] = positions[k];
  return out;
}

TEST(EdgeObjectiveTerm, PaperLiteral) {
  const auto c = edge_objective_term({1, 2, 2, 4, true}, 1.0, CoefficientMode::kPaperLiteral);
  EXPECT_DOUBLE_EQ(c.gamma, 1.0);
  EXPECT_DOUBLE_EQ(c.g, -12.0);
}

TEST(EdgeObjectiveTerm, MidpointMinimizerIsMidpoint) {
  const auto c = edge_objective_term({1, 2, 2, 4, true}, 1.0, CoefficientMode::kMidpointConsistent);
  EXPECT_DOUBLE_EQ(c.gamma, 1.0);
  EXPECT_DOUBLE_EQ(c.g, -6.0);
  EXPECT_DOUBLE_EQ(-c.g / (2 * c.gamma), 3.0);
}

TEST(EdgeObjectiveTerm, ZeroWidthAtZero) {
  for (auto mode : {CoefficientMode::kPaperLiteral, CoefficientMode::kMidpointConsistent}) {
    const auto c = edge_objective_term({1, 2, 0, 0, true}, 1.0, mode);
    EXPECT_DOUBLE_EQ(c.gamma, 1.0);
    EXPECT_DOUBLE_EQ(c.g, 0.0);
  }
}

TEST(EdgeObjectiveTerm, ScalesWithWeight) {
  const auto c = edge_objective_term({1, 2, 2, 4, true}, 2.5, CoefficientMode::kMidpointConsistent);
  EXPECT_DOUBLE_EQ(c.gamma, 2.5);
  EXPECT_DOUBLE_EQ(c.g, -15.0);
}

TEST(EpigraphBlock, Examples) {
  const PsdBlock b = epigraph_block(0, 1);
  ASSERT_EQ(b.dim, 2);
  const std::vector<double> eq{9, 3}, bad{8, 3}, slack{10, 3};
  const Eigen::MatrixXd m = b.evaluate(eq);
  EXPECT_DOUBLE_EQ(m(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(m(1, 1), 9.0);
  EXPECT_NEAR(min_eig(m), 0.0, 1e-12);
  EXPECT_NEAR(b.evaluate(bad).determinant(), -1.0, 1e-12);
  EXPECT_LT(min_eig(b.evaluate(bad)), 0.0);
  EXPECT_GT(min_eig(b.evaluate(slack)), 0.0);
}

TEST(BuildFullSdp, SmallCounts) {
  const AnchorMap anchors{{2, {0, 0}}, {3, {10, 0}}};
  const std::vector<DistanceBounds> bounds{{1, 2, 4, 6, true}, {1, 3, 7, 8, true}};
  const ConicProblem p = build_fullsdp(bounds, anchors, 1);
  EXPECT_EQ(count_blocks(p, 5, "Z"), 1);
  EXPECT_EQ(count_blocks(p, 2, "epi["), 2);
  EXPECT_EQ(count_blocks(p, 1, "gpos["), 2);
  EXPECT_EQ(p.blocks().size(), 5u);
  EXPECT_EQ(std::count_if(p.equalities().begin(), p.equalities().end(),
                          [&](const EqualityConstraint& e) { return references_gamma(p, e); }),
            2);
}

TEST(BuildFullSdp, PinsAnchorPart) {
  const AnchorMap anchors{{2, {0, 0}}, {3, {10, 0}}};
  const ConicProblem p = build_fullsdp({{1, 2, 4, 6, true}, {1, 3, 7, 8, true}}, anchors, 1);
  const auto pins = pinned(p);
  // Identity corner.
  EXPECT_EQ(pins.at("Z[0,0]"), 1.0);
  EXPECT_EQ(pins.at("Z[0,1]"), 0.0);
  EXPECT_EQ(pins.at("Z[1,1]"), 1.0);
  // Anchor columns of X.
  EXPECT_EQ(pins.at("Z[0,3]"), 0.0);
  EXPECT_EQ(pins.at("Z[1,3]"), 0.0);
  EXPECT_EQ(pins.at("Z[0,4]"), 10.0);
  EXPECT_EQ(pins.at("Z[1,4]"), 0.0);
  // Anchor-anchor Y entries.
  EXPECT_EQ(pins.at("Z[3,3]"), 0.0);
  EXPECT_EQ(pins.at("Z[3,4]"), 0.0);
  EXPECT_EQ(pins.at("Z[4,4]"), 100.0);
  // The sensor column stays free.
  EXPECT_FALSE(pins.count("Z[0,2]"));
  EXPECT_FALSE(pins.count("Z[2,2]"));
}

TEST(BuildFullSdp, RejectsBadIds) {
  const AnchorMap anchors{{2, {0, 0}}, {3, {10, 0}}};
  EXPECT_THROW(build_fullsdp({{1, 7, 4, 6, true}}, anchors, 1), InvalidInput);
  EXPECT_THROW(build_fullsdp({{2, 3, 4, 6, true}}, anchors, 1), InvalidInput);
  EXPECT_THROW(build_fullsdp({}, anchors, 1), InvalidInput);
  EXPECT_THROW(build_fullsdp({{1, 2, 4, 6, true}}, AnchorMap{{5, {0, 0}}}, 1), InvalidInput);
}

TEST(BuildEsdp, SmallBlocksShareSensorVariables) {
  const AnchorMap anchors{{2, {0, 0}}, {3, {10, 0}}};
  const ConicProblem p = build_esdp({{1, 2, 4, 6, true}, {1, 3, 7, 8, true}}, anchors, 1);
  std::vector<const PsdBlock*> zblocks;
  for (const auto& b : p.blocks()) {
    if (b.name.rfind("Z(", 0) == 0) zblocks.push_back(&b);
  }
  ASSERT_EQ(zblocks.size(), 2u);
  auto vars_of = [](const PsdBlock& b) {
    std::set<VarIndex> s;
    for (const auto& e : b.entries) {
      for (const auto& t : e.value.terms) s.insert(t.var);
    }
    return s;
  };
  for (const auto* b : zblocks) EXPECT_EQ(b->dim, 4);
  const auto a = vars_of(*zblocks[0]), b = vars_of(*zblocks[1]);
  for (const char* label : {"Z[0,2]", "Z[1,2]", "Z[2,2]"}) {
    EXPECT_TRUE(a.count(p.at(label))) << label;
    EXPECT_TRUE(b.count(p.at(label))) << label;
  }
}

TEST(BuildEsdp, PaperScaleBlockCount) {
  const Instance inst = random_instance(5, 80, 18);
  ASSERT_EQ(inst.bounds.size(), 4600u);
  const ConicProblem p = build_esdp(inst.bounds, inst.anchors, 80);
  EXPECT_EQ(count_blocks(p, 4, "Z("), 4600);
  EXPECT_EQ(count_blocks(p, 2, "epi["), 4600);
}

TEST(BuildEsdp, SameVariablesAsFullSdp) {
  const Instance inst = random_instance(9, 4, 3);
  EXPECT_EQ(build_esdp(inst.bounds, inst.anchors, 4).labels(), build_fullsdp(inst.bounds, inst.anchors, 4).labels());
  std::vector<AnchorPrior> priors;
  for (const auto& [a, p] : inst.anchors) priors.push_back({a, p, 0.5, false});
  EXPECT_EQ(build_esdp_anchor_uncertain(inst.bounds, priors, 4).labels(),
            build_fullsdp_anchor_uncertain(inst.bounds, priors, 4).labels());
}

TEST(BuildUncertain, PriorObjectiveContribution) {
  // One sensor, one anchor prior at (3,4). Lift a configuration with the anchor at its estimate.
  const std::vector<AnchorPrior> priors{{2, {3, 4}, 1.0, false}};
  const std::vector<DistanceBounds> bounds{{1, 2, 5, 5, true}};
  const ConicProblem p = build_fullsdp_anchor_uncertain(bounds, priors, 1);
  const std::vector<Point2> pos{{0, 0}, {0, 0}, {3, 4}};
  const auto values = lift_configuration(p, pos);
  const double edges = oracle::placement_objective(bounds, as_map(pos), false);
  EXPECT_NEAR(p.objective_value(values) - edges, -25.0, 1e-12);
}

TEST(BuildUncertain, AnchorColumnsBecomeFree) {
  const Instance inst = random_instance(2, 1, 3);
  std::vector<AnchorPrior> priors;
  for (const auto& [a, p] : inst.anchors) priors.push_back({a, p, 0.5, false});
  const ConicProblem known = build_fullsdp(inst.bounds, inst.anchors, 1);
  const ConicProblem loose = build_fullsdp_anchor_uncertain(inst.bounds, priors, 1);
  EXPECT_EQ(count_blocks(loose, 6, "Z"), 1);
  auto x_pins = [](const ConicProblem& p) {
    int k = 0;
    for (const auto& [label, v] : pinned(p)) {
      int r = 0, c = 0;
      if (std::sscanf(label.c_str(), "Z[%d,%d]", &r, &c) == 2 && r <= 1 && c >= 3) ++k;
    }
    return k;
  };
  EXPECT_EQ(x_pins(known), 6);
  EXPECT_EQ(x_pins(loose), 0);
  EXPECT_EQ(pinned(loose).count("Z[0,0]") + pinned(loose).count("Z[0,1]") + pinned(loose).count("Z[1,1]"), 3u);
}

TEST(BuildUncertain, EsdpSmallCounts) {
  const std::vector<AnchorPrior> priors{{2, {0, 0}, 0.5, false}, {3, {10, 0}, 0.5, false}};
  const ConicProblem p = build_esdp_anchor_uncertain({{1, 2, 4, 6, true}, {1, 3, 7, 8, true}}, priors, 1);
  EXPECT_EQ(count_blocks(p, 4, "Z("), 2);
  const auto pins = pinned(p);
  EXPECT_EQ(pins.at("Z[0,0]"), 1.0);
  EXPECT_EQ(pins.at("Z[0,1]"), 0.0);
  EXPECT_EQ(pins.at("Z[1,1]"), 1.0);
}

TEST(BuildUncertain, BallConstraints) {
  const std::vector<DistanceBounds> bounds{{1, 2, 4, 6, true}, {1, 3, 7, 8, true}};
  const std::vector<AnchorPrior> zero{{2, {0, 0}, 0.0, true}, {3, {10, 0}, 0.0, true}};
  const auto pins = pinned(build_fullsdp_anchor_uncertain(bounds, zero, 1));
  EXPECT_EQ(pins.at("Z[0,4]"), 10.0);
  EXPECT_EQ(pins.at("Z[4,4]"), 100.0);
  const std::vector<AnchorPrior> wide{{2, {0, 0}, 0.5, true}, {3, {10, 0}, 0.5, true}};
  const ConicProblem p = build_fullsdp_anchor_uncertain(bounds, wide, 1);
  EXPECT_EQ(count_blocks(p, 1, "ball["), 2);
  // Anchor 3 displaced by 0.4 is inside its ball; by 0.6 it is not.
  const auto inside = lift_configuration(p, std::vector<Point2>{{0, 0}, {3, 3}, {0, 0}, {10.4, 0}});
  const auto outside = lift_configuration(p, std::vector<Point2>{{0, 0}, {3, 3}, {0, 0}, {10.6, 0}});
  for (const auto& b : p.blocks()) {
    if (b.name == "ball[3]") {
      EXPECT_NEAR(b.evaluate(inside)(0, 0), 0.25 - 0.16, 1e-9);
      EXPECT_NEAR(b.evaluate(outside)(0, 0), 0.25 - 0.36, 1e-9);
    }
  }
}

TEST(BuildUncertain, RejectsMissingPrior) {
  const std::vector<AnchorPrior> priors{{2, {0, 0}, 0.5, false}};
  EXPECT_THROW(build_fullsdp_anchor_uncertain({{1, 2, 4, 6, true}, {1, 3, 7, 8, true}}, priors, 1), InvalidInput);
  EXPECT_THROW(build_fullsdp_anchor_uncertain({{1, 2, 4, 6, true}}, {{2, {0, 0}, -1.0, false}}, 1), InvalidInput);
}

TEST(ObjectiveConsistency, LiftedConfigurationMatchesDirectSum) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Instance inst = random_instance(seed, 5, 4);
    for (auto mode : {CoefficientMode::kPaperLiteral, CoefficientMode::kMidpointConsistent}) {
      ModelOptions opt;
      opt.mode = mode;
      const double want = oracle::placement_objective(inst.bounds, as_map(inst.positions),
                                                      mode == CoefficientMode::kPaperLiteral);
      for (const ConicProblem& p : {build_fullsdp(inst.bounds, inst.anchors, 5, opt),
                                    build_esdp(inst.bounds, inst.anchors, 5, opt)}) {
        const auto values = lift_configuration(p, inst.positions);
        EXPECT_NEAR(p.objective_value(values), want, 1e-9 * (1 + std::abs(want)));
        EXPECT_NEAR(nonconvex_objective(inst.bounds, inst.positions, opt), want, 1e-9 * (1 + std::abs(want)));
      }
    }
  }
}

TEST(ObjectiveConsistency, LiftedConfigurationIsFeasible) {
  const Instance inst = random_instance(4, 5, 4);
  std::vector<AnchorPrior> priors;
  for (const auto& [a, p] : inst.anchors) priors.push_back({a, p, 0.0, true});
  for (const ConicProblem& p :
       {build_fullsdp(inst.bounds, inst.anchors, 5), build_esdp(inst.bounds, inst.anchors, 5),
        build_fullsdp_anchor_uncertain(inst.bounds, priors, 5), build_esdp_anchor_uncertain(inst.bounds, priors, 5)}) {
    const auto values = lift_configuration(p, inst.positions);
    for (const auto& eq : p.equalities()) {
      EXPECT_NEAR(eq.lhs.evaluate(values), eq.rhs, 1e-9 * (1 + std::abs(eq.rhs)));
    }
    for (const auto& b : p.blocks()) {
      const Eigen::MatrixXd m = b.evaluate(values);
      EXPECT_GE(min_eig(m), -1e-9 * (1 + m.norm())) << b.name;
    }
  }
}

TEST(GammaRows, ReferenceOnlyOwnPair) {
  const Instance inst = random_instance(6, 4, 3);
  const ConicProblem p = build_fullsdp(inst.bounds, inst.anchors, 4);
  int rows = 0;
  for (const auto& eq : p.equalities()) {
    if (!references_gamma(p, eq)) continue;
    ++rows;
    int i = 0, j = 0;
    for (const auto& t : eq.lhs.terms) {
      if (std::sscanf(p.label(t.var).c_str(), "gamma[%d,%d]", &i, &j) == 2) break;
    }
    const std::set<int> allowed{0, 1, z_index(i), z_index(j)};
    for (const auto& t : eq.lhs.terms) {
      int r = 0, c = 0;
      if (std::sscanf(p.label(t.var).c_str(), "Z[%d,%d]", &r, &c) == 2) {
        EXPECT_TRUE(allowed.count(r) && allowed.count(c)) << p.label(t.var) << " in row for " << i << "," << j;
      }
    }
  }
  EXPECT_EQ(rows, static_cast<int>(inst.bounds.size()));
}

TEST(GammaRows, EachGammaAndGInExactlyOneEpigraph) {
  const Instance inst = random_instance(7, 3, 3);
  const ConicProblem p = build_esdp(inst.bounds, inst.anchors, 3);
  std::map<VarIndex, int> hits;
  for (const auto& b : p.blocks()) {
    if (b.name.rfind("epi[", 0) != 0) continue;
    std::set<VarIndex> vars;
    for (const auto& e : b.entries) {
      for (const auto& t : e.value.terms) vars.insert(t.var);
    }
    for (VarIndex v : vars) ++hits[v];
  }
  for (VarIndex v = 0; v < p.num_vars(); ++v) {
    const std::string& l = p.label(v);
    if (l.rfind("gamma[", 0) == 0 || l.rfind("g[", 0) == 0) EXPECT_EQ(hits[v], 1) << l;
  }
}

TEST(Serialization, ByteIdenticalRoundTrip) {
  const Instance inst = random_instance(8, 3, 3);
  std::vector<AnchorPrior> priors;
  for (const auto& [a, p] : inst.anchors) priors.push_back({a, p, 0.3, true});
  for (const ConicProblem& p :
       {build_fullsdp(inst.bounds, inst.anchors, 3), build_esdp_anchor_uncertain(inst.bounds, priors, 3)}) {
    const std::string text = serialize(p);
    const ConicProblem back = deserialize(text);
    EXPECT_EQ(serialize(back), text);
    EXPECT_EQ(back.labels(), p.labels());
  }
}

TEST(Serialization, RejectsGarbage) {
  EXPECT_THROW(deserialize("{}"), InvalidInput);
  EXPECT_THROW(deserialize("not json"), InvalidInput);
}

TEST(CoefficientMode, Strings) {
  EXPECT_EQ(coefficient_mode_from_string("paper"), CoefficientMode::kPaperLiteral);
  EXPECT_EQ(coefficient_mode_from_string("midpoint-consistent"), CoefficientMode::kMidpointConsistent);
  EXPECT_STREQ(to_string(CoefficientMode::kPaperLiteral), "paper-literal");
  EXPECT_THROW(coefficient_mode_from_string("other"), InvalidInput);
}

}  // namespace
}  // namespace nlos
