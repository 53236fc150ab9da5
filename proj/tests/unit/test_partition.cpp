#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <advplace/error.hpp>
#include <advplace/partition.hpp>

using namespace advplace;

namespace {
const Domain kUnit{0, 1, 0, 1};
}

TEST(BuildPartition, CountsAndMeasures) {
  const auto one = build_partition(kUnit, 1, 1);
  EXPECT_EQ(one.size(), 1u);
  EXPECT_EQ(one.cell_measure(), 1.0);

  const auto ten = build_partition(kUnit, 10, 10);
  EXPECT_EQ(ten.size(), 100u);
  EXPECT_DOUBLE_EQ(ten.cell_measure(), 0.01);

  const auto room = build_partition(Domain{0, 1.52, 0, 1.68}, 38, 42);
  EXPECT_NEAR(room.cell_measure(), 0.0016, 1e-15);

  EXPECT_THROW(build_partition(kUnit, 0, 3), InputError);
  EXPECT_THROW(build_partition(kUnit, 3, 0), InputError);
}

TEST(BuildPartition, SingletonMeasuresSumToDomain) {
  const auto p = build_partition(kUnit, 8, 4);
  double total = 0;
  for (std::size_t c = 0; c < p.size(); ++c) total += measure(CellSet(p, {c}));
  EXPECT_DOUBLE_EQ(total, 1.0);
}

TEST(Locate, ConventionsAtCornersEdgesAndOutside) {
  const auto p = build_partition(kUnit, 10, 10);
  EXPECT_EQ(p.locate({0, 0}), 0u);
  EXPECT_EQ(p.locate({1, 1}), 99u);
  // Shared edge x = 0.3 belongs to the right cell, y = 0.5 to the upper cell.
  EXPECT_EQ(p.locate({0.3, 0.05}), 3u);
  EXPECT_EQ(p.locate({0.05, 0.5}), 50u);
  EXPECT_FALSE(p.locate({1.0001, 0.5}));
  EXPECT_FALSE(p.locate({0.5, -1e-12}));
}

TEST(Locate, CentersMapBackToTheirCells) {
  const auto p = build_partition(Domain{-1.3, 2.9, 0.1, 0.7}, 37, 11);
  for (std::size_t c = 0; c < p.size(); ++c) EXPECT_EQ(p.locate(p.center(c)), c);
}

TEST(Locate, EdgesAreConsistentWithEdgeFunctions) {
  const auto p = build_partition(Domain{-1, 1, -1, 1}, 50, 50);
  for (std::size_t k = 1; k < 50; ++k) {
    const auto c = p.locate({p.edge_x(k), 0.01});
    ASSERT_TRUE(c);
    EXPECT_EQ(p.column(*c), k);
  }
}

TEST(RectToCellSet, FullDomainSingletonAndEmpty) {
  const auto p = build_partition(kUnit, 10, 10);
  EXPECT_EQ(rect_to_cellset(p, kUnit).size(), 100u);

  const auto one = rect_to_cellset(p, Domain{0.14, 0.16, 0.24, 0.26});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.indices()[0], p.index(1, 2));

  try {
    rect_to_cellset(p, Domain{0.16, 0.24, 0.16, 0.24});
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("empty actuation set"), std::string::npos);
  }
  EXPECT_THROW(rect_to_cellset(p, Domain{2, 3, 2, 3}), InputError);
}

TEST(CellSet, SortsDeduplicatesAndValidates) {
  const auto p = build_partition(kUnit, 3, 3);
  const CellSet s(p, {5, 1, 5, 3});
  EXPECT_EQ(s.indices(), (std::vector<std::size_t>{1, 3, 5}));
  EXPECT_EQ(s.anchor(), 1u);
  EXPECT_TRUE(s.contains(3));
  EXPECT_FALSE(s.contains(4));
  EXPECT_THROW(CellSet(p, {9}), InputError);
}

TEST(CellSet, Algebra) {
  const auto p = build_partition(kUnit, 4, 1);
  const CellSet a(p, {0, 1}), b(p, {1, 2});
  EXPECT_EQ(set_union(a, b).indices(), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(set_intersection(a, b).indices(), (std::vector<std::size_t>{1}));
  EXPECT_EQ(set_difference(a, b).indices(), (std::vector<std::size_t>{0}));
  const auto q = build_partition(kUnit, 2, 2);
  EXPECT_THROW(set_union(a, CellSet(q, {0})), InputError);
}

TEST(CellSet, JsonForms) {
  const auto p = build_partition(kUnit, 10, 10);
  const auto r = cellset_from_json(p, nlohmann::json::parse(R"({"rect": [0, 0, 0.2, 0.1]})"));
  EXPECT_EQ(r.indices(), (std::vector<std::size_t>{0, 1}));
  const auto c = cellset_from_json(p, nlohmann::json::parse(R"({"cells": [7, 3]})"));
  EXPECT_EQ(c.indices(), (std::vector<std::size_t>{3, 7}));
  EXPECT_EQ(cellset_from_json(p, cellset_to_json(c)), c);
  EXPECT_THROW(cellset_from_json(p, nlohmann::json::parse(R"({"cells": [-1]})")), InputError);
  EXPECT_THROW(cellset_from_json(p, nlohmann::json::parse(R"({"rect": [0, 0]})")), InputError);
  EXPECT_THROW(cellset_from_json(p, nlohmann::json::parse(R"({"box": 1})")), InputError);
}

TEST(Indicator, Examples) {
  const auto p = build_partition(kUnit, 2, 1);
  EXPECT_EQ(indicator(CellSet(p)).values(), Eigen::Vector2d(0, 0));
  EXPECT_EQ(indicator(CellSet::all(p)).values(), Eigen::Vector2d(1, 1));
  EXPECT_EQ(indicator(CellSet(p, {0})).values(), Eigen::Vector2d(1, 0));
}

TEST(Indicator, DisjointUnionIsSum) {
  const auto p = build_partition(kUnit, 5, 5);
  const CellSet a(p, {0, 4, 12}), b(p, {3, 20});
  EXPECT_EQ(indicator(set_union(a, b)).values(), indicator(a).values() + indicator(b).values());
}

TEST(Measure, Examples) {
  const auto p = build_partition(kUnit, 10, 10);
  EXPECT_EQ(measure(CellSet(p)), 0.0);
  EXPECT_DOUBLE_EQ(measure(CellSet::all(p)), 1.0);
  EXPECT_DOUBLE_EQ(measure(CellSet(p, {0, 1, 2, 3, 4})), 0.05);
}

TEST(Integrate, Examples) {
  const auto p = build_partition(kUnit, 10, 10);
  const auto all = CellSet::all(p);
  EXPECT_DOUBLE_EQ(integrate(indicator(all), all), 1.0);
  EXPECT_EQ(integrate(ScalarField(p), CellSet(p, {3, 8})), 0.0);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(100);
  v[7] = 3.0;
  EXPECT_DOUBLE_EQ(integrate(ScalarField(p, v), CellSet(p, {7})), 0.03);
  const CellSet s(p, {1, 2, 50, 99});
  EXPECT_EQ(integrate(indicator(s), s), measure(s));
  EXPECT_THROW(integrate(indicator(s), CellSet(build_partition(kUnit, 5, 5), {0})), InputError);
}

TEST(ScalarField, ValidatesLengthAndFiniteness) {
  const auto p = build_partition(kUnit, 2, 2);
  EXPECT_THROW(ScalarField(p, Eigen::VectorXd::Zero(3)), InputError);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);
  bad[2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(ScalarField(p, bad), InputError);
}

TEST(ScalarField, CsvRoundTripIsExact) {
  const auto p = build_partition(Domain{-0.3, 0.7, 0.1, 1.9}, 7, 3);
  Eigen::VectorXd v(21);
  for (int i = 0; i < 21; ++i) v[i] = 1.0 / (i + 3.0) - 1e-300 * i;
  const ScalarField f(p, v);
  std::stringstream s;
  write_scalar_field_csv(s, f);
  EXPECT_EQ(s.str().substr(0, 12), "cx,cy,value\n");
  const auto g = read_scalar_field_csv(s, p);
  EXPECT_EQ(g.values(), f.values());
}

TEST(ScalarField, CsvRejectsWrongRows) {
  const auto p = build_partition(kUnit, 2, 1);
  std::stringstream s("cx,cy,value\n0.75,0.5,1\n0.25,0.5,2\n");
  EXPECT_THROW(read_scalar_field_csv(s, p), InputError);
  std::stringstream t("cx,cy,value\n0.25,0.5,1\n");
  EXPECT_THROW(read_scalar_field_csv(t, p), InputError);
}

TEST(InnerProduct, WeightedByCellMeasure) {
  const auto p = build_partition(Domain{0, 2, 0, 1}, 2, 1);
  const ScalarField a(p, Eigen::Vector2d(1, 2)), b(p, Eigen::Vector2d(3, 4));
  EXPECT_DOUBLE_EQ(inner_product(a, b), 11.0);
  EXPECT_DOUBLE_EQ(field_l2_norm(a), std::sqrt(5.0));
}
