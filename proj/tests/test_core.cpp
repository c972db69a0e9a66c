#include <gtest/gtest.h>

#include <sstream>

#include "gcausal/core.hpp"
#include "gcausal/random.hpp"

using namespace gcausal;

TEST(Panel, RejectsBadShapesAndValues) {
  EXPECT_THROW(time_series_panel(MatrixXd(0, 2)), error);
  EXPECT_THROW(time_series_panel(MatrixXd::Zero(3, 2), {"a"}), error);
  EXPECT_THROW(time_series_panel(MatrixXd::Zero(3, 2), {"a", "a"}), error);
  MatrixXd m = MatrixXd::Zero(3, 2);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    time_series_panel p(m);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), error_kind::data);
  }
}

TEST(Panel, SliceRows) {
  MatrixXd m(4, 1);
  m << 1, 2, 3, 4;
  const time_series_panel p(m);
  const auto s = p.slice_rows(1, 3);
  EXPECT_EQ(s.length(), 2);
  EXPECT_EQ(s.values()(0, 0), 2.0);
  EXPECT_EQ(s.names(), p.names());
  EXPECT_THROW(p.slice_rows(2, 2), error);
  EXPECT_THROW(p.slice_rows(0, 5), error);
}

TEST(Partition, ValidatesCover) {
  EXPECT_NO_THROW(group_partition({{0, 2}, {1}}, 3));
  EXPECT_THROW(group_partition({{0, 1}, {1, 2}}, 3), error);  // overlap
  EXPECT_THROW(group_partition({{0}, {2}}, 3), error);         // 1 unassigned
  EXPECT_THROW(group_partition({{0, 3}}, 3), error);           // out of range
  EXPECT_THROW(group_partition({{0, 1, 2}, {}}, 3), error);    // empty group
  const auto u = group_partition::uniform(3, 2);
  EXPECT_EQ(u.size(), 3);
  EXPECT_EQ(u.group_of(5), 2);
  EXPECT_EQ(group_partition::singletons(4).size(), 4);
}

TEST(Partition, ColumnsFollowGroupOrder) {
  MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const group_partition p({{2, 0}, {1}}, 3);
  const MatrixXd c = p.columns(m, 0);
  EXPECT_EQ(c(0, 0), 3.0);
  EXPECT_EQ(c(1, 1), 4.0);
}

TEST(Graph, SelfEdgesAndLabels) {
  group_causal_graph g(3);
  EXPECT_THROW(g.set_edge(1, 1), error);
  EXPECT_NO_THROW(g.set_edge(1, 1, false));
  g.set_edge(0, 1);
  g.set_edge(2, 1);
  g.set_edge(1, 2);
  EXPECT_EQ(g.label(0, 1), link_label::forward);
  EXPECT_EQ(g.label(1, 0), link_label::backward);
  EXPECT_EQ(g.label(1, 2), link_label::bidirectional);
  EXPECT_EQ(g.label(0, 2), link_label::none);
  EXPECT_EQ(g.edge_count(), 3);
  EXPECT_THROW(g.edge(0, 3), error);
}

TEST(Graph, JsonRoundTrip) {
  group_causal_graph g(3);
  g.set_edge(0, 2);
  g.set_edge(2, 1);
  const auto back = group_causal_graph::from_json(nlohmann::json::parse(g.to_json().dump()));
  EXPECT_EQ(back, g);
  auto bad = nlohmann::json::parse(g.to_json().dump());
  bad["adjacency"][1][1] = true;
  EXPECT_THROW(group_causal_graph::from_json(bad), error);
  bad = nlohmann::json::parse(g.to_json().dump());
  bad["adjacency"].erase(0);
  EXPECT_THROW(group_causal_graph::from_json(bad), error);
}

TEST(Windows, HandEnumeratedOffsets) {
  const auto w = make_windows(10, 4, 2, 2);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0].offset, 0);
  EXPECT_EQ(w[1].offset, 2);
  EXPECT_EQ(w[2].offset, 4);
  EXPECT_EQ(w[2].target_begin(), 8);
}

TEST(Windows, TooShortSeries) {
  EXPECT_EQ(make_windows(6, 4, 2, 1).size(), 1u);
  try {
    make_windows(5, 4, 2, 1);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), error_kind::data);
    EXPECT_NE(std::string(e.what()).find("too short"), std::string::npos);
  }
  EXPECT_THROW(make_windows(10, 4, 2, 0), error);
}

TEST(Score, PlugIn) {
  group_causal_graph truth(3), pred(3);
  truth.set_edge(0, 1);
  truth.set_edge(1, 2);
  pred.set_edge(0, 1);
  pred.set_edge(1, 2);
  pred.set_edge(2, 0);
  const auto s = score_graph(pred, truth);
  EXPECT_EQ(s.true_positives, 2);
  EXPECT_EQ(s.false_positives, 1);
  EXPECT_EQ(s.false_negatives, 0);
  EXPECT_NEAR(s.precision, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.recall, 1.0);
  EXPECT_NEAR(s.f_score, 0.8, 1e-15);
}

TEST(Score, EmptyGraphs) {
  group_causal_graph a(2), b(2);
  const auto s = score_graph(a, b);
  EXPECT_EQ(s.precision, 1.0);
  EXPECT_EQ(s.recall, 1.0);
  b.set_edge(0, 1);
  EXPECT_EQ(score_graph(a, b).f_score, 0.0);
  EXPECT_THROW(score_graph(group_causal_graph(2), group_causal_graph(3)), error);
}

TEST(Standardize, RoundTripAndZeroVariance) {
  rng_t rng = make_rng(3);
  MatrixXd m = standard_normal_matrix(50, 3, rng);
  m.col(1) = m.col(1) * 7.0 + VectorXd::Constant(50, 2.0);
  const time_series_panel p(m);
  const auto s = standardize(p);
  EXPECT_LT(column_means(s.panel.values()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((column_stddevs(s.panel.values()).array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_LT((destandardize(s.panel, s.mean, s.stddev).values() - m).cwiseAbs().maxCoeff(), 1e-12);

  m.col(2).setConstant(4.2);
  try {
    standardize(time_series_panel(m, {"a", "b", "flat"}));
    FAIL();
  } catch (const error& e) {
    EXPECT_NE(std::string(e.what()).find("'flat'"), std::string::npos);
  }
}

TEST(Csv, ParsesHeaderBomAndMissing) {
  std::istringstream in("\xEF\xBB\xBFx,y\n1,2\nNA,4\n3,\n5,8\n");
  EXPECT_THROW(parse_panel_csv(in, missing_policy::error, "t"), error);

  std::istringstream in2("\xEF\xBB\xBFx,y\n1,2\nNA,4\n3,\n5,8\n");
  const auto dropped = parse_panel_csv(in2, missing_policy::drop_rows, "t");
  EXPECT_EQ(dropped.length(), 2);
  EXPECT_EQ(dropped.names(), (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(dropped.values()(1, 1), 8.0);

  std::istringstream in3("x,y\nnan,2\n1,NaN\n3,null\n5,8\n");
  const auto filled = parse_panel_csv(in3, missing_policy::interpolate, "t");
  EXPECT_EQ(filled.values()(0, 0), 1.0);  // edge fill
  EXPECT_EQ(filled.values()(1, 1), 4.0);  // 2 -> 8 over three steps
  EXPECT_EQ(filled.values()(2, 1), 6.0);
}

TEST(Csv, RejectsMalformedRows) {
  std::istringstream ragged("x,y\n1,2\n3\n");
  EXPECT_THROW(parse_panel_csv(ragged, missing_policy::error, "t"), error);
  std::istringstream text("x,y\n1,abc\n");
  EXPECT_THROW(parse_panel_csv(text, missing_policy::error, "t"), error);
  EXPECT_THROW(parse_missing_policy("sometimes"), error);
  EXPECT_THROW(load_panel("/nonexistent/panel.csv"), error);
}

TEST(Csv, WriteThenReadIsExact) {
  rng_t rng = make_rng(11);
  const time_series_panel p(standard_normal_matrix(20, 3, rng));
  std::stringstream io;
  write_panel_csv(io, p);
  const auto back = parse_panel_csv(io, missing_policy::error, "t");
  EXPECT_EQ(back.values(), p.values());
  EXPECT_EQ(back.names(), p.names());
}

TEST(Random, DerivedStreamsAreDeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(5, 1), derive_seed(5, 1));
  EXPECT_NE(derive_seed(5, 1), derive_seed(5, 2));
  EXPECT_NE(derive_seed(5, 1), derive_seed(6, 1));
  rng_t a = make_rng(9, 3), b = make_rng(9, 3);
  EXPECT_EQ(standard_normal_matrix(4, 4, a), standard_normal_matrix(4, 4, b));
}
