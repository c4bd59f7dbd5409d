#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "annihilate/graphs.hpp"

using namespace annihilate;

TEST(Graphs, LineRootIsZero) {
  Graph g(GraphSpec::Line());
  EXPECT_EQ(g.root(), 0);
  EXPECT_EQ(g.num_choices(), 2u);
  EXPECT_EQ(g.step(0, 0), 1);
  EXPECT_EQ(g.step(0, 1), -1);
}

TEST(Graphs, RejectsBadSpecs) {
  EXPECT_THROW(Graph(GraphSpec::Torus(1, 0)), std::invalid_argument);
  EXPECT_THROW(Graph(GraphSpec::Lattice(0)), std::invalid_argument);
  EXPECT_THROW(Graph(GraphSpec::BiTree(1, 3)), std::invalid_argument);
  EXPECT_THROW(Graph(GraphSpec::BiTree(2, -1)), std::invalid_argument);
}

TEST(Graphs, TorusCanonicalSites) {
  Graph g(GraphSpec::Torus(1, 2));
  const auto s = g.all_sites();
  EXPECT_EQ(std::set<SiteId>(s.begin(), s.end()), (std::set<SiteId>{-1, 0, 1, 2}));
  EXPECT_EQ(g.wrap(3), -1);
  EXPECT_EQ(g.wrap(-2), 2);
}

TEST(Graphs, TorusSiteCount) {
  Graph g(GraphSpec::Torus(2, 3));
  EXPECT_EQ(g.all_sites().size(), 36u);
  Graph h(GraphSpec::Torus(3, 2));
  EXPECT_EQ(h.all_sites().size(), 64u);
}

TEST(Graphs, TreeSiteCount) {
  Graph g(GraphSpec::BiTree(2, 3));
  EXPECT_EQ(g.all_sites().size(), 15u);
  for (int k = 0; k <= 3; ++k)
    EXPECT_EQ(g.level_start(k + 1) - g.level_start(k), 1 << k);
  Graph h(GraphSpec::BiTree(3, 2));
  EXPECT_EQ(h.all_sites().size(), 13u);
}

TEST(Graphs, TorusWrapNeighbours) {
  Graph g(GraphSpec::Torus(1, 2));
  EXPECT_EQ(g.step(2, 0), -1);
  EXPECT_EQ(g.step(2, 1), 1);
}

TEST(Graphs, TreeStep) {
  Graph g(GraphSpec::BiTree(2, 3));
  const SiteId leaf = g.site_of_word({0, 1, 1});
  EXPECT_EQ(g.level(leaf), 3);
  EXPECT_EQ(g.step(leaf, 0), g.site_of_word({0, 1}));
  EXPECT_EQ(g.step(leaf, 1), kEscaped);
  EXPECT_EQ(g.step(g.root(), 0), kEscaped);
  EXPECT_THROW(g.step(kEscaped, 0), std::logic_error);
  EXPECT_THROW(g.distance_to_root(kEscaped), std::logic_error);
}

TEST(Graphs, TreeWordsRoundTrip) {
  Graph g(GraphSpec::BiTree(3, 4));
  for (SiteId s : g.all_sites()) EXPECT_EQ(g.site_of_word(g.word(s)), s);
  EXPECT_EQ(g.site_name(0), "root");
  EXPECT_EQ(g.site_name(g.site_of_word({2, 0})), "20");
}

TEST(Graphs, Distances) {
  Graph l2(GraphSpec::Lattice(2));
  EXPECT_EQ(l2.distance_to_root(l2.site_at({3, -2})), 3);
  Graph t(GraphSpec::Torus(1, 2));
  EXPECT_EQ(t.distance_to_root(2), 2);
  Graph tree(GraphSpec::BiTree(2, 5));
  EXPECT_EQ(tree.distance_to_root(tree.site_of_word({0, 1, 1})), 3);
}

TEST(Graphs, LatticeCoordinatesRoundTrip) {
  Graph g(GraphSpec::Lattice(3));
  const std::vector<std::int64_t> c{-5, 7, 0};
  EXPECT_EQ(g.coords(g.site_at(c)), c);
  EXPECT_EQ(g.site_at({0, 0, 0}), g.root());
}

TEST(Graphs, SitesWithinOrdering) {
  Graph g(GraphSpec::Lattice(2));
  const auto s = g.sites_within(2);
  EXPECT_EQ(s.size(), 25u);
  EXPECT_EQ(s.front(), g.root());
  for (std::size_t i = 1; i < s.size(); ++i)
    EXPECT_LE(g.distance_to_root(s[i - 1]), g.distance_to_root(s[i]));
  EXPECT_EQ(g.sites_within(2, 2).size(), 16u);
}

TEST(Graphs, TruncationRadius) {
  EXPECT_EQ(truncation_radius(GraphSpec::Line(), 100, 2), 43);
  EXPECT_EQ(truncation_radius(GraphSpec::BiTree(2, 10), 50, 4), 200);
  EXPECT_EQ(truncation_radius(GraphSpec::Lattice(2), 2, 1), 2);
  EXPECT_THROW(truncation_radius(GraphSpec::Line(), 1.5, 2), std::invalid_argument);
}

TEST(Graphs, SpecParseRoundTrip) {
  for (const char* text : {"line", "lattice:2", "torus:3:5", "bitree:2:8"})
    EXPECT_EQ(GraphSpec::parse(text).to_string(), text);
  EXPECT_THROW(GraphSpec::parse("torus:2"), std::invalid_argument);
  EXPECT_THROW(GraphSpec::parse("lattice:x"), std::invalid_argument);
}

TEST(Graphs, KernelIsUniform) {
  const int draws = 100000;
  for (auto spec : {GraphSpec::Lattice(1), GraphSpec::Lattice(2), GraphSpec::Torus(2, 3)}) {
    Graph g(spec);
    Rng rng(17);
    std::map<SiteId, int> hits;
    for (int i = 0; i < draws; ++i) ++hits[g.sample_step(g.root(), rng)];
    const double q = 1.0 / g.num_choices();
    ASSERT_EQ(hits.size(), g.num_choices());
    for (const auto& [site, n] : hits) {
      const double sd = std::sqrt(draws * q * (1 - q));
      EXPECT_LT(std::abs(n - draws * q), 4 * sd) << spec.to_string();
    }
  }
  Graph tree(GraphSpec::BiTree(2, 4));
  Rng rng(3);
  int parent = 0;
  const SiteId leaf = tree.site_of_word({1, 0, 1});
  for (int i = 0; i < draws; ++i) parent += tree.sample_step(leaf, rng) != kEscaped;
  EXPECT_LT(std::abs(parent - draws / 2.0), 4 * std::sqrt(draws * 0.25));
}

TEST(Graphs, TorusWrapsAfterFullTurn) {
  Graph g(GraphSpec::Torus(2, 4));
  const SiteId start = g.site_at({1, -3});
  for (std::uint32_t choice = 0; choice < g.num_choices(); ++choice) {
    SiteId s = start;
    for (int i = 0; i < 8; ++i) s = g.step(s, choice);
    EXPECT_EQ(s, start);
  }
}

TEST(Graphs, EscapedNeverReturns) {
  Graph g(GraphSpec::BiTree(3, 5));
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    SiteId s = g.level_start(5) + static_cast<SiteId>(rng.below(243));
    while (s != kEscaped) s = g.sample_step(s, rng);
    EXPECT_THROW(g.sample_step(s, rng), std::logic_error);
  }
}
