#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "telemovr/errors.hpp"
#include "telemovr/features.hpp"

using namespace telemovr;

namespace {

std::shared_ptr<const Grid> make_grid(int rows, int cols, double radius = 500.0) {
  GridSpec g;
  g.n_rows = rows;
  g.n_cols = cols;
  g.move_radius = radius;
  return std::make_shared<const Grid>(g);
}

FeatureDef raster(std::string name, std::vector<double> values, bool normalize = false) {
  FeatureDef f;
  f.kind = FeatureKind::raster_delta;
  f.name = std::move(name);
  f.raster = std::move(values);
  f.normalize = normalize;
  return f;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("distance feature values") {
    auto g = make_grid(6, 6);
    FeatureSet fs(g, {FeatureDef::distance()});
    CHECK(fs.eval(0, 7, 7) == 0.0);
    CHECK(fs.eval(0, g->cell_at(1, 1), g->cell_at(1, 2)) == doctest::Approx(-5000.0));
    CHECK(fs.feature_vector(3, 3) == std::vector<double>{0.0});
  }

  TEST_CASE("constant rasters give zero deltas") {
    auto g = make_grid(4, 4);
    FeatureSet fs(g, {raster("a", std::vector<double>(16, 3.5)), raster("b", std::vector<double>(16, -1.0), true)});
    for (CellId c = 0; c < 16; ++c)
      for (CellId d : g->neighborhood(c)) CHECK(fs.feature_vector(c, d) == std::vector<double>{0.0, 0.0});
    CHECK(fs.normalization_scale(1) == 1.0);
  }

  TEST_CASE("tabulated values match the stored table") {
    auto g = make_grid(5, 4, 150.0);
    Rng rng(9);
    FeatureDef f;
    f.kind = FeatureKind::tabulated;
    f.table.resize(g->num_pairs());
    for (auto& v : f.table) v = rng.uniform();
    FeatureSet fs(g, {f});
    double max_abs = 0.0;
    for (CellId c = 0; c < static_cast<CellId>(g->num_cells()); ++c) {
      const auto nb = g->neighborhood(c);
      for (std::size_t j = 0; j < nb.size(); ++j) {
        CHECK(fs.eval(0, c, nb[j]) == f.table[g->pair_offset(c) + j]);
        max_abs = std::max(max_abs, std::abs(f.table[g->pair_offset(c) + j]));
      }
    }
    FeatureDef fn = f;
    fn.normalize = true;
    FeatureSet fsn(g, {fn});
    CHECK(fsn.normalization_scale(0) == max_abs);
  }

  TEST_CASE("distance normalization scale equals the largest in-disc displacement") {
    auto g = make_grid(15, 15);
    FeatureSet fs(g, {FeatureDef::distance("d", true)});
    double brute = 0.0;
    for (CellId c = 0; c < static_cast<CellId>(g->num_cells()); ++c)
      for (CellId d : oracle::neighbors(*g, c)) {
        const double r = distance(g->center(c), g->center(d));
        brute = std::max(brute, 0.5 * r * r);
      }
    CHECK(brute == doctest::Approx(125000.0));
    CHECK(fs.normalization_scale(0) == doctest::Approx(brute));
  }

  TEST_CASE("normalized values lie in [-1, 1] and attain the bound") {
    auto g = make_grid(7, 9, 300.0);
    Rng rng(4);
    std::vector<double> r(g->num_cells());
    for (auto& v : r) v = rng.uniform(-50, 80);
    FeatureDef near;
    near.kind = FeatureKind::nearest_distance;
    near.normalize = true;
    near.points = {{120.5, 333.0}, {610.0, 20.0}};
    FeatureSet fs(g, {FeatureDef::distance("d", true), raster("r", r, true), near});
    for (std::size_t k = 0; k < fs.size(); ++k) {
      double hi = 0.0;
      for (CellId c = 0; c < static_cast<CellId>(g->num_cells()); ++c)
        for (CellId d : g->neighborhood(c)) {
          const double v = fs.eval(k, c, d);
          CHECK(std::abs(v) <= 1.0 + 1e-15);
          hi = std::max(hi, std::abs(v));
        }
      CHECK(hi == doctest::Approx(1.0));
    }
  }

  TEST_CASE("nearest distance definition") {
    auto g = make_grid(4, 4, 200.0);
    FeatureDef near;
    near.kind = FeatureKind::nearest_distance;
    near.points = {{10.0, 20.0}, {333.0, 333.0}};
    FeatureSet fs(g, {near});
    auto d = [&](CellId c) {
      const Point p = g->center(c);
      return std::min(distance(p, near.points[0]), distance(p, near.points[1]));
    };
    for (CellId c = 0; c < 16; ++c)
      for (CellId e : g->neighborhood(c)) {
        const double delta = d(e) - d(c);
        CHECK(fs.eval(0, c, e) == doctest::Approx(-0.5 * delta * delta));
      }
  }

  TEST_CASE("definitional symmetries") {
    auto g = make_grid(6, 5, 250.0);
    Rng rng(8);
    std::vector<double> r(g->num_cells());
    for (auto& v : r) v = rng.uniform(0, 10);
    FeatureSet fs(g, {FeatureDef::distance(), raster("r", r)});
    for (CellId c = 0; c < static_cast<CellId>(g->num_cells()); ++c)
      for (CellId d : g->neighborhood(c)) {
        CHECK(fs.eval(0, c, d) == fs.eval(0, d, c));
        CHECK(fs.eval(1, c, d) == -fs.eval(1, d, c));
      }
  }

  TEST_CASE("errors") {
    auto g = make_grid(5, 5, 100.0);
    FeatureSet fs(g, {FeatureDef::distance()});
    CHECK_THROWS_AS(fs.eval(0, 0, 24), DomainError);
    CHECK_THROWS_AS(fs.eval(1, 0, 0), DomainError);
    CHECK_THROWS_AS(FeatureSet(g, {raster("short", {1.0, 2.0})}), DomainError);
    CHECK_THROWS_AS(FeatureSet(g, {}), DomainError);
  }

  TEST_CASE("zone map") {
    ZoneMap all;
    CHECK(all.zone(12345) == 0);
    ZoneMap dn(2, {{0, 9, 0}, {10, 19, 1}}, 20);
    CHECK(dn.zone(5) == 0);
    CHECK(dn.zone(15) == 1);
    CHECK(dn.zone(35) == 1);
    CHECK(dn.zone(40) == 0);
    ZoneMap partial(2, {{3, 4, 1}});
    CHECK(partial.zone(2) == 0);
    CHECK(partial.zone(4) == 1);
    CHECK_THROWS_AS(ZoneMap(2, {{0, 1, 2}}), DomainError);
    CHECK_THROWS_AS(ZoneMap(0, {}), DomainError);
  }
}
