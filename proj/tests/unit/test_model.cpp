#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "telemovr/bessel.hpp"
#include "telemovr/errors.hpp"
#include "telemovr/logspace.hpp"
#include "telemovr/model.hpp"

using namespace telemovr;

namespace {

std::shared_ptr<const Grid> make_grid(int rows, int cols, double radius) {
  GridSpec g;
  g.n_rows = rows;
  g.n_cols = cols;
  g.move_radius = radius;
  return std::make_shared<const Grid>(g);
}

FeatureDef self_indicator(const Grid& g, double offset = 0.0) {
  FeatureDef f;
  f.kind = FeatureKind::tabulated;
  f.name = "stay";
  f.table.assign(g.num_pairs(), offset);
  for (CellId c = 0; c < static_cast<CellId>(g.num_cells()); ++c)
    f.table[g.pair_offset(c) + static_cast<std::size_t>(g.neighbor_index(c, c))] = 1.0 + offset;
  return f;
}

double row_mass(const std::vector<double>& logp) {
  double s = 0;
  for (double v : logp) s += std::exp(v);
  return s;
}

void check_close(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(std::abs(got[i] - want[i]) <= tol * std::max(1.0, std::abs(want[i])));
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("start log-probability") {
    CHECK(start_logprob(*make_grid(1, 1, 100)) == 0.0);
    CHECK(start_logprob(*make_grid(63, 58, 100)) == doctest::Approx(-std::log(3654.0)));
    CHECK(start_logprob(*make_grid(30, 40, 100)) == doctest::Approx(-std::log(1200.0)));
  }

  TEST_CASE("zero weights give a uniform row") {
    auto g = make_grid(8, 8, 300);
    auto fs = std::make_shared<const FeatureSet>(g, std::vector<FeatureDef>{FeatureDef::distance("d", true)});
    Model m(fs, {});
    const auto p = ModelParams::zeros(1, 1, 0);
    for (CellId c : {0, 9, 27, 63}) {
      const auto row = transition_row(p, m, c, 0);
      for (double v : row) CHECK(v == doctest::Approx(-std::log(double(g->neighborhood(c).size()))));
    }
  }

  TEST_CASE("strong self weight pins the chain") {
    auto g = make_grid(5, 5, 150);
    auto fs = std::make_shared<const FeatureSet>(g, std::vector<FeatureDef>{self_indicator(*g)});
    Model m(fs, {});
    ModelParams p = ModelParams::zeros(1, 1, 0);
    p.lambda[0] = 40.0;
    for (CellId c = 0; c < 25; ++c) {
      const auto row = transition_row(p, m, c, 0);
      CHECK(std::exp(row[static_cast<std::size_t>(g->neighbor_index(c, c))]) > 1.0 - 1e-15);
    }
  }

  TEST_CASE("rows normalize for extreme weights and ignore feature shifts") {
    auto g = make_grid(9, 9, 300);
    Rng rng(21);
    std::vector<FeatureDef> defs, shifted;
    for (int k = 0; k < 3; ++k) {
      FeatureDef f;
      f.kind = FeatureKind::tabulated;
      f.table.resize(g->num_pairs());
      for (auto& v : f.table) v = rng.uniform(-1, 1);
      defs.push_back(f);
      for (auto& v : f.table) v += 7.25 * (k + 1);
      shifted.push_back(f);
    }
    Model m(std::make_shared<const FeatureSet>(g, defs), {});
    Model ms(std::make_shared<const FeatureSet>(g, shifted), {});
    for (int rep = 0; rep < 30; ++rep) {
      ModelParams p = ModelParams::zeros(1, 3, 0);
      for (auto& l : p.lambda) l = rng.uniform(-50, 50);
      const CellId c = static_cast<CellId>(rng.below(g->num_cells()));
      const auto row = transition_row(p, m, c, 0);
      CHECK(std::abs(row_mass(row) - 1.0) < 1e-12);
      const auto rs = transition_row(p, ms, c, 0);
      for (std::size_t j = 0; j < row.size(); ++j) CHECK(std::abs(std::exp(row[j]) - std::exp(rs[j])) < 1e-12);
    }
  }

  TEST_CASE("distance feature reproduces a truncated Gaussian walk") {
    auto g = make_grid(11, 11, 400);
    Model m(std::make_shared<const FeatureSet>(g, std::vector<FeatureDef>{FeatureDef::distance()}), {});
    const double sigma = 180.0;
    ModelParams p = ModelParams::zeros(1, 1, 0);
    p.lambda[0] = 1.0 / (sigma * sigma);
    const CellId c = g->cell_at(5, 5);
    const auto row = transition_row(p, m, c, 0);
    const auto nb = g->neighborhood(c);
    std::vector<double> dens;
    for (CellId d : nb) {
      const double r = distance(g->center(c), g->center(d));
      dens.push_back(std::exp(-r * r / (2 * sigma * sigma)) / (2 * kPi * sigma * sigma));
    }
    double z = 0;
    for (double v : dens) z += v;
    for (std::size_t j = 0; j < nb.size(); ++j) CHECK(std::exp(row[j]) == doctest::Approx(dens[j] / z).epsilon(1e-12));
  }

  TEST_CASE("observation log-probability") {
    auto g = make_grid(4, 4, 100);
    auto fs = std::make_shared<const FeatureSet>(g, std::vector<FeatureDef>{FeatureDef::distance()});
    Model m(fs, {{1, {-30, -40}}, {2, {500, 470}}, {3, {210, -90}}});
    ModelParams p = ModelParams::zeros(1, 1, 3, 0.0);
    BearingSeries y(1, 3);
    y.set(0, 0, 0.3);
    y.set(0, 1, -2.0);
    y.set(0, 2, 3.0);
    CHECK(obs_logprob(p, m, y.step(0), 5) == doctest::Approx(-3 * std::log(kTwoPi)));
    BearingSeries none(1, 3);
    CHECK(obs_logprob(p, m, none.step(0), 5) == 0.0);

    Model one(fs, {{1, {-30, -40}}});
    ModelParams q = ModelParams::zeros(1, 1, 1);
    q.mu[0] = 0.4;
    q.kappa[0] = 15.0;
    BearingSeries exact(1, 1);
    exact.set(0, 0, one.true_bearing(6, 0) + 0.4);
    CHECK(obs_logprob(q, one, exact.step(0), 6) ==
          doctest::Approx(15.0 - std::log(kTwoPi) - oracle::log_i0(15.0)).epsilon(1e-12));
  }

  TEST_CASE("observation density integrates to one") {
    auto g = make_grid(3, 3, 100);
    Model m(std::make_shared<const FeatureSet>(g, std::vector<FeatureDef>{FeatureDef::distance()}), {{1, {-70, 20}}});
    for (double kappa : {0.0, 0.8, 15.0, 200.0}) {
      ModelParams p = ModelParams::zeros(1, 1, 1);
      p.kappa[0] = kappa;
      p.mu[0] = -1.1;
      const int n = 20000;
      double s = 0;
      BearingSeries y(1, 1);
      for (int i = 0; i < n; ++i) {
        y.set(0, 0, -kPi + kTwoPi * i / n);
        s += std::exp(obs_logprob(p, m, y.step(0), 4));
      }
      CHECK(std::abs(s * kTwoPi / n - 1.0) < 1e-6);
    }
  }

  TEST_CASE("towers on a cell center are rejected") {
    auto g = make_grid(3, 3, 100);
    auto fs = std::make_shared<const FeatureSet>(g, std::vector<FeatureDef>{FeatureDef::distance()});
    CHECK_THROWS_AS(Model(fs, {{1, {150, 150}}}), DomainError);
  }

  TEST_CASE("complete log-likelihood closed forms") {
    auto g = make_grid(6, 6, 100);
    auto fs = std::make_shared<const FeatureSet>(g, std::vector<FeatureDef>{FeatureDef::distance("d", true)});
    Model m(fs, {{1, {-10, -10}}, {2, {700, 20}}});
    ModelParams p = ModelParams::zeros(1, 1, 2);
    BearingSeries y(4, 2);
    Rng rng(2);
    for (int t = 0; t < 4; ++t)
      for (int n = 0; n < 2; ++n) y.set(t, n, rng.uniform(-kPi, kPi));
    // interior cells all have 5 neighbors
    const std::vector<CellId> path{g->cell_at(2, 2), g->cell_at(2, 3), g->cell_at(3, 3), g->cell_at(3, 3)};
    CHECK(complete_loglik(p, m, path, y) ==
          doctest::Approx(-std::log(36.0) - 3 * std::log(5.0) - 4 * 2 * std::log(kTwoPi)).epsilon(1e-12));

    p.kappa = {3.0, 0.5};
    BearingSeries y1(1, 2);
    y1.set(0, 0, 1.0);
    y1.set(0, 1, -1.0);
    const std::vector<CellId> single{7};
    CHECK(complete_loglik(p, m, single, y1) ==
          doctest::Approx(-std::log(36.0) + obs_logprob(p, m, y1.step(0), 7)).epsilon(1e-12));

    const std::vector<CellId> jump{0, 35, 35, 35};
    CHECK_THROWS_AS(complete_loglik(p, m, jump, y), DomainError);
  }

  TEST_CASE("complete log-likelihood matches the term-by-term oracle") {
    Rng rng(77);
    int checked = 0;
    for (int rep = 0; rep < 40; ++rep) {
      auto in = oracle::random_instance(rng, 4, 3);
      const auto path = oracle::random_path(*in.grid, in.obs.num_steps(), rng);
      CHECK(std::abs(complete_loglik(in.params, *in.model, path, in.obs) - oracle::joint(*in.model, in.params, in.obs, path)) <
            1e-12 * std::max(1.0, std::abs(oracle::joint(*in.model, in.params, in.obs, path))));
      ++checked;
    }
    CHECK(checked == 40);
  }

  TEST_CASE("gradient closed forms") {
    auto g = make_grid(5, 5, 150);
    FeatureDef constant;
    constant.kind = FeatureKind::tabulated;
    constant.table.assign(g->num_pairs(), 2.5);
    auto fs = std::make_shared<const FeatureSet>(g, std::vector<FeatureDef>{constant, FeatureDef::distance("d", true)});
    Model m(fs, {{1, {-20, 35}}});
    ModelParams p = ModelParams::zeros(1, 2, 1);
    p.lambda = {0.7, -1.2};
    BearingSeries y(5, 1);
    Rng rng(6);
    for (int t = 0; t < 5; ++t) y.set(t, 0, rng.uniform(-kPi, kPi));
    const std::vector<CellId> path{6, 7, 12, 12, 13};
    const auto grad = grad_complete_loglik(p, m, path, y);
    CHECK(std::abs(grad.lambda[0]) < 1e-12);
    double cos_sum = 0;
    for (int t = 0; t < 5; ++t) cos_sum += std::cos(y.at(t, 0) - m.true_bearing(path[t], 0));
    CHECK(grad.kappa[0] == doctest::Approx(cos_sum).epsilon(1e-12));
  }

  TEST_CASE("gradient matches finite differences") {
    Rng rng(123);
    for (int rep = 0; rep < 30; ++rep) {
      auto in = oracle::random_instance(rng, 6, 6);
      if (rep % 5 == 0) in.params.kappa[0] = 0.0;
      const auto path = oracle::random_path(*in.grid, in.obs.num_steps(), rng);
      const auto grad = grad_complete_loglik(in.params, *in.model, path, in.obs);
      const auto fd = oracle::finite_difference(in, path);
      check_close(grad.lambda, fd.lambda, 1e-4);
      check_close(grad.mu, fd.mu, 1e-4);
      check_close(grad.kappa, fd.kappa, 1e-4);
    }
  }

  TEST_CASE("dimension checks") {
    auto g = make_grid(3, 3, 100);
    Model m(std::make_shared<const FeatureSet>(g, std::vector<FeatureDef>{FeatureDef::distance()}), {{1, {-5, -5}}});
    CHECK_THROWS_AS(m.check_params(ModelParams::zeros(1, 2, 1)), DomainError);
    CHECK_THROWS_AS(m.check_params(ModelParams::zeros(1, 1, 2)), DomainError);
    CHECK_THROWS_AS(m.check_observations(BearingSeries(3, 2)), DomainError);
    ModelParams neg = ModelParams::zeros(1, 1, 1);
    neg.kappa[0] = -1.0;
    CHECK_THROWS_AS(m.check_params(neg), DomainError);
    try {
      m.check_params(ModelParams::zeros(1, 2, 1));
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()).find("dimension mismatch") != std::string::npos);
    }
  }

  TEST_CASE("lazy and eager transition tables agree") {
    Rng rng(41);
    auto in = oracle::random_instance(rng, 6, 4);
    TransitionTable eager(*in.model, in.params, true), lazy(*in.model, in.params, false);
    CHECK(lazy.rows_computed() == 0);
    for (int z = 0; z < in.model->num_zones(); ++z)
      for (CellId c = 0; c < static_cast<CellId>(in.grid->num_cells()); ++c) {
        const auto a = eager.row(z, c);
        const auto b = lazy.row(z, c);
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
      }
  }
}
