#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "telemovr/model.hpp"
#include "telemovr/random.hpp"

namespace telemovr {

struct ForwardBackwardOptions {
  // Keep every per-step pairwise table (T-1 x pairs doubles). Needed only
  // for diagnostics and tests; EM uses the per-zone expected counts.
  bool store_pairwise = false;
  bool accumulate_counts = true;
};

struct PosteriorTables {
  int num_steps = 0;
  std::size_t num_cells = 0;
  std::size_t num_pairs = 0;
  int num_zones = 1;
  // log p(x_t | y), T x Q row-major.
  std::vector<double> gamma;
  // log p(x_t, x_{t+1} | y) per grid pair, (T-1) x pairs; empty unless
  // store_pairwise was requested.
  std::vector<double> xi;
  // Sum over t in zone z of p(x_t, x_{t+1} | y), Z x pairs.
  std::vector<double> expected_counts;
  // log p(y; theta)
  double loglik = 0.0;

  std::span<const double> log_marginals(int t) const {
    return {gamma.data() + static_cast<std::size_t>(t) * num_cells, num_cells};
  }
  std::span<const double> log_pairwise(int t) const {
    return {xi.data() + static_cast<std::size_t>(t) * num_pairs, num_pairs};
  }
  std::span<const double> counts(int zone) const {
    return {expected_counts.data() + static_cast<std::size_t>(zone) * num_pairs, num_pairs};
  }
};

/// Exact log-space forward-backward over the neighborhood-sparse chain,
/// Theta(Q R T).
PosteriorTables forward_backward(const ModelParams& params, const Model& model, const BearingSeries& obs,
                                 const ForwardBackwardOptions& options = {});

/// Per-zone expected transition counts summed from stored pairwise tables.
std::vector<double> counts_from_pairwise(const PosteriorTables& post, const Model& model);

/// Most probable path; ties go to the smallest cell id.
std::vector<CellId> viterbi(const ModelParams& params, const Model& model, const BearingSeries& obs);

/// Per-step arg max of the posterior marginals (ties to the smallest id).
std::vector<CellId> marginal_mode_path(const PosteriorTables& post);

// Single-site Gibbs sampler over the latent path with a persistent state.
// Transition rows are memoized per parameter setting; observation terms are
// evaluated only for proposed cells.
class GibbsSampler {
 public:
  GibbsSampler(const Model& model, const BearingSeries& obs, const ModelParams& params, std::vector<CellId> init);

  /// Per-step arg max of the observation likelihood, made feasible by a
  /// left-to-right pass that moves each step to the cell of
  /// neighborhood(x_{t-1}) nearest to its unconstrained arg max.
  static std::vector<CellId> initial_path(const ModelParams& params, const Model& model, const BearingSeries& obs);

  void set_params(const ModelParams& params);
  const ModelParams& params() const { return params_; }

  // num_updates single-site updates at uniformly random positions.
  void run(long num_updates, Rng& rng);
  void update_site(int t, Rng& rng);

  const std::vector<CellId>& path() const { return path_; }
  std::size_t rows_computed() const { return table_.rows_computed(); }
  const TransitionTable& table() const { return table_; }

 private:
  double obs_term(int t, CellId c) const;

  const Model* model_;
  const BearingSeries* obs_;
  ModelParams params_;
  TransitionTable table_;
  std::vector<double> log_norm_;
  std::vector<CellId> path_;
  std::vector<CellId> cand_;
  std::vector<double> weight_;
};

/// Initializes with GibbsSampler::initial_path and applies num_burn updates.
std::vector<CellId> gibbs_sample_path(const ModelParams& params, const Model& model, const BearingSeries& obs,
                                      long num_burn, Rng& rng);

/// Draws an index from unnormalized log weights by inverse CDF in index order.
std::size_t sample_log_categorical(std::span<const double> log_weights, Rng& rng);

}  // namespace telemovr
