#include "facov/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "facov/parallel.hpp"
#include "facov/rng.hpp"

namespace facov {

double cv_loss(const FactorEstimate& est, const SymMatrix& s_val, Eigen::Index n) {
  if (s_val.dim() != est.p())
    throw Error(errc::dimension_mismatch, "cv_loss: validation covariance dimension mismatch");
  if (n < 1) throw Error(errc::invalid_argument, "cv_loss: n must be >= 1");
  SampleStats val_stats{Eigen::VectorXd::Zero(est.p()), s_val};
  PenaltySpec none = PenaltySpec::lasso(est.p(), 0.0);
  // penalized_objective with lambda = 0 is exactly the two-term loss times n.
  return penalized_objective(est, val_stats, none) / static_cast<double>(n);
}

std::vector<double> default_lambda_grid(const SampleStats& stats, int points) {
  if (points < 1) throw Error(errc::invalid_argument, "default_lambda_grid: points must be >= 1");
  double scale = stats.s_y.max_abs_offdiag();
  if (scale <= 0.0) scale = 1.0;
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = scale;
    return grid;
  }
  const double lo = std::log(0.01), hi = std::log(1.0);
  for (int i = 0; i < points; ++i)
    grid[i] = scale * std::exp(lo + (hi - lo) * static_cast<double>(i) / (points - 1));
  return grid;
}

CVResult select_lambda(const ObservationSet& data, Eigen::Index r, const SymMatrix& weights,
                       const SolverConfig& cfg, const CVConfig& cv, int threads) {
  const Eigen::Index n = data.n();
  if (cv.k_folds < 2) throw Error(errc::invalid_argument, "select_lambda: need K >= 2");
  if (n < 2 * cv.k_folds)
    throw Error(errc::invalid_argument, "select_lambda: need n >= 2K observations");
  if (cv.lambda_grid.empty())
    throw Error(errc::invalid_argument, "select_lambda: empty lambda grid");

  std::vector<double> grid = cv.lambda_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (double l : grid)
    if (l < 0.0) throw Error(errc::invalid_argument, "select_lambda: negative lambda in grid");

  // Seeded Fisher-Yates shuffle, then contiguous blocks: an exact partition
  // with fold sizes differing by at most one.
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
  Rng rng(cv.seed);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  const int k_folds = cv.k_folds;
  std::vector<std::vector<Eigen::Index>> folds(k_folds);
  for (Eigen::Index i = 0; i < n; ++i)
    folds[static_cast<std::size_t>(i % k_folds)].push_back(order[i]);

  const Eigen::VectorXd ybar = data.rows.colwise().mean();  // full-sample mean

  struct Task {
    std::size_t lambda_idx;
    std::size_t fold_idx;
  };
  std::vector<Task> tasks;
  for (std::size_t li = 0; li < grid.size(); ++li)
    for (std::size_t fi = 0; fi < folds.size(); ++fi) tasks.push_back({li, fi});

  std::vector<ObservationSet> train_sets;
  std::vector<SymMatrix> holdout_covs;
  for (const auto& fold : folds) {
    std::vector<bool> in_fold(n, false);
    for (Eigen::Index idx : fold) in_fold[static_cast<std::size_t>(idx)] = true;
    Eigen::MatrixXd train(n - static_cast<Eigen::Index>(fold.size()), data.p());
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!in_fold[static_cast<std::size_t>(i)]) train.row(row++) = data.rows.row(i);
    train_sets.push_back(ObservationSet::from_matrix(std::move(train)));

    Eigen::MatrixXd s_val = Eigen::MatrixXd::Zero(data.p(), data.p());
    for (Eigen::Index idx : fold) {
      Eigen::VectorXd d = data.rows.row(idx).transpose() - ybar;
      s_val.noalias() += d * d.transpose();
    }
    s_val /= static_cast<double>(fold.size());
    holdout_covs.push_back(SymMatrix::from_dense(s_val));
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> losses(tasks.size(), inf);
  parallel_for(tasks.size(), threads, [&](std::size_t ti) {
    const auto [li, fi] = tasks[ti];
    try {
      auto [est, report] =
          fit(train_sets[fi], r, PenaltySpec::make(grid[li], weights), cfg);
      losses[ti] = cv_loss(est, holdout_covs[fi], n);
    } catch (const Error&) {
      losses[ti] = inf;  // recorded as a failed fold for this lambda
    }
  });

  CVResult result;
  result.table.resize(grid.size());
  bool any_finite = false;
  for (std::size_t li = 0; li < grid.size(); ++li) {
    CVRow& row = result.table[li];
    row.lambda = grid[li];
    double sum = 0.0;
    for (std::size_t fi = 0; fi < folds.size(); ++fi) {
      const double loss = losses[li * folds.size() + fi];
      if (std::isinf(loss)) ++row.failed_folds;
      row.fold_losses.push_back(loss);
      sum += loss;
    }
    row.mean_loss = sum / static_cast<double>(folds.size());
    if (std::isfinite(row.mean_loss)) any_finite = true;
  }
  if (!any_finite)
    throw Error(errc::non_convergence, "select_lambda: every lambda failed on some fold");

  double best = inf;
  for (const CVRow& row : result.table) {
    if (std::isfinite(row.mean_loss) && row.mean_loss <= best) {
      best = row.mean_loss;
      result.lambda_cv = row.lambda;  // ties resolve to the larger lambda
    }
  }
  return result;
}

}  // namespace facov
