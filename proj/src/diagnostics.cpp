#include "tsclimb/diagnostics.hpp"

#include <cmath>
#include <limits>

namespace tsclimb {

namespace {

// Autocovariance at lag t of the first n entries of dimension `dim`.
double autocov(const Chain& chain, int dim, long n, long lag, double mean) {
  double s = 0.0;
  for (long i = 0; i + lag < n; ++i)
    s += (chain.at(i, dim) - mean) * (chain.at(i + lag, dim) - mean);
  return s / static_cast<double>(n);
}

}  // namespace

double ess_prefix(const Chain& chain, int dim, long n_prefix) {
  require(dim >= 0 && dim < chain.dim, "ess: dimension out of range");
  const long n = std::min(n_prefix, chain.n());
  require(n >= 10, "ess: need at least 10 samples");

  double mean = 0.0;
  for (long i = 0; i < n; ++i) mean += chain.at(i, dim);
  mean /= static_cast<double>(n);

  const double c0 = autocov(chain, dim, n, 0, mean);
  // roundoff in the mean leaves a constant chain with a tiny positive c0
  if (c0 <= 1e-24 * (1.0 + mean * mean))
    throw numeric_error("ess: zero variance (constant chain)");

  // Sum autocorrelations pairwise while the pair sums stay positive.
  double tau = 0.0;
  for (long m = 0;; ++m) {
    const long t1 = 2 * m;
    const long t2 = 2 * m + 1;
    if (t1 >= n - 1) break;
    const double rho1 = autocov(chain, dim, n, t1, mean) / c0;
    const double rho2 = t2 < n ? autocov(chain, dim, n, t2, mean) / c0 : 0.0;
    const double pair = rho1 + rho2;
    if (m > 0 && pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau -= 1.0;  // rho_0 was counted twice
  if (tau < 1.0 / static_cast<double>(n)) tau = 1.0 / static_cast<double>(n);
  const double e = static_cast<double>(n) / tau;
  return std::min(e, static_cast<double>(n));
}

double ess(const Chain& chain, int dim) { return ess_prefix(chain, dim, chain.n()); }

SummaryStats moments(const Chain& chain) {
  require(chain.n() >= 1, "moments: empty chain");
  const int d = chain.dim;
  SummaryStats stats;
  stats.mean.assign(static_cast<size_t>(d), 0.0);
  stats.stddev.assign(static_cast<size_t>(d), 0.0);
  Vec m2(static_cast<size_t>(d), 0.0);
  const long n = chain.n();
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const double x = chain.at(i, j);
      const double delta = x - stats.mean[j];
      stats.mean[j] += delta / static_cast<double>(i + 1);
      m2[j] += delta * (x - stats.mean[j]);
    }
  }
  for (int j = 0; j < d; ++j)
    stats.stddev[j] = n > 1 ? std::sqrt(m2[j] / static_cast<double>(n - 1)) : 0.0;
  return stats;
}

TruthComparison compare_to_truth(const SummaryStats& stats, const Vec& truth_mean, const Vec& truth_std) {
  require(stats.mean.size() == truth_mean.size() && stats.stddev.size() == truth_std.size(),
          "compare_to_truth: dimension mismatch");
  TruthComparison cmp;
  cmp.abs_err_mean.resize(truth_mean.size());
  cmp.abs_err_std.resize(truth_std.size());
  for (size_t i = 0; i < truth_mean.size(); ++i) {
    cmp.abs_err_mean[i] = std::abs(stats.mean[i] - truth_mean[i]);
    cmp.sse += cmp.abs_err_mean[i] * cmp.abs_err_mean[i];
  }
  for (size_t i = 0; i < truth_std.size(); ++i) {
    cmp.abs_err_std[i] = std::abs(stats.stddev[i] - truth_std[i]);
    cmp.sse += cmp.abs_err_std[i] * cmp.abs_err_std[i];
  }
  return cmp;
}

EssCurve cumulative_ess(const Chain& chain) {
  EssCurve curve;
  const long n = chain.n();
  for (long c = 16; c < n; c *= 2) curve.checkpoints.push_back(c);
  if (n >= 16) curve.checkpoints.push_back(n);
  for (long c : curve.checkpoints) {
    Vec per_dim(static_cast<size_t>(chain.dim));
    double worst = std::numeric_limits<double>::infinity();
    for (int j = 0; j < chain.dim; ++j) {
      per_dim[static_cast<size_t>(j)] = ess_prefix(chain, j, c);
      worst = std::min(worst, per_dim[static_cast<size_t>(j)]);
    }
    curve.ess_per_dim.push_back(std::move(per_dim));
    curve.min_ess.push_back(worst);
  }
  return curve;
}

}  // namespace tsclimb
