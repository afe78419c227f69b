#pragma once

#include "tsclimb/numkit.hpp"

namespace tsclimb {

// Ordered samples, iteration-major. data[i*dim + j] is dimension j of draw i.
struct Chain {
  Vec data;
  int dim = 0;

  Chain() = default;
  Chain(Vec samples, int d) : data(std::move(samples)), dim(d) {
    require(d >= 1, "Chain: dimension must be positive");
    require(data.size() % static_cast<size_t>(d) == 0, "Chain: ragged sample matrix");
  }

  long n() const { return static_cast<long>(data.size()) / dim; }
  double at(long i, int j) const { return data[static_cast<size_t>(i) * dim + j]; }
  void push(const Vec& z) {
    require(static_cast<int>(z.size()) == dim, "Chain: dimension mismatch");
    data.insert(data.end(), z.begin(), z.end());
  }
};

struct SummaryStats {
  Vec mean;
  Vec stddev;
  Vec ess;  // per dimension; empty when not computed
  double acceptance_rate = 0.0;
  long divergences = 0;
};

// Effective sample size N / (1 + 2 sum rho_t) with the autocovariance sum
// truncated at the first nonpositive Geyer pair. Throws on constant chains.
double ess(const Chain& chain, int dim);
// ESS over the first n_prefix draws.
double ess_prefix(const Chain& chain, int dim, long n_prefix);

// Streaming per-dimension mean/std (one pass, Welford).
SummaryStats moments(const Chain& chain);

struct TruthComparison {
  Vec abs_err_mean;
  Vec abs_err_std;
  double sse = 0.0;  // sum of squared differences over both blocks
};

TruthComparison compare_to_truth(const SummaryStats& stats, const Vec& truth_mean, const Vec& truth_std);

// ESS per dimension over growing prefixes at geometric checkpoints
// n = 16, 32, 64, ... plus the full length.
struct EssCurve {
  std::vector<long> checkpoints;
  std::vector<Vec> ess_per_dim;  // one entry per checkpoint
  Vec min_ess;                   // worst dimension per checkpoint
};

EssCurve cumulative_ess(const Chain& chain);

}  // namespace tsclimb
