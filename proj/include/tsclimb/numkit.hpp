#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

// Dense f64 vector/matrix helpers, a seeded RNG with a fixed algorithm,
// the Adam optimizer with inverse-time learning-rate decay, and a
// central-difference gradient oracle.

namespace tsclimb {

using Vec = std::vector<double>;

struct Mat {
  int rows = 0;
  int cols = 0;
  Vec a;  // row-major

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return a.size(); }
};

// Thrown when an operation's input contract is violated (shape mismatch,
// bad sizes, unsupported kind).
struct contract_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when a computation produces or receives a non-finite value that
// the caller must handle (reject the step, skip the update).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg);

bool all_finite(const Vec& v);

double dot(const Vec& x, const Vec& y);
double norm2(const Vec& x);
double norm_inf(const Vec& x);
// y += alpha * x
void axpy(double alpha, const Vec& x, Vec& y);

// Deterministic generator: xoshiro256++ seeded through splitmix64.
// Identical seeds give identical draw sequences on every platform; normal
// draws use Box-Muller with a cached spare.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  // uniform on [0, 1)
  double uniform();
  // standard normal
  double normal();
  Vec normal_vec(int n);

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Adam with effective learning rate alpha_t = alpha0 / (1 + kappa * t).
struct AdamState {
  Vec m;  // first moment
  Vec v;  // second moment
  long t = 0;
  double alpha0 = 3e-3;
  double kappa = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(int n_params, double alpha0_, double kappa_);

  double learning_rate() const { return alpha0 / (1.0 + kappa * static_cast<double>(t)); }
};

// One Adam update in place. Throws numeric_error on a non-finite gradient;
// the caller decides whether to skip the iteration.
void adam_step(AdamState& state, Vec& params, const Vec& grad);

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h. Throws numeric_error
// naming the coordinate if f evaluates non-finite.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5);

}  // namespace tsclimb
