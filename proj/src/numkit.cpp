#include "tsclimb/numkit.hpp"

#include <cmath>

namespace tsclimb {

void require(bool cond, const std::string& msg) {
  if (!cond) throw contract_error(msg);
}

bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double dot(const Vec& x, const Vec& y) {
  require(x.size() == y.size(), "dot: length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

double norm_inf(const Vec& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

void axpy(double alpha, const Vec& x, Vec& y) {
  require(x.size() == y.size(), "axpy: length mismatch");
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) : seed_(seed) {
  uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] keeps the log finite
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Vec Rng::normal_vec(int n) {
  Vec out(static_cast<size_t>(n));
  for (auto& x : out) x = normal();
  return out;
}

AdamState::AdamState(int n_params, double alpha0_, double kappa_)
    : m(static_cast<size_t>(n_params), 0.0),
      v(static_cast<size_t>(n_params), 0.0),
      alpha0(alpha0_),
      kappa(kappa_) {}

void adam_step(AdamState& state, Vec& params, const Vec& grad) {
  require(params.size() == grad.size() && params.size() == state.m.size() &&
              params.size() == state.v.size(),
          "adam_step: shape mismatch between params, grad and moments");
  if (!all_finite(grad)) throw numeric_error("adam_step: non-finite gradient");

  const double alpha = state.learning_rate();
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= alpha * mhat / (std::sqrt(vhat) + state.eps);
  }
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  Vec xp = x;
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw numeric_error("finite_diff_grad: non-finite f at coordinate " + std::to_string(i));
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace tsclimb
