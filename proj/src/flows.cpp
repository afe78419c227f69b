#include "tsclimb/flows.hpp"

#include <cmath>

namespace tsclimb {

namespace {

constexpr double kLogScaleClamp = 10.0;

double clamp_log_scale(double x) {
  return x < -kLogScaleClamp ? -kLogScaleClamp : (x > kLogScaleClamp ? kLogScaleClamp : x);
}

double clamp_indicator(double x) {
  return (x > -kLogScaleClamp && x < kLogScaleClamp) ? 1.0 : 0.0;
}

void check_layer_finite(const Vec& v, size_t layer_index) {
  if (!all_finite(v))
    throw numeric_error("flow: non-finite value at layer " + std::to_string(layer_index));
}

// Elementwise shift and scale: z = mu + exp(logsig) .* eps.
class AffineLayer final : public FlowLayer {
 public:
  explicit AffineLayer(int d) : d_(d), mu_(static_cast<size_t>(d), 0.0), logsig_(static_cast<size_t>(d), 0.0) {}

  int dim() const override { return d_; }
  int n_params() const override { return 2 * d_; }

  void get_params(double* out) const override {
    for (double v : mu_) *out++ = v;
    for (double v : logsig_) *out++ = v;
  }
  void set_params(const double* in) override {
    for (double& v : mu_) v = *in++;
    for (double& v : logsig_) v = *in++;
  }

  double forward(const Vec& eps, Vec& z) const override {
    z.resize(eps.size());
    double logdet = 0.0;
    for (int i = 0; i < d_; ++i) {
      const double ls = clamp_log_scale(logsig_[i]);
      z[i] = mu_[i] + std::exp(ls) * eps[i];
      logdet += ls;
    }
    return logdet;
  }

  double inverse(const Vec& z, Vec& eps) const override {
    eps.resize(z.size());
    double logdet = 0.0;
    for (int i = 0; i < d_; ++i) {
      const double ls = clamp_log_scale(logsig_[i]);
      const double sig = std::exp(ls);
      if (sig <= 1e-12) throw numeric_error("affine inverse: scale underflow");
      eps[i] = (z[i] - mu_[i]) / sig;
      logdet += ls;
    }
    return logdet;
  }

  void forward_vjp(const Vec& eps, const Vec& u, double c, Vec& d_eps, double* d_params) const override {
    d_eps.assign(eps.size(), 0.0);
    for (int i = 0; i < d_; ++i) {
      const double ls = clamp_log_scale(logsig_[i]);
      const double sig = std::exp(ls);
      const double ind = clamp_indicator(logsig_[i]);
      d_eps[i] = u[i] * sig;
      d_params[i] += u[i];
      d_params[d_ + i] += (u[i] * eps[i] * sig + c) * ind;
    }
  }

  void inverse_vjp(const Vec& z, const Vec& u, double c, Vec& d_z, double* d_params) const override {
    Vec eps;
    inverse(z, eps);
    d_z.assign(z.size(), 0.0);
    for (int i = 0; i < d_; ++i) {
      const double sig = std::exp(clamp_log_scale(logsig_[i]));
      const double ind = clamp_indicator(logsig_[i]);
      d_z[i] = u[i] / sig;
      d_params[i] += -u[i] / sig;
      d_params[d_ + i] += (-u[i] * eps[i] - c) * ind;
    }
  }

  std::unique_ptr<FlowLayer> clone() const override { return std::make_unique<AffineLayer>(*this); }

 private:
  int d_;
  Vec mu_;
  Vec logsig_;
};

// Conditioner output layout: [shift_1..shift_d, log_scale_1..log_scale_d].
Mlp make_conditioner(int d, const std::vector<int>& hidden) { return Mlp(d, hidden, 2 * d); }

// Autoregressive transform z_i = eps_i * exp(s_i(eps_{<i})) + m_i(eps_{<i}).
// The conditioner is a single MLP whose connectivity masks enforce that
// outputs for coordinate i read only eps_1..eps_{i-1}; coordinate 1 ends up
// driven by the output-layer bias alone, an unconditional shift/log-scale.
class IafLayer final : public FlowLayer {
 public:
  IafLayer(int d, const std::vector<int>& hidden) : d_(d), net_(make_conditioner(d, hidden)) {
    apply_masks(hidden);
  }

  int dim() const override { return d_; }
  int n_params() const override { return net_.n_params(); }
  void get_params(double* out) const override { net_.get_params(out); }
  void set_params(const double* in) override { net_.set_params(in); }

  Mlp& net() { return net_; }

  double forward(const Vec& eps, Vec& z) const override {
    const Vec out = net_.forward(eps);
    z.resize(eps.size());
    double logdet = 0.0;
    for (int i = 0; i < d_; ++i) {
      const double sc = clamp_log_scale(out[d_ + i]);
      z[i] = eps[i] * std::exp(sc) + out[i];
      logdet += sc;
    }
    return logdet;
  }

  double inverse(const Vec& z, Vec& eps) const override {
    // Coordinate-by-coordinate: outputs for coordinate i only read the
    // already-recovered eps_1..eps_{i-1}, so a fresh pass per coordinate
    // over the partially filled vector is exact.
    eps.assign(z.size(), 0.0);
    for (int i = 0; i < d_; ++i) {
      const Vec out = net_.forward(eps);
      const double sc = clamp_log_scale(out[d_ + i]);
      const double sig = std::exp(sc);
      if (sig <= 1e-12) throw numeric_error("iaf inverse: scale underflow");
      eps[i] = (z[i] - out[i]) / sig;
    }
    double logdet = 0.0;
    const Vec out = net_.forward(eps);
    for (int i = 0; i < d_; ++i) logdet += clamp_log_scale(out[d_ + i]);
    return logdet;
  }

  void forward_vjp(const Vec& eps, const Vec& u, double c, Vec& d_eps, double* d_params) const override {
    MlpCache cache;
    const Vec out = net_.forward(eps, &cache);
    Vec g(static_cast<size_t>(2 * d_), 0.0);
    d_eps.assign(eps.size(), 0.0);
    for (int i = 0; i < d_; ++i) {
      const double sc = clamp_log_scale(out[d_ + i]);
      const double sig = std::exp(sc);
      const double ind = clamp_indicator(out[d_ + i]);
      d_eps[i] = u[i] * sig;
      g[i] = u[i];
      g[d_ + i] = (u[i] * eps[i] * sig + c) * ind;
    }
    MlpGrads grads = net_.zero_grads();
    const Vec din = net_.backward(cache, g, grads);
    axpy(1.0, din, d_eps);
    accumulate_net_grads(grads, d_params);
  }

  void inverse_vjp(const Vec& z, const Vec& u, double c, Vec& d_z, double* d_params) const override {
    Vec eps;
    inverse(z, eps);
    MlpCache cache;
    const Vec out = net_.forward(eps, &cache);

    // The inversion is a triangular recursion; its adjoint runs over the
    // coordinates in reverse, pushing each coordinate's shift/scale
    // adjoints back through the conditioner before earlier coordinates
    // are finalized.
    Vec ebar = u;
    d_z.assign(z.size(), 0.0);
    MlpGrads grads = net_.zero_grads();
    for (int i = d_ - 1; i >= 0; --i) {
      const double a = ebar[i];
      const double sc = clamp_log_scale(out[d_ + i]);
      const double inv_sig = std::exp(-sc);
      const double ind = clamp_indicator(out[d_ + i]);
      d_z[i] = a * inv_sig;
      Vec g(static_cast<size_t>(2 * d_), 0.0);
      g[i] = -a * inv_sig;
      g[d_ + i] = (-a * eps[i] - c) * ind;
      const Vec din = net_.backward(cache, g, grads);
      axpy(1.0, din, ebar);
    }
    accumulate_net_grads(grads, d_params);
  }

  std::unique_ptr<FlowLayer> clone() const override { return std::make_unique<IafLayer>(*this); }

 private:
  void accumulate_net_grads(const MlpGrads& grads, double* d_params) const {
    Vec flat(static_cast<size_t>(net_.n_params()), 0.0);
    Mlp::flatten_grads(grads, flat.data());
    for (size_t i = 0; i < flat.size(); ++i) d_params[i] += flat[i];
  }

  // Degree-based masks. Inputs carry degrees 1..d, hidden units cycle over
  // 1..d-1, and output units for coordinate i carry degree i with a strict
  // comparison, which removes every path from eps_{>=i} to (m_i, s_i).
  void apply_masks(const std::vector<int>& hidden) {
    std::vector<int> prev_deg(static_cast<size_t>(d_));
    for (int i = 0; i < d_; ++i) prev_deg[i] = i + 1;
    auto& layers = net_.layers();
    for (size_t li = 0; li + 1 < layers.size(); ++li) {
      const int width = layers[li].w.rows;
      std::vector<int> deg(static_cast<size_t>(width));
      for (int k = 0; k < width; ++k) deg[k] = d_ > 1 ? (k % (d_ - 1)) + 1 : 0;
      Mat mask(width, layers[li].w.cols);
      for (int r = 0; r < width; ++r)
        for (int cidx = 0; cidx < layers[li].w.cols; ++cidx)
          mask(r, cidx) = deg[r] >= prev_deg[cidx] ? 1.0 : 0.0;
      layers[li].mask = std::move(mask);
      prev_deg = std::move(deg);
    }
    MlpLayer& out = layers.back();
    Mat mask(out.w.rows, out.w.cols);
    for (int r = 0; r < out.w.rows; ++r) {
      const int coord = r % d_;  // rows [0,d) are shifts, [d,2d) log-scales
      for (int cidx = 0; cidx < out.w.cols; ++cidx)
        mask(r, cidx) = (coord + 1) > prev_deg[cidx] ? 1.0 : 0.0;
    }
    out.mask = std::move(mask);
    (void)hidden;
  }

  int d_;
  Mlp net_;
};

// Affine coupling: coordinates with mask bit 1 pass through and feed the
// conditioner; the rest are shifted and scaled by its outputs.
class RealNvpCoupling final : public FlowLayer {
 public:
  RealNvpCoupling(int d, const std::vector<int>& hidden, int parity)
      : d_(d), parity_(parity), net_(make_conditioner(d, hidden)) {}

  int dim() const override { return d_; }
  int n_params() const override { return net_.n_params(); }
  void get_params(double* out) const override { net_.get_params(out); }
  void set_params(const double* in) override { net_.set_params(in); }

  Mlp& net() { return net_; }

  bool pass_through(int i) const { return i % 2 == parity_; }

  double forward(const Vec& eps, Vec& z) const override {
    const Vec out = net_.forward(masked_input(eps));
    z.resize(eps.size());
    double logdet = 0.0;
    for (int i = 0; i < d_; ++i) {
      if (pass_through(i)) {
        z[i] = eps[i];
      } else {
        const double sc = clamp_log_scale(out[d_ + i]);
        z[i] = eps[i] * std::exp(sc) + out[i];
        logdet += sc;
      }
    }
    return logdet;
  }

  double inverse(const Vec& z, Vec& eps) const override {
    // The conditioner input b.*z equals b.*eps, so the inverse is closed form.
    const Vec out = net_.forward(masked_input(z));
    eps.resize(z.size());
    double logdet = 0.0;
    for (int i = 0; i < d_; ++i) {
      if (pass_through(i)) {
        eps[i] = z[i];
      } else {
        const double sc = clamp_log_scale(out[d_ + i]);
        const double sig = std::exp(sc);
        if (sig <= 1e-12) throw numeric_error("realnvp inverse: scale underflow");
        eps[i] = (z[i] - out[i]) / sig;
        logdet += sc;
      }
    }
    return logdet;
  }

  void forward_vjp(const Vec& eps, const Vec& u, double c, Vec& d_eps, double* d_params) const override {
    MlpCache cache;
    const Vec out = net_.forward(masked_input(eps), &cache);
    Vec g(static_cast<size_t>(2 * d_), 0.0);
    d_eps.assign(eps.size(), 0.0);
    for (int i = 0; i < d_; ++i) {
      if (pass_through(i)) {
        d_eps[i] = u[i];
      } else {
        const double sc = clamp_log_scale(out[d_ + i]);
        const double sig = std::exp(sc);
        const double ind = clamp_indicator(out[d_ + i]);
        d_eps[i] = u[i] * sig;
        g[i] = u[i];
        g[d_ + i] = (u[i] * eps[i] * sig + c) * ind;
      }
    }
    MlpGrads grads = net_.zero_grads();
    const Vec din = net_.backward(cache, g, grads);
    for (int i = 0; i < d_; ++i)
      if (pass_through(i)) d_eps[i] += din[i];
    accumulate_net_grads(grads, d_params);
  }

  void inverse_vjp(const Vec& z, const Vec& u, double c, Vec& d_z, double* d_params) const override {
    MlpCache cache;
    const Vec out = net_.forward(masked_input(z), &cache);
    Vec g(static_cast<size_t>(2 * d_), 0.0);
    d_z.assign(z.size(), 0.0);
    for (int i = 0; i < d_; ++i) {
      if (pass_through(i)) {
        d_z[i] = u[i];
      } else {
        const double sc = clamp_log_scale(out[d_ + i]);
        const double inv_sig = std::exp(-sc);
        const double ind = clamp_indicator(out[d_ + i]);
        const double eps_i = (z[i] - out[i]) * inv_sig;
        d_z[i] = u[i] * inv_sig;
        g[i] = -u[i] * inv_sig;
        g[d_ + i] = (-u[i] * eps_i - c) * ind;
      }
    }
    MlpGrads grads = net_.zero_grads();
    const Vec din = net_.backward(cache, g, grads);
    for (int i = 0; i < d_; ++i)
      if (pass_through(i)) d_z[i] += din[i];
    accumulate_net_grads(grads, d_params);
  }

  std::unique_ptr<FlowLayer> clone() const override { return std::make_unique<RealNvpCoupling>(*this); }

 private:
  Vec masked_input(const Vec& x) const {
    Vec in(x.size(), 0.0);
    for (int i = 0; i < d_; ++i)
      if (pass_through(i)) in[i] = x[i];
    return in;
  }

  void accumulate_net_grads(const MlpGrads& grads, double* d_params) const {
    Vec flat(static_cast<size_t>(net_.n_params()), 0.0);
    Mlp::flatten_grads(grads, flat.data());
    for (size_t i = 0; i < flat.size(); ++i) d_params[i] += flat[i];
  }

  int d_;
  int parity_;
  Mlp net_;
};

}  // namespace

std::string flow_kind_name(FlowKind k) {
  switch (k) {
    case FlowKind::Identity: return "identity";
    case FlowKind::Affine: return "affine";
    case FlowKind::Iaf: return "iaf";
    case FlowKind::RealNvp: return "realnvp";
    case FlowKind::Stack: return "stack";
  }
  return "unknown";
}

TransportMap TransportMap::identity(int d) {
  require(d >= 1, "TransportMap: dimension must be positive");
  TransportMap m;
  m.kind_ = FlowKind::Identity;
  m.d_ = d;
  return m;
}

TransportMap TransportMap::affine(int d) {
  require(d >= 1, "TransportMap: dimension must be positive");
  TransportMap m;
  m.kind_ = FlowKind::Affine;
  m.d_ = d;
  m.layers_.push_back(std::make_unique<AffineLayer>(d));
  return m;
}

TransportMap TransportMap::iaf(int d, int n_stack, const std::vector<int>& hidden, uint64_t init_seed) {
  require(d >= 1 && n_stack >= 1, "TransportMap::iaf: bad sizes");
  TransportMap m;
  m.kind_ = FlowKind::Iaf;
  m.d_ = d;
  Rng rng(init_seed);
  for (int l = 0; l < n_stack; ++l) {
    auto layer = std::make_unique<IafLayer>(d, hidden);
    layer->net().init_hidden_random(rng);
    m.layers_.push_back(std::move(layer));
  }
  return m;
}

TransportMap TransportMap::realnvp(int d, int n_stack, const std::vector<int>& hidden, uint64_t init_seed) {
  require(d >= 1 && n_stack >= 1, "TransportMap::realnvp: bad sizes");
  TransportMap m;
  m.kind_ = FlowKind::RealNvp;
  m.d_ = d;
  Rng rng(init_seed);
  for (int l = 0; l < n_stack; ++l) {
    // Alternating checkerboard: layer 0 passes even coordinates through,
    // layer 1 the complement, and so on.
    auto layer = std::make_unique<RealNvpCoupling>(d, hidden, l % 2);
    layer->net().init_hidden_random(rng);
    m.layers_.push_back(std::move(layer));
  }
  return m;
}

TransportMap TransportMap::stack(std::vector<TransportMap> parts) {
  require(!parts.empty(), "TransportMap::stack: empty stack");
  TransportMap m;
  m.kind_ = FlowKind::Stack;
  m.d_ = parts.front().dim();
  for (auto& p : parts) {
    require(p.dim() == m.d_, "TransportMap::stack: dimension mismatch");
    for (auto& l : p.layers_) m.layers_.push_back(std::move(l));
  }
  return m;
}

TransportMap::TransportMap(const TransportMap& other) : kind_(other.kind_), d_(other.d_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

TransportMap& TransportMap::operator=(const TransportMap& other) {
  if (this == &other) return *this;
  kind_ = other.kind_;
  d_ = other.d_;
  layers_.clear();
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
  return *this;
}

int TransportMap::n_params() const {
  int n = 0;
  for (const auto& l : layers_) n += l->n_params();
  return n;
}

Vec TransportMap::params() const {
  Vec p(static_cast<size_t>(n_params()));
  double* out = p.data();
  for (const auto& l : layers_) {
    l->get_params(out);
    out += l->n_params();
  }
  return p;
}

void TransportMap::set_params(const Vec& p) {
  require(static_cast<int>(p.size()) == n_params(), "TransportMap::set_params: length mismatch");
  const double* in = p.data();
  for (auto& l : layers_) {
    l->set_params(in);
    in += l->n_params();
  }
}

FlowForward TransportMap::forward(const Vec& eps) const {
  require(static_cast<int>(eps.size()) == d_, "TransportMap::forward: dimension mismatch");
  FlowForward res;
  res.z = eps;
  res.logdet = 0.0;
  Vec next;
  for (size_t li = 0; li < layers_.size(); ++li) {
    res.logdet += layers_[li]->forward(res.z, next);
    check_layer_finite(next, li);
    res.z = next;
  }
  return res;
}

Vec TransportMap::inverse(const Vec& z) const {
  require(static_cast<int>(z.size()) == d_, "TransportMap::inverse: dimension mismatch");
  Vec eps = z;
  Vec next;
  for (size_t li = layers_.size(); li-- > 0;) {
    layers_[li]->inverse(eps, next);
    check_layer_finite(next, li);
    eps = next;
  }
  return eps;
}

double TransportMap::log_q(const Vec& z) const {
  require(static_cast<int>(z.size()) == d_, "TransportMap::log_q: dimension mismatch");
  Vec eps = z;
  Vec next;
  double logdet = 0.0;
  for (size_t li = layers_.size(); li-- > 0;) {
    logdet += layers_[li]->inverse(eps, next);
    check_layer_finite(next, li);
    eps = next;
  }
  return base_log_density(eps) - logdet;
}

Vec TransportMap::grad_log_q_params(const Vec& z) const {
  require(static_cast<int>(z.size()) == d_, "TransportMap::grad_log_q_params: dimension mismatch");
  const size_t n_layers = layers_.size();
  // xs[l] is the input of layer l on the forward path; xs[n_layers] = z.
  std::vector<Vec> xs(n_layers + 1);
  xs[n_layers] = z;
  for (size_t li = n_layers; li-- > 0;) {
    layers_[li]->inverse(xs[li + 1], xs[li]);
    check_layer_finite(xs[li], li);
  }

  Vec d_params(static_cast<size_t>(n_params()), 0.0);
  // log q = log N(eps; 0, I) + sum of per-layer inverse logdets.
  Vec u(xs[0].size());
  for (size_t i = 0; i < u.size(); ++i) u[i] = -xs[0][i];
  Vec u_next;
  double* dp = d_params.data();
  for (size_t li = 0; li < n_layers; ++li) {
    layers_[li]->inverse_vjp(xs[li + 1], u, 1.0, u_next, dp);
    dp += layers_[li]->n_params();
    u = u_next;
  }
  return d_params;
}

Vec TransportMap::forward_pullback(const Vec& eps, const Vec& u, double c, Vec* d_params) const {
  require(static_cast<int>(eps.size()) == d_, "TransportMap::forward_pullback: dimension mismatch");
  const size_t n_layers = layers_.size();
  std::vector<Vec> xs(n_layers + 1);
  xs[0] = eps;
  Vec tmp;
  for (size_t li = 0; li < n_layers; ++li) {
    layers_[li]->forward(xs[li], tmp);
    check_layer_finite(tmp, li);
    xs[li + 1] = tmp;
  }

  Vec cur = u;
  Vec next;
  // Walk layers back to front; each layer's logdet enters the total with
  // the same weight c.
  std::vector<int> offsets(n_layers, 0);
  int off = 0;
  for (size_t li = 0; li < n_layers; ++li) {
    offsets[li] = off;
    off += layers_[li]->n_params();
  }
  Vec dummy;
  if (d_params)
    d_params->assign(static_cast<size_t>(n_params()), 0.0);
  else
    dummy.assign(static_cast<size_t>(n_params()), 0.0);
  double* dp = d_params ? d_params->data() : dummy.data();
  for (size_t li = n_layers; li-- > 0;) {
    layers_[li]->forward_vjp(xs[li], cur, c, next, dp + offsets[li]);
    cur = next;
  }
  return cur;
}

ForwardGrads TransportMap::grad_forward_inputs(const Vec& eps, const Vec& u) const {
  ForwardGrads g;
  Vec dp;
  g.u_dz_deps = forward_pullback(eps, u, 0.0, &dp);
  g.u_dz_dparams = dp;
  const Vec zero(eps.size(), 0.0);
  g.dlogdet_deps = forward_pullback(eps, zero, 1.0, &dp);
  g.dlogdet_dparams = dp;
  return g;
}

double base_log_density(const Vec& eps) {
  double s = 0.0;
  for (double e : eps) s += e * e;
  return -0.5 * s - 0.5 * static_cast<double>(eps.size()) * std::log(2.0 * M_PI);
}

}  // namespace tsclimb
