#include "tsclimb/mlp.hpp"

#include <cmath>

namespace tsclimb {

Mlp::Mlp(int n_in, const std::vector<int>& hidden, int n_out) : n_in_(n_in), n_out_(n_out) {
  require(n_in >= 1 && n_out >= 1, "Mlp: widths must be positive");
  int prev = n_in;
  for (int h : hidden) {
    require(h >= 1, "Mlp: hidden width must be positive");
    MlpLayer layer;
    layer.w = Mat(h, prev);
    layer.b = Vec(static_cast<size_t>(h), 0.0);
    layer.act = Activation::Tanh;
    layers_.push_back(std::move(layer));
    prev = h;
  }
  MlpLayer out;
  out.w = Mat(n_out, prev);
  out.b = Vec(static_cast<size_t>(n_out), 0.0);
  out.act = Activation::Identity;
  layers_.push_back(std::move(out));
}

int Mlp::n_params() const {
  int n = 0;
  for (const auto& l : layers_) n += l.w.rows * l.w.cols + static_cast<int>(l.b.size());
  return n;
}

Vec Mlp::forward(const Vec& x, MlpCache* cache) const {
  require(static_cast<int>(x.size()) == n_in_, "mlp_forward: input width mismatch");
  if (cache) {
    cache->input = x;
    cache->pre.assign(layers_.size(), {});
    cache->post.assign(layers_.size(), {});
  }
  Vec cur = x;
  for (size_t li = 0; li < layers_.size(); ++li) {
    const MlpLayer& l = layers_[li];
    Vec z(static_cast<size_t>(l.w.rows), 0.0);
    for (int i = 0; i < l.w.rows; ++i) {
      double s = l.b[static_cast<size_t>(i)];
      if (l.masked()) {
        for (int j = 0; j < l.w.cols; ++j) s += l.w(i, j) * l.mask(i, j) * cur[static_cast<size_t>(j)];
      } else {
        for (int j = 0; j < l.w.cols; ++j) s += l.w(i, j) * cur[static_cast<size_t>(j)];
      }
      z[static_cast<size_t>(i)] = s;
    }
    if (cache) cache->pre[li] = z;
    if (l.act == Activation::Tanh)
      for (auto& v : z) v = std::tanh(v);
    if (cache) cache->post[li] = z;
    cur = std::move(z);
  }
  return cur;
}

Vec Mlp::backward(const MlpCache& cache, const Vec& upstream, MlpGrads& grads) const {
  require(cache.pre.size() == layers_.size(), "mlp_backward: stale cache");
  require(static_cast<int>(upstream.size()) == n_out_, "mlp_backward: upstream width mismatch");

  Vec delta = upstream;
  for (size_t li = layers_.size(); li-- > 0;) {
    const MlpLayer& l = layers_[li];
    if (l.act == Activation::Tanh) {
      const Vec& post = cache.post[li];
      for (size_t i = 0; i < delta.size(); ++i) delta[i] *= 1.0 - post[i] * post[i];
    }
    const Vec& in = li == 0 ? cache.input : cache.post[li - 1];
    require(static_cast<int>(in.size()) == l.w.cols, "mlp_backward: stale cache (shape)");
    Mat& dw = grads.dw[li];
    Vec& db = grads.db[li];
    Vec din(in.size(), 0.0);
    for (int i = 0; i < l.w.rows; ++i) {
      const double d = delta[static_cast<size_t>(i)];
      db[static_cast<size_t>(i)] += d;
      for (int j = 0; j < l.w.cols; ++j) {
        const double m = l.masked() ? l.mask(i, j) : 1.0;
        dw(i, j) += d * m * in[static_cast<size_t>(j)];
        din[static_cast<size_t>(j)] += d * m * l.w(i, j);
      }
    }
    delta = std::move(din);
  }
  return delta;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  for (const auto& l : layers_) {
    g.dw.emplace_back(l.w.rows, l.w.cols);
    g.db.emplace_back(l.b.size(), 0.0);
  }
  return g;
}

void Mlp::get_params(double* out) const {
  for (const auto& l : layers_) {
    for (double v : l.w.a) *out++ = v;
    for (double v : l.b) *out++ = v;
  }
}

void Mlp::set_params(const double* in) {
  for (auto& l : layers_) {
    for (double& v : l.w.a) v = *in++;
    for (double& v : l.b) v = *in++;
  }
}

void Mlp::flatten_grads(const MlpGrads& grads, double* out) {
  for (size_t li = 0; li < grads.dw.size(); ++li) {
    for (double v : grads.dw[li].a) *out++ = v;
    for (double v : grads.db[li]) *out++ = v;
  }
}

void Mlp::init_hidden_random(Rng& rng, double scale) {
  for (size_t li = 0; li + 1 < layers_.size(); ++li) {
    MlpLayer& l = layers_[li];
    const double bound = scale / std::sqrt(static_cast<double>(l.w.cols));
    for (double& v : l.w.a) v = bound * (2.0 * rng.uniform() - 1.0);
  }
}

}  // namespace tsclimb
