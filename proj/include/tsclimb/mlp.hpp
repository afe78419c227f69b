#pragma once

#include "tsclimb/numkit.hpp"

namespace tsclimb {

enum class Activation { Tanh, Identity };

// Small dense multilayer perceptron with explicit reverse-mode gradients.
// Layers may carry a binary connectivity mask; masked weights act as zero
// in the forward pass and receive zero gradient, which is how the
// autoregressive conditioner enforces its dependency structure.
struct MlpLayer {
  Mat w;      // out x in
  Vec b;      // out
  Mat mask;   // same shape as w; empty means fully connected
  Activation act = Activation::Tanh;

  bool masked() const { return mask.size() != 0; }
};

struct MlpCache {
  Vec input;
  std::vector<Vec> pre;   // pre-activation per layer
  std::vector<Vec> post;  // activation output per layer
};

struct MlpGrads {
  std::vector<Mat> dw;
  std::vector<Vec> db;
};

class Mlp {
 public:
  Mlp() = default;
  // Hidden layers tanh, output layer identity. All parameters start at zero.
  Mlp(int n_in, const std::vector<int>& hidden, int n_out);

  int n_in() const { return n_in_; }
  int n_out() const { return n_out_; }
  int n_params() const;

  std::vector<MlpLayer>& layers() { return layers_; }
  const std::vector<MlpLayer>& layers() const { return layers_; }

  Vec forward(const Vec& x, MlpCache* cache = nullptr) const;
  // Gradients of <upstream, forward(x)> w.r.t. x and all parameters.
  Vec backward(const MlpCache& cache, const Vec& upstream, MlpGrads& grads) const;

  MlpGrads zero_grads() const;

  void get_params(double* out) const;
  void set_params(const double* in);
  // Writes grads into a flat buffer using the same layout as get_params.
  static void flatten_grads(const MlpGrads& grads, double* out);

  // Seeded uniform(-scale/sqrt(fan_in), +scale/sqrt(fan_in)) init of the
  // hidden layers; the output layer stays zero so the surrounding flow
  // starts exactly at the identity.
  void init_hidden_random(Rng& rng, double scale = 0.1);

 private:
  int n_in_ = 0;
  int n_out_ = 0;
  std::vector<MlpLayer> layers_;
};

}  // namespace tsclimb
