#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vtlab/matrix.hpp"

namespace vtlab::nn {

// `none` is accepted as a synonym for identity; the distinction only
// survives in checkpoints.
enum class Activation : std::uint8_t { identity = 0, relu = 1, none = 2 };

struct Layer {
  Matrix weights;            // [out x in]
  std::vector<double> bias;  // [out]
  Activation act = Activation::identity;

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }
};

// A plain feedforward network. Value semantics: training and fine-tuning
// operate on copies, never on shared state.
struct Mlp {
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  std::size_t input_dim() const {
    return layers.empty() ? 0 : layers.front().in_dim();
  }
  std::size_t output_dim() const {
    return layers.empty() ? 0 : layers.back().out_dim();
  }

  // Checks the dimension chain and that every parameter is finite.
  // Throws std::invalid_argument naming the offending layer.
  void validate() const;
};

struct Batch {
  Matrix inputs;            // [n x d]
  std::vector<int> labels;  // empty when unlabeled
};

// Per-layer pre-activations and activations kept for the backward pass.
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  std::size_t depth() const { return pre.size(); }
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> bias;
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], fully determined by
// the seed. `dims` is {in, h1, ..., out}; acts has dims.size()-1 entries.
Mlp make_mlp(const std::vector<std::size_t>& dims,
             const std::vector<Activation>& acts, std::uint64_t seed);

// Convenience: relu on every layer except an identity last layer.
Mlp make_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed);

// Pure function of (params, inputs). Pass a trace to enable backward().
Matrix forward(const Mlp& net, const Matrix& inputs,
               ForwardTrace* trace = nullptr);

// Exact gradients of the traced computation w.r.t. every parameter and the
// input batch. ReLU uses subgradient 0 at exactly 0.
struct BackwardResult {
  Gradients grads;
  Matrix input_grad;
};
BackwardResult backward(const Mlp& net, const ForwardTrace& trace,
                        const Matrix& output_grad);

Gradients zero_gradients(const Mlp& net);
void accumulate(Gradients& into, const Gradients& g, double scale = 1.0);

// p <- p - lr * g. Rejects non-finite gradients.
void sgd_update(Mlp& net, const Gradients& grads, double lr);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// loss = -log softmax(logits)[label], max-subtraction stabilized;
// grad = softmax(logits) - onehot(label). Requires >= 2 classes.
LossGrad softmax_cross_entropy(std::span<const double> logits, int label);

// Mean loss over the batch; grad matrix scaled by 1/n.
double softmax_cross_entropy_batch(const Matrix& logits,
                                   std::span<const int> labels, Matrix* grad);

// loss = |x - x_rec|^2 (single vector, n = 1); grad w.r.t. x_rec.
LossGrad mse_loss(std::span<const double> x, std::span<const double> x_rec);

// Batch mean of squared L2 norms; grad w.r.t. x_rec is 2(x_rec - x)/n.
double mse_loss_batch(const Matrix& x, const Matrix& x_rec, Matrix* grad);

int argmax_row(std::span<const double> v);  // ties -> lowest index

// Checkpoint container: magic "VTNN", u16 version, u16 layer count, then
// per layer u32 rows, u32 cols, u8 activation code, row-major f64 LE
// weights, f64 LE biases.
void save_mlp(std::ostream& out, const Mlp& net);
Mlp load_mlp(std::istream& in);
void save_mlp_file(const std::string& path, const Mlp& net);
Mlp load_mlp_file(const std::string& path);

}  // namespace vtlab::nn
