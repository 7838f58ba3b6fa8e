#include "vtlab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "vtlab/kernels.hpp"
#include "vtlab/rng.hpp"
#include "vtlab/wire.hpp"

namespace vtlab::nn {

namespace {

double apply_act(Activation a, double v) {
  return a == Activation::relu ? (v > 0.0 ? v : 0.0) : v;
}

// Subgradient 0 at exactly 0 (fixed convention).
double act_grad(Activation a, double pre) {
  return a == Activation::relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0;
}

[[noreturn]] void layer_error(std::size_t idx, const std::string& what) {
  throw std::invalid_argument("layer " + std::to_string(idx) + ": " + what);
}

}  // namespace

void Mlp::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.weights.rows == 0 || l.weights.cols == 0)
      layer_error(i, "empty weight matrix");
    if (l.bias.size() != l.out_dim())
      layer_error(i, "bias size " + std::to_string(l.bias.size()) +
                         " != out dim " + std::to_string(l.out_dim()));
    if (i > 0 && l.in_dim() != layers[i - 1].out_dim())
      layer_error(i, "input dim " + std::to_string(l.in_dim()) +
                         " does not chain from previous out dim " +
                         std::to_string(layers[i - 1].out_dim()));
    for (double w : l.weights.data)
      if (!std::isfinite(w)) layer_error(i, "non-finite weight");
    for (double b : l.bias)
      if (!std::isfinite(b)) layer_error(i, "non-finite bias");
  }
}

Mlp make_mlp(const std::vector<std::size_t>& dims,
             const std::vector<Activation>& acts, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need >= 2 dims");
  if (acts.size() != dims.size() - 1)
    throw std::invalid_argument("make_mlp: acts/dims mismatch");
  Mlp net;
  net.seed = seed;
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer l;
    l.weights = Matrix(dims[i + 1], dims[i]);
    l.bias.assign(dims[i + 1], 0.0);
    l.act = acts[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    for (double& w : l.weights.data) w = rng.uniform(-bound, bound);
    for (double& b : l.bias) b = rng.uniform(-bound, bound);
    net.layers.push_back(std::move(l));
  }
  return net;
}

Mlp make_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::identity;
  return make_mlp(dims, acts, seed);
}

Matrix forward(const Mlp& net, const Matrix& inputs, ForwardTrace* trace) {
  if (net.layers.empty()) throw std::invalid_argument("forward: empty net");
  if (inputs.cols != net.input_dim())
    layer_error(0, "batch dim " + std::to_string(inputs.cols) +
                       " != input dim " + std::to_string(net.input_dim()));
  if (trace) {
    trace->input = inputs;
    trace->pre.clear();
    trace->post.clear();
  }
  Matrix cur = inputs;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const Layer& l = net.layers[li];
    Matrix pre(cur.rows, l.out_dim());
    for (std::size_t i = 0; i < cur.rows; ++i)
      for (std::size_t r = 0; r < l.out_dim(); ++r)
        pre.at(i, r) = kern::dot(l.weights.row_span(r), cur.row_span(i)) +
                       l.bias[r];
    Matrix post = pre;
    if (l.act == Activation::relu)
      for (double& v : post.data) v = apply_act(l.act, v);
    if (trace) {
      trace->pre.push_back(pre);
      trace->post.push_back(post);
    }
    cur = std::move(post);
  }
  return cur;
}

Gradients zero_gradients(const Mlp& net) {
  Gradients g;
  for (const Layer& l : net.layers) {
    g.weights.emplace_back(l.weights.rows, l.weights.cols);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

void accumulate(Gradients& into, const Gradients& g, double scale) {
  for (std::size_t li = 0; li < into.weights.size(); ++li) {
    kern::axpy(scale, std::span<const double>(g.weights[li].data),
               std::span<double>(into.weights[li].data));
    kern::axpy(scale, std::span<const double>(g.bias[li]),
               std::span<double>(into.bias[li]));
  }
}

BackwardResult backward(const Mlp& net, const ForwardTrace& trace,
                        const Matrix& output_grad) {
  const std::size_t depth = net.layers.size();
  if (trace.depth() != depth)
    throw std::invalid_argument("backward: trace depth " +
                                std::to_string(trace.depth()) +
                                " != layer count " + std::to_string(depth));
  const std::size_t n = trace.input.rows;
  if (output_grad.rows != n || output_grad.cols != net.output_dim())
    throw std::invalid_argument("backward: output_grad shape mismatch");
  for (std::size_t li = 0; li < depth; ++li)
    if (trace.pre[li].cols != net.layers[li].out_dim() ||
        trace.pre[li].rows != n)
      layer_error(li, "trace does not match params");

  BackwardResult res;
  res.grads = zero_gradients(net);
  Matrix dout = output_grad;
  for (std::size_t li = depth; li-- > 0;) {
    const Layer& l = net.layers[li];
    const Matrix& below = li == 0 ? trace.input : trace.post[li - 1];
    Matrix dpre = dout;
    if (l.act == Activation::relu)
      for (std::size_t i = 0; i < dpre.data.size(); ++i)
        dpre.data[i] *= act_grad(l.act, trace.pre[li].data[i]);
    Matrix din(n, l.in_dim());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < l.out_dim(); ++r) {
        const double g = dpre.at(i, r);
        if (g != 0.0) {
          kern::axpy(g, below.row_span(i), res.grads.weights[li].row_span(r));
          kern::axpy(g, l.weights.row_span(r), din.row_span(i));
        }
        res.grads.bias[li][r] += g;
      }
    }
    dout = std::move(din);
  }
  res.input_grad = std::move(dout);
  return res;
}

void sgd_update(Mlp& net, const Gradients& grads, double lr) {
  if (grads.weights.size() != net.layers.size())
    throw std::invalid_argument("sgd_update: gradient/param layer mismatch");
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    Layer& l = net.layers[li];
    const Matrix& gw = grads.weights[li];
    const std::vector<double>& gb = grads.bias[li];
    if (gw.rows != l.weights.rows || gw.cols != l.weights.cols ||
        gb.size() != l.bias.size())
      layer_error(li, "gradient shape mismatch");
    for (double g : gw.data)
      if (!std::isfinite(g)) layer_error(li, "non-finite weight gradient");
    for (double g : gb)
      if (!std::isfinite(g)) layer_error(li, "non-finite bias gradient");
    kern::axpy(-lr, std::span<const double>(gw.data),
               std::span<double>(l.weights.data));
    kern::axpy(-lr, std::span<const double>(gb), std::span<double>(l.bias));
  }
}

LossGrad softmax_cross_entropy(std::span<const double> logits, int label) {
  const std::size_t c = logits.size();
  if (c < 2) throw std::invalid_argument("softmax_cross_entropy: C < 2");
  if (label < 0 || static_cast<std::size_t>(label) >= c)
    throw std::invalid_argument("softmax_cross_entropy: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  LossGrad out;
  out.grad.resize(c);
  for (std::size_t i = 0; i < c; ++i) {
    out.grad[i] = std::exp(logits[i] - mx);
    denom += out.grad[i];
  }
  for (double& g : out.grad) g /= denom;
  out.loss = -(logits[label] - mx - std::log(denom));
  out.grad[label] -= 1.0;
  return out;
}

double softmax_cross_entropy_batch(const Matrix& logits,
                                   std::span<const int> labels, Matrix* grad) {
  if (logits.rows != labels.size())
    throw std::invalid_argument("softmax_cross_entropy_batch: label count");
  if (grad) *grad = Matrix(logits.rows, logits.cols);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    LossGrad lg = softmax_cross_entropy(logits.row_span(i), labels[i]);
    total += lg.loss;
    if (grad)
      for (std::size_t j = 0; j < logits.cols; ++j)
        grad->at(i, j) = lg.grad[j] * inv_n;
  }
  return total * inv_n;
}

LossGrad mse_loss(std::span<const double> x, std::span<const double> x_rec) {
  if (x.size() != x_rec.size())
    throw std::invalid_argument("mse_loss: length mismatch");
  LossGrad out;
  out.grad.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - x_rec[i];
    out.loss += d * d;
    out.grad[i] = 2.0 * (x_rec[i] - x[i]);
  }
  return out;
}

double mse_loss_batch(const Matrix& x, const Matrix& x_rec, Matrix* grad) {
  if (x.rows != x_rec.rows || x.cols != x_rec.cols)
    throw std::invalid_argument("mse_loss_batch: shape mismatch");
  if (grad) *grad = Matrix(x.rows, x.cols);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - x_rec.data[i];
    total += d * d;
    if (grad) grad->data[i] = 2.0 * (x_rec.data[i] - x.data[i]) * inv_n;
  }
  return total * inv_n;
}

int argmax_row(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

namespace {

constexpr char kMagic[4] = {'V', 'T', 'N', 'N'};
constexpr std::uint16_t kVersion = 1;

void write_bytes(std::ostream& out, const std::vector<std::uint8_t>& buf);

}  // namespace

void save_mlp(std::ostream& out, const Mlp& net) {
  net.validate();
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  wire::put_u16(buf, kVersion);
  wire::put_u16(buf, static_cast<std::uint16_t>(net.layers.size()));
  for (const Layer& l : net.layers) {
    wire::put_u32(buf, static_cast<std::uint32_t>(l.weights.rows));
    wire::put_u32(buf, static_cast<std::uint32_t>(l.weights.cols));
    wire::put_u8(buf, static_cast<std::uint8_t>(l.act));
    for (double w : l.weights.data) wire::put_f64(buf, w);
    for (double b : l.bias) wire::put_f64(buf, b);
  }
  write_bytes(out, buf);
}

namespace {

void write_bytes(std::ostream& out, const std::vector<std::uint8_t>& buf) {
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint write failed");
}

void read_exact(std::istream& in, std::uint8_t* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw std::runtime_error("checkpoint truncated");
}

}  // namespace

Mlp load_mlp(std::istream& in) {
  std::uint8_t hdr[8];
  read_exact(in, hdr, 8);
  if (std::memcmp(hdr, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  if (wire::get_u16(hdr + 4) != kVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  const std::uint16_t layer_count = wire::get_u16(hdr + 6);
  Mlp net;
  for (std::uint16_t li = 0; li < layer_count; ++li) {
    std::uint8_t lh[9];
    read_exact(in, lh, 9);
    const std::uint32_t rows = wire::get_u32(lh);
    const std::uint32_t cols = wire::get_u32(lh + 4);
    const std::uint8_t code = lh[8];
    if (code > 2) throw std::runtime_error("checkpoint: bad activation code");
    Layer l;
    l.act = static_cast<Activation>(code);
    l.weights = Matrix(rows, cols);
    l.bias.assign(rows, 0.0);
    std::vector<std::uint8_t> raw((static_cast<std::size_t>(rows) * cols +
                                   rows) *
                                  8);
    read_exact(in, raw.data(), raw.size());
    const std::uint8_t* p = raw.data();
    for (double& w : l.weights.data) {
      w = wire::get_f64(p);
      p += 8;
    }
    for (double& b : l.bias) {
      b = wire::get_f64(p);
      p += 8;
    }
    net.layers.push_back(std::move(l));
  }
  net.validate();
  return net;
}

void save_mlp_file(const std::string& path, const Mlp& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  save_mlp(out, net);
}

Mlp load_mlp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_mlp(in);
}

}  // namespace vtlab::nn
