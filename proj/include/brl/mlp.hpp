#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "brl/common.hpp"
#include "brl/rng.hpp"

namespace brl {

enum class Activation { LeakyRelu, Tanh };

struct MlpSpec {
  std::vector<int> layer_widths;  // input, hidden..., output
  Activation activation = Activation::LeakyRelu;
  double leaky_slope = 0.01;

  int input_dim() const { return layer_widths.front(); }
  int output_dim() const { return layer_widths.back(); }
  int num_layers() const { return static_cast<int>(layer_widths.size()) - 1; }
};

// Fully connected network with affine layers and a linear output layer.
// Forward/backward are hand-rolled; parameters flatten to a single vector in
// a fixed canonical order: for each layer in forward order, the weight
// matrix row by row (output-major), then the bias. All gradient code and the
// binary checkpoint format rely on this order.
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    require(spec_.layer_widths.size() >= 3, "Mlp: need at least one hidden layer");
    const int L = spec_.num_layers();
    weights_.resize(L);
    biases_.resize(L);
    for (int l = 0; l < L; ++l) {
      weights_[l] = Mat::Zero(spec_.layer_widths[l + 1], spec_.layer_widths[l]);
      biases_[l] = Vec::Zero(spec_.layer_widths[l + 1]);
    }
  }

  const MlpSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.input_dim(); }
  int output_dim() const { return spec_.output_dim(); }
  int num_layers() const { return spec_.num_layers(); }

  Mat& weight(int l) { return weights_[l]; }
  Vec& bias(int l) { return biases_[l]; }
  const Mat& weight(int l) const { return weights_[l]; }
  const Vec& bias(int l) const { return biases_[l]; }

  int param_count() const {
    int n = 0;
    for (int l = 0; l < num_layers(); ++l)
      n += static_cast<int>(weights_[l].size() + biases_[l].size());
    return n;
  }

  // Orthogonal init for hidden layers, scaled-down final layer. Biases zero.
  void init(Rng& rng, double hidden_gain, double final_gain) {
    const int L = num_layers();
    for (int l = 0; l < L; ++l) {
      const double gain = (l == L - 1) ? final_gain : hidden_gain;
      weights_[l] = orthogonal(static_cast<int>(weights_[l].rows()),
                               static_cast<int>(weights_[l].cols()), gain, rng);
      biases_[l].setZero();
    }
  }

  struct ForwardCache {
    Mat input;                 // N x in
    std::vector<Mat> pre;      // per layer, N x width (pre-activation)
    std::vector<Mat> post;     // per hidden layer, N x width (post-activation)
    const Mat& output() const { return pre.back(); }
  };

  // Batched forward, one sample per row. When check_finite is set, each
  // layer's output is scanned and a NumericFailure naming the layer is
  // thrown on the first non-finite value.
  ForwardCache forward(const Mat& x, bool check_finite = false) const {
    require(x.cols() == input_dim(), "Mlp::forward: input width mismatch");
    const int L = num_layers();
    ForwardCache c;
    c.input = x;
    c.pre.resize(L);
    c.post.resize(L - 1);
    const Mat* cur = &c.input;
    for (int l = 0; l < L; ++l) {
      c.pre[l].noalias() = (*cur) * weights_[l].transpose();
      c.pre[l].rowwise() += biases_[l].transpose();
      if (check_finite && !c.pre[l].allFinite())
        throw NumericFailure("Mlp::forward: non-finite activation at layer " +
                             std::to_string(l));
      if (l < L - 1) {
        c.post[l] = activate(c.pre[l]);
        cur = &c.post[l];
      }
    }
    return c;
  }

  Mat output(const Mat& x) const { return forward(x).pre.back(); }

  // Gradient of sum_i <grad_out_i, y_i> with respect to the flat parameters,
  // where y is the network output batch from the given cache.
  Vec backward(const ForwardCache& c, const Mat& grad_out) const {
    const int L = num_layers();
    Vec flat = Vec::Zero(param_count());
    Mat delta = grad_out;  // N x width of layer L-1 output
    int offset = param_count();
    for (int l = L - 1; l >= 0; --l) {
      const Mat& below = (l == 0) ? c.input : c.post[l - 1];
      const int wsize = static_cast<int>(weights_[l].size());
      const int bsize = static_cast<int>(biases_[l].size());
      offset -= wsize + bsize;
      Mat dW = delta.transpose() * below;
      Vec db = delta.colwise().sum().transpose();
      write_block(flat, offset, dW, db);
      if (l > 0) {
        Mat dA = delta * weights_[l];
        delta = dA.cwiseProduct(activate_grad(c.pre[l - 1]));
      }
    }
    return flat;
  }

  // Forward-mode directional derivative: d(output)/d(params) applied to the
  // flat tangent v, evaluated with the activations already in the cache.
  Mat jvp(const ForwardCache& c, const Vec& v) const {
    require(v.size() == param_count(), "Mlp::jvp: tangent size mismatch");
    const int L = num_layers();
    const int n = static_cast<int>(c.input.rows());
    Mat t = Mat::Zero(n, input_dim());
    int offset = 0;
    for (int l = 0; l < L; ++l) {
      Mat dW(weights_[l].rows(), weights_[l].cols());
      Vec db(biases_[l].size());
      read_block(v, offset, dW, db);
      offset += static_cast<int>(dW.size() + db.size());
      const Mat& below = (l == 0) ? c.input : c.post[l - 1];
      Mat tz = below * dW.transpose() + t * weights_[l].transpose();
      tz.rowwise() += db.transpose();
      if (l < L - 1)
        t = tz.cwiseProduct(activate_grad(c.pre[l]));
      else
        t = std::move(tz);
    }
    return t;
  }

  Vec flatten() const {
    Vec flat(param_count());
    int offset = 0;
    for (int l = 0; l < num_layers(); ++l) {
      write_block(flat, offset, weights_[l], biases_[l]);
      offset += static_cast<int>(weights_[l].size() + biases_[l].size());
    }
    return flat;
  }

  void unflatten(const Vec& flat) {
    require(flat.size() == param_count(), "Mlp::unflatten: size mismatch");
    int offset = 0;
    for (int l = 0; l < num_layers(); ++l) {
      read_block(flat, offset, weights_[l], biases_[l]);
      offset += static_cast<int>(weights_[l].size() + biases_[l].size());
    }
  }

 private:
  Mat activate(const Mat& z) const {
    if (spec_.activation == Activation::Tanh) return z.array().tanh();
    const double s = spec_.leaky_slope;
    return z.unaryExpr([s](double v) { return v >= 0.0 ? v : s * v; });
  }

  Mat activate_grad(const Mat& z) const {
    if (spec_.activation == Activation::Tanh) {
      Mat t = z.array().tanh();
      return 1.0 - t.array().square();
    }
    const double s = spec_.leaky_slope;
    return z.unaryExpr([s](double v) { return v >= 0.0 ? 1.0 : s; });
  }

  static void write_block(Vec& flat, int offset, const Mat& w, const Vec& b) {
    int k = offset;
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) flat[k++] = w(r, c);
    for (int i = 0; i < b.size(); ++i) flat[k++] = b[i];
  }

  static void read_block(const Vec& flat, int offset, Mat& w, Vec& b) {
    int k = offset;
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
    for (int i = 0; i < b.size(); ++i) b[i] = flat[k++];
  }

  static Mat orthogonal(int rows, int cols, double gain, Rng& rng) {
    const int big = std::max(rows, cols);
    const int small = std::min(rows, cols);
    Mat g(big, small);
    for (int r = 0; r < big; ++r)
      for (int c = 0; c < small; ++c) g(r, c) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(big, small);
    Mat r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
    for (int c = 0; c < small; ++c)
      if (r(c, c) < 0.0) q.col(c) *= -1.0;
    Mat w = (rows >= cols) ? q : Mat(q.transpose());
    return gain * w;
  }

  MlpSpec spec_;
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
};

}  // namespace brl
