#pragma once

#include <Eigen/Core>

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "twoview/errors.hpp"
#include "twoview/netforge/tensor.hpp"
#include "twoview/rng.hpp"

namespace twoview::netforge {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatR<T>>;
template <typename T>
using MapC = Eigen::Map<const MatR<T>>;

enum class Scope { Backbone, TowerCC, TowerMLO, Head };

inline const char* to_string(Scope s) {
  switch (s) {
    case Scope::Backbone: return "backbone";
    case Scope::TowerCC: return "tower_cc";
    case Scope::TowerMLO: return "tower_mlo";
    default: return "head";
  }
}

// One named tensor: a trainable parameter or a persistent buffer
// (normalization running statistics).
template <typename T>
struct ParamTensor {
  std::string name;
  Tensor<T> value;
  bool is_buffer = false;
  int id = -1;  // global index assigned at graph finalize
};

// Per-sample activation storage plus normalization-statistics scratch.
template <typename T>
struct SampleContext {
  std::vector<Tensor<T>> act;
  std::vector<Tensor<T>> grad;
};

// Per-chunk gradient and statistics accumulators, folded in chunk order.
template <typename T>
struct GradBuffers {
  std::vector<Tensor<T>> grads;                 // indexed by param id
  std::vector<std::vector<double>> norm_sum;    // indexed by node id
  std::vector<std::vector<double>> norm_sumsq;  // indexed by node id
  std::size_t norm_count = 0;                   // samples accumulated
};

// "Same" padding with ceil-division output size; the extra pad pixel goes to
// the bottom/right.
inline int same_out(int in, int stride) { return (in + stride - 1) / stride; }
inline int same_pad_begin(int in, int k, int stride) {
  const int out = same_out(in, stride);
  const int total = std::max((out - 1) * stride + k - in, 0);
  return total / 2;
}

template <typename T>
class Node {
 public:
  virtual ~Node() = default;

  int id = -1;
  std::string group;  // layer-group name, "" for parameterless glue
  Scope scope = Scope::Backbone;
  std::vector<int> inputs;

  virtual std::string type() const = 0;
  virtual Shape infer(const std::vector<Shape>& in) const = 0;
  virtual void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const = 0;
  // Accumulates input gradients into `din` (already sized and zero or
  // partially accumulated) and parameter gradients into `sink`.
  virtual void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>& out,
                        const Tensor<T>& dout, const std::vector<Tensor<T>*>& din,
                        GradBuffers<T>& sink) const = 0;
  virtual std::vector<ParamTensor<T>*> params() { return {}; }
  virtual std::vector<const ParamTensor<T>*> params() const { return {}; }
  // Normalization statistics accumulation hook (BatchNorm only).
  virtual void accumulate_stats(const Tensor<T>&, GradBuffers<T>&) const {}
};

// ---- concrete nodes ----

// Replicates the single grayscale channel to the backbone's input channels.
template <typename T>
class InputNode final : public Node<T> {
 public:
  InputNode(int input_index, int out_channels)
      : input_index_(input_index), out_channels_(out_channels) {}
  std::string type() const override { return "input"; }
  int input_index() const { return input_index_; }
  Shape infer(const std::vector<Shape>& in) const override {
    return {out_channels_, in[0].h, in[0].w};
  }
  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    const Tensor<T>& x = *in[0];
    out.resize({out_channels_, x.h, x.w});
    for (int ch = 0; ch < out_channels_; ++ch)
      std::copy(x.channel(0), x.channel(0) + static_cast<std::size_t>(x.h) * x.w,
                out.channel(ch));
  }
  void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>&, const Tensor<T>&,
                const std::vector<Tensor<T>*>&, GradBuffers<T>&) const override {}

 private:
  int input_index_;
  int out_channels_;
};

template <typename T>
class Conv2dNode final : public Node<T> {
 public:
  Conv2dNode(int in_c, int out_c, int k, int stride)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride) {
    w_.name = "w";
    w_.value.resize({out_c, in_c * k, k});  // logical (out_c, in_c, k, k)
  }
  std::string type() const override { return "conv"; }
  int kernel() const { return k_; }
  int stride() const { return stride_; }

  Shape infer(const std::vector<Shape>& in) const override {
    if (in[0].c != in_c_)
      throw ConfigError("conv " + this->group + ": expected " + std::to_string(in_c_) +
                        " input channels, got " + std::to_string(in[0].c));
    return {out_c_, same_out(in[0].h, stride_), same_out(in[0].w, stride_)};
  }

  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    const Tensor<T>& x = *in[0];
    const Shape os = infer({x.shape()});
    out.resize(os);
    if (k_ == 1 && stride_ == 1) {
      MapC<T> X(x.data(), in_c_, static_cast<Eigen::Index>(x.h) * x.w);
      MapC<T> W(w_.value.data(), out_c_, in_c_);
      MapM<T> Y(out.data(), out_c_, static_cast<Eigen::Index>(os.h) * os.w);
      Y.noalias() = W * X;
      return;
    }
    std::vector<T> patches;
    im2col(x, os, patches);
    MapC<T> P(patches.data(), static_cast<Eigen::Index>(in_c_) * k_ * k_,
              static_cast<Eigen::Index>(os.h) * os.w);
    MapC<T> W(w_.value.data(), out_c_, static_cast<Eigen::Index>(in_c_) * k_ * k_);
    MapM<T> Y(out.data(), out_c_, static_cast<Eigen::Index>(os.h) * os.w);
    Y.noalias() = W * P;
  }

  void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>& out,
                const Tensor<T>& dout, const std::vector<Tensor<T>*>& din,
                GradBuffers<T>& sink) const override {
    const Tensor<T>& x = *in[0];
    const Shape os = out.shape();
    Tensor<T>& gw = sink.grads[w_.id];
    const Eigen::Index hw = static_cast<Eigen::Index>(os.h) * os.w;
    if (k_ == 1 && stride_ == 1) {
      MapC<T> X(x.data(), in_c_, hw);
      MapC<T> W(w_.value.data(), out_c_, in_c_);
      MapC<T> dY(dout.data(), out_c_, hw);
      MapM<T> dW(gw.data(), out_c_, in_c_);
      dW.noalias() += dY * X.transpose();
      if (din[0]) {
        MapM<T> dX(din[0]->data(), in_c_, hw);
        dX.noalias() += W.transpose() * dY;
      }
      return;
    }
    std::vector<T> patches;
    im2col(x, os, patches);
    const Eigen::Index pk = static_cast<Eigen::Index>(in_c_) * k_ * k_;
    MapC<T> P(patches.data(), pk, hw);
    MapC<T> dY(dout.data(), out_c_, hw);
    MapM<T> dW(gw.data(), out_c_, pk);
    dW.noalias() += dY * P.transpose();
    if (din[0]) {
      std::vector<T> dpatches(static_cast<std::size_t>(pk) * hw);
      MapM<T> dP(dpatches.data(), pk, hw);
      MapC<T> W(w_.value.data(), out_c_, pk);
      dP.noalias() = W.transpose() * dY;
      col2im(dpatches, os, *din[0]);
    }
  }

  std::vector<ParamTensor<T>*> params() override { return {&w_}; }
  std::vector<const ParamTensor<T>*> params() const override { return {&w_}; }

  void init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in_c_) * k_ * k_));
    for (auto& v : w_.value.v) v = static_cast<T>(rng.normal(0.0, stddev));
  }

 private:
  void im2col(const Tensor<T>& x, const Shape& os, std::vector<T>& patches) const {
    const int pad_y = same_pad_begin(x.h, k_, stride_);
    const int pad_x = same_pad_begin(x.w, k_, stride_);
    const std::size_t hw = static_cast<std::size_t>(os.h) * os.w;
    patches.assign(static_cast<std::size_t>(in_c_) * k_ * k_ * hw, T{0});
    for (int ch = 0; ch < in_c_; ++ch)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          T* dst = patches.data() + ((static_cast<std::size_t>(ch) * k_ + ky) * k_ + kx) * hw;
          for (int oy = 0; oy < os.h; ++oy) {
            const int iy = oy * stride_ + ky - pad_y;
            if (iy < 0 || iy >= x.h) continue;
            for (int ox = 0; ox < os.w; ++ox) {
              const int ix = ox * stride_ + kx - pad_x;
              if (ix < 0 || ix >= x.w) continue;
              dst[static_cast<std::size_t>(oy) * os.w + ox] = x.at(ch, iy, ix);
            }
          }
        }
  }

  void col2im(const std::vector<T>& dpatches, const Shape& os, Tensor<T>& dx) const {
    const int pad_y = same_pad_begin(dx.h, k_, stride_);
    const int pad_x = same_pad_begin(dx.w, k_, stride_);
    const std::size_t hw = static_cast<std::size_t>(os.h) * os.w;
    for (int ch = 0; ch < in_c_; ++ch)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const T* src = dpatches.data() + ((static_cast<std::size_t>(ch) * k_ + ky) * k_ + kx) * hw;
          for (int oy = 0; oy < os.h; ++oy) {
            const int iy = oy * stride_ + ky - pad_y;
            if (iy < 0 || iy >= dx.h) continue;
            for (int ox = 0; ox < os.w; ++ox) {
              const int ix = ox * stride_ + kx - pad_x;
              if (ix < 0 || ix >= dx.w) continue;
              dx.at(ch, iy, ix) += src[static_cast<std::size_t>(oy) * os.w + ox];
            }
          }
        }
  }

  int in_c_, out_c_, k_, stride_;
  ParamTensor<T> w_;
};

template <typename T>
class DepthwiseConv2dNode final : public Node<T> {
 public:
  DepthwiseConv2dNode(int channels, int k, int stride) : c_(channels), k_(k), stride_(stride) {
    w_.name = "w";
    w_.value.resize({channels, k, k});
  }
  std::string type() const override { return "dwconv"; }

  Shape infer(const std::vector<Shape>& in) const override {
    if (in[0].c != c_)
      throw ConfigError("dwconv " + this->group + ": channel mismatch");
    return {c_, same_out(in[0].h, stride_), same_out(in[0].w, stride_)};
  }

  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    const Tensor<T>& x = *in[0];
    const Shape os = infer({x.shape()});
    out.resize(os);
    const int pad_y = same_pad_begin(x.h, k_, stride_);
    const int pad_x = same_pad_begin(x.w, k_, stride_);
    for (int ch = 0; ch < c_; ++ch) {
      const T* xp = x.channel(ch);
      T* op = out.channel(ch);
      const T* wp = w_.value.channel(ch);
      for (int oy = 0; oy < os.h; ++oy)
        for (int ox = 0; ox < os.w; ++ox) {
          T acc{0};
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ + ky - pad_y;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ + kx - pad_x;
              if (ix < 0 || ix >= x.w) continue;
              acc += xp[static_cast<std::size_t>(iy) * x.w + ix] * wp[ky * k_ + kx];
            }
          }
          op[static_cast<std::size_t>(oy) * os.w + ox] = acc;
        }
    }
  }

  void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>& out,
                const Tensor<T>& dout, const std::vector<Tensor<T>*>& din,
                GradBuffers<T>& sink) const override {
    const Tensor<T>& x = *in[0];
    const Shape os = out.shape();
    const int pad_y = same_pad_begin(x.h, k_, stride_);
    const int pad_x = same_pad_begin(x.w, k_, stride_);
    Tensor<T>& gw = sink.grads[w_.id];
    for (int ch = 0; ch < c_; ++ch) {
      const T* xp = x.channel(ch);
      const T* dop = dout.channel(ch);
      const T* wp = w_.value.channel(ch);
      T* gwp = gw.channel(ch);
      T* dxp = din[0] ? din[0]->channel(ch) : nullptr;
      for (int oy = 0; oy < os.h; ++oy)
        for (int ox = 0; ox < os.w; ++ox) {
          const T g = dop[static_cast<std::size_t>(oy) * os.w + ox];
          if (g == T{0}) continue;
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ + ky - pad_y;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ + kx - pad_x;
              if (ix < 0 || ix >= x.w) continue;
              gwp[ky * k_ + kx] += g * xp[static_cast<std::size_t>(iy) * x.w + ix];
              if (dxp) dxp[static_cast<std::size_t>(iy) * x.w + ix] += g * wp[ky * k_ + kx];
            }
          }
        }
    }
  }

  std::vector<ParamTensor<T>*> params() override { return {&w_}; }
  std::vector<const ParamTensor<T>*> params() const override { return {&w_}; }

  void init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(k_) * k_));
    for (auto& v : w_.value.v) v = static_cast<T>(rng.normal(0.0, stddev));
  }

 private:
  int c_, k_, stride_;
  ParamTensor<T> w_;
};

// Per-channel affine normalization against running statistics. The forward
// pass always normalizes with the stored running mean/variance; training
// updates the statistics from batch moments after each step, so the forward
// stays a pure per-sample function and gradients treat the stats as
// constants.
template <typename T>
class BatchNormNode final : public Node<T> {
 public:
  explicit BatchNormNode(int channels) : c_(channels) {
    gamma_.name = "gamma";
    gamma_.value.resize({channels, 1, 1});
    beta_.name = "beta";
    beta_.value.resize({channels, 1, 1});
    mean_.name = "running_mean";
    mean_.value.resize({channels, 1, 1});
    mean_.is_buffer = true;
    var_.name = "running_var";
    var_.value.resize({channels, 1, 1});
    var_.is_buffer = true;
    for (auto& v : gamma_.value.v) v = T{1};
    for (auto& v : var_.value.v) v = T{1};
  }
  std::string type() const override { return "bnorm"; }
  static constexpr double kEps = 1e-5;

  Shape infer(const std::vector<Shape>& in) const override { return in[0]; }

  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    const Tensor<T>& x = *in[0];
    out.resize(x.shape());
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    for (int ch = 0; ch < c_; ++ch) {
      const T m = mean_.value.v[ch];
      const T inv = T{1} / static_cast<T>(std::sqrt(static_cast<double>(var_.value.v[ch]) + kEps));
      const T g = gamma_.value.v[ch], b = beta_.value.v[ch];
      const T* xp = x.channel(ch);
      T* op = out.channel(ch);
      for (std::size_t i = 0; i < hw; ++i) op[i] = (xp[i] - m) * inv * g + b;
    }
  }

  void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&, const Tensor<T>& dout,
                const std::vector<Tensor<T>*>& din, GradBuffers<T>& sink) const override {
    const Tensor<T>& x = *in[0];
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    Tensor<T>& gg = sink.grads[gamma_.id];
    Tensor<T>& gb = sink.grads[beta_.id];
    for (int ch = 0; ch < c_; ++ch) {
      const T m = mean_.value.v[ch];
      const T inv = T{1} / static_cast<T>(std::sqrt(static_cast<double>(var_.value.v[ch]) + kEps));
      const T g = gamma_.value.v[ch];
      const T* xp = x.channel(ch);
      const T* dop = dout.channel(ch);
      T* dxp = din[0] ? din[0]->channel(ch) : nullptr;
      T sg{0}, sb{0};
      for (std::size_t i = 0; i < hw; ++i) {
        sg += dop[i] * (xp[i] - m) * inv;
        sb += dop[i];
        if (dxp) dxp[i] += dop[i] * g * inv;
      }
      gg.v[ch] += sg;
      gb.v[ch] += sb;
    }
  }

  void accumulate_stats(const Tensor<T>& x, GradBuffers<T>& sink) const override {
    auto& sum = sink.norm_sum[this->id];
    auto& sumsq = sink.norm_sumsq[this->id];
    if (sum.empty()) {
      sum.assign(c_, 0.0);
      sumsq.assign(c_, 0.0);
    }
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    for (int ch = 0; ch < c_; ++ch) {
      const T* xp = x.channel(ch);
      double s = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        s += xp[i];
        ss += static_cast<double>(xp[i]) * xp[i];
      }
      sum[ch] += s / hw;
      sumsq[ch] += ss / hw;
    }
  }

  // Exponential moving average toward the batch moments.
  void update_stats(const std::vector<double>& sum, const std::vector<double>& sumsq,
                    std::size_t n_samples, double momentum) {
    if (n_samples == 0) return;
    for (int ch = 0; ch < c_; ++ch) {
      const double m = sum[ch] / n_samples;
      const double v = std::max(sumsq[ch] / n_samples - m * m, 0.0);
      mean_.value.v[ch] = static_cast<T>((1.0 - momentum) * mean_.value.v[ch] + momentum * m);
      var_.value.v[ch] = static_cast<T>((1.0 - momentum) * var_.value.v[ch] + momentum * v);
    }
  }

  std::vector<ParamTensor<T>*> params() override { return {&gamma_, &beta_, &mean_, &var_}; }
  std::vector<const ParamTensor<T>*> params() const override {
    return {&gamma_, &beta_, &mean_, &var_};
  }

 private:
  int c_;
  ParamTensor<T> gamma_, beta_, mean_, var_;
};

template <typename T>
class SwishNode final : public Node<T> {
 public:
  std::string type() const override { return "swish"; }
  Shape infer(const std::vector<Shape>& in) const override { return in[0]; }

  static T sigmoid(T x) { return T{1} / (T{1} + static_cast<T>(std::exp(-static_cast<double>(x)))); }

  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    const Tensor<T>& x = *in[0];
    out.resize(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] * sigmoid(x.v[i]);
  }

  void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&, const Tensor<T>& dout,
                const std::vector<Tensor<T>*>& din, GradBuffers<T>&) const override {
    if (!din[0]) return;
    const Tensor<T>& x = *in[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const T s = sigmoid(x.v[i]);
      din[0]->v[i] += dout.v[i] * s * (T{1} + x.v[i] * (T{1} - s));
    }
  }
};

// Squeeze-and-excitation: per-channel global pooling, a two-layer gate
// (swish then sigmoid), and channelwise rescaling of the input.
template <typename T>
class SqueezeExciteNode final : public Node<T> {
 public:
  SqueezeExciteNode(int channels, int reduced) : c_(channels), r_(reduced) {
    w1_.name = "w1";
    w1_.value.resize({reduced, channels, 1});
    b1_.name = "b1";
    b1_.value.resize({reduced, 1, 1});
    w2_.name = "w2";
    w2_.value.resize({channels, reduced, 1});
    b2_.name = "b2";
    b2_.value.resize({channels, 1, 1});
  }
  std::string type() const override { return "se"; }
  Shape infer(const std::vector<Shape>& in) const override { return in[0]; }

  struct Inner {
    std::vector<T> z, u1, a, u2, g;
  };

  void compute_gate(const Tensor<T>& x, Inner& s) const {
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    s.z.assign(c_, T{0});
    for (int ch = 0; ch < c_; ++ch) {
      const T* xp = x.channel(ch);
      T acc{0};
      for (std::size_t i = 0; i < hw; ++i) acc += xp[i];
      s.z[ch] = acc / static_cast<T>(hw);
    }
    s.u1.assign(r_, T{0});
    for (int j = 0; j < r_; ++j) {
      T acc = b1_.value.v[j];
      const T* wr = w1_.value.data() + static_cast<std::size_t>(j) * c_;
      for (int ch = 0; ch < c_; ++ch) acc += wr[ch] * s.z[ch];
      s.u1[j] = acc;
    }
    s.a.assign(r_, T{0});
    for (int j = 0; j < r_; ++j) s.a[j] = s.u1[j] * SwishNode<T>::sigmoid(s.u1[j]);
    s.u2.assign(c_, T{0});
    s.g.assign(c_, T{0});
    for (int ch = 0; ch < c_; ++ch) {
      T acc = b2_.value.v[ch];
      const T* wr = w2_.value.data() + static_cast<std::size_t>(ch) * r_;
      for (int j = 0; j < r_; ++j) acc += wr[j] * s.a[j];
      s.u2[ch] = acc;
      s.g[ch] = SwishNode<T>::sigmoid(acc);
    }
  }

  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    const Tensor<T>& x = *in[0];
    out.resize(x.shape());
    Inner s;
    compute_gate(x, s);
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    for (int ch = 0; ch < c_; ++ch) {
      const T* xp = x.channel(ch);
      T* op = out.channel(ch);
      for (std::size_t i = 0; i < hw; ++i) op[i] = xp[i] * s.g[ch];
    }
  }

  void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&, const Tensor<T>& dout,
                const std::vector<Tensor<T>*>& din, GradBuffers<T>& sink) const override {
    const Tensor<T>& x = *in[0];
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    Inner s;
    compute_gate(x, s);

    // dg[ch] = sum_hw dout * x ; direct input path dx += dout * g
    std::vector<T> dg(c_, T{0});
    for (int ch = 0; ch < c_; ++ch) {
      const T* xp = x.channel(ch);
      const T* dop = dout.channel(ch);
      T acc{0};
      for (std::size_t i = 0; i < hw; ++i) acc += dop[i] * xp[i];
      dg[ch] = acc;
      if (din[0]) {
        T* dxp = din[0]->channel(ch);
        for (std::size_t i = 0; i < hw; ++i) dxp[i] += dop[i] * s.g[ch];
      }
    }
    // through sigmoid: du2 = dg * g * (1 - g)
    std::vector<T> du2(c_, T{0});
    for (int ch = 0; ch < c_; ++ch) du2[ch] = dg[ch] * s.g[ch] * (T{1} - s.g[ch]);
    // w2, b2 grads; da = w2^T du2
    Tensor<T>& gw2 = sink.grads[w2_.id];
    Tensor<T>& gb2 = sink.grads[b2_.id];
    std::vector<T> da(r_, T{0});
    for (int ch = 0; ch < c_; ++ch) {
      gb2.v[ch] += du2[ch];
      const T* wr = w2_.value.data() + static_cast<std::size_t>(ch) * r_;
      T* gwr = gw2.data() + static_cast<std::size_t>(ch) * r_;
      for (int j = 0; j < r_; ++j) {
        gwr[j] += du2[ch] * s.a[j];
        da[j] += wr[j] * du2[ch];
      }
    }
    // through swish: du1 = da * swish'(u1)
    std::vector<T> du1(r_, T{0});
    for (int j = 0; j < r_; ++j) {
      const T sg = SwishNode<T>::sigmoid(s.u1[j]);
      du1[j] = da[j] * sg * (T{1} + s.u1[j] * (T{1} - sg));
    }
    // w1, b1 grads; dz = w1^T du1
    Tensor<T>& gw1 = sink.grads[w1_.id];
    Tensor<T>& gb1 = sink.grads[b1_.id];
    std::vector<T> dz(c_, T{0});
    for (int j = 0; j < r_; ++j) {
      gb1.v[j] += du1[j];
      const T* wr = w1_.value.data() + static_cast<std::size_t>(j) * c_;
      T* gwr = gw1.data() + static_cast<std::size_t>(j) * c_;
      for (int ch = 0; ch < c_; ++ch) {
        gwr[ch] += du1[j] * s.z[ch];
        dz[ch] += wr[ch] * du1[j];
      }
    }
    // pooling path: dx += dz / hw
    if (din[0]) {
      for (int ch = 0; ch < c_; ++ch) {
        const T d = dz[ch] / static_cast<T>(hw);
        T* dxp = din[0]->channel(ch);
        for (std::size_t i = 0; i < hw; ++i) dxp[i] += d;
      }
    }
  }

  std::vector<ParamTensor<T>*> params() override { return {&w1_, &b1_, &w2_, &b2_}; }
  std::vector<const ParamTensor<T>*> params() const override { return {&w1_, &b1_, &w2_, &b2_}; }

  void init(Rng& rng) {
    const double s1 = std::sqrt(2.0 / c_);
    for (auto& v : w1_.value.v) v = static_cast<T>(rng.normal(0.0, s1));
    const double s2 = std::sqrt(2.0 / r_);
    for (auto& v : w2_.value.v) v = static_cast<T>(rng.normal(0.0, s2));
  }

 private:
  int c_, r_;
  ParamTensor<T> w1_, b1_, w2_, b2_;
};

template <typename T>
class AddNode final : public Node<T> {
 public:
  std::string type() const override { return "add"; }
  Shape infer(const std::vector<Shape>& in) const override {
    if (!(in[0] == in[1])) throw ConfigError("residual add: shape mismatch");
    return in[0];
  }
  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    out.resize(in[0]->shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = in[0]->v[i] + in[1]->v[i];
  }
  void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>&, const Tensor<T>& dout,
                const std::vector<Tensor<T>*>& din, GradBuffers<T>&) const override {
    for (int k = 0; k < 2; ++k)
      if (din[k])
        for (std::size_t i = 0; i < dout.size(); ++i) din[k]->v[i] += dout.v[i];
  }
};

// Channel concatenation in fixed input order (CC first, MLO second).
template <typename T>
class ConcatNode final : public Node<T> {
 public:
  std::string type() const override { return "concat"; }
  Shape infer(const std::vector<Shape>& in) const override {
    if (in[0].h != in[1].h || in[0].w != in[1].w)
      throw ConfigError("concat: tower output shapes differ: " + in[0].str() + " vs " +
                        in[1].str());
    return {in[0].c + in[1].c, in[0].h, in[0].w};
  }
  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    out.resize(infer({in[0]->shape(), in[1]->shape()}));
    std::copy(in[0]->v.begin(), in[0]->v.end(), out.v.begin());
    std::copy(in[1]->v.begin(), in[1]->v.end(), out.v.begin() + in[0]->size());
  }
  void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&, const Tensor<T>& dout,
                const std::vector<Tensor<T>*>& din, GradBuffers<T>&) const override {
    if (din[0])
      for (std::size_t i = 0; i < in[0]->size(); ++i) din[0]->v[i] += dout.v[i];
    if (din[1])
      for (std::size_t i = 0; i < in[1]->size(); ++i)
        din[1]->v[i] += dout.v[in[0]->size() + i];
  }
};

template <typename T>
class GlobalAvgPoolNode final : public Node<T> {
 public:
  std::string type() const override { return "gap"; }
  Shape infer(const std::vector<Shape>& in) const override { return {in[0].c, 1, 1}; }
  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    const Tensor<T>& x = *in[0];
    out.resize({x.c, 1, 1});
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    for (int ch = 0; ch < x.c; ++ch) {
      const T* xp = x.channel(ch);
      T acc{0};
      for (std::size_t i = 0; i < hw; ++i) acc += xp[i];
      out.v[ch] = acc / static_cast<T>(hw);
    }
  }
  void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&, const Tensor<T>& dout,
                const std::vector<Tensor<T>*>& din, GradBuffers<T>&) const override {
    if (!din[0]) return;
    const Tensor<T>& x = *in[0];
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    for (int ch = 0; ch < x.c; ++ch) {
      const T d = dout.v[ch] / static_cast<T>(hw);
      T* dxp = din[0]->channel(ch);
      for (std::size_t i = 0; i < hw; ++i) dxp[i] += d;
    }
  }
};

template <typename T>
class DenseNode final : public Node<T> {
 public:
  DenseNode(int in_features, int out_features) : in_(in_features), out_(out_features) {
    w_.name = "w";
    w_.value.resize({out_features, in_features, 1});
    b_.name = "b";
    b_.value.resize({out_features, 1, 1});
  }
  std::string type() const override { return "dense"; }
  Shape infer(const std::vector<Shape>& in) const override {
    if (static_cast<int>(in[0].count()) != in_)
      throw ConfigError("dense " + this->group + ": expected " + std::to_string(in_) +
                        " inputs, got " + std::to_string(in[0].count()));
    return {out_, 1, 1};
  }
  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    out.resize({out_, 1, 1});
    MapC<T> W(w_.value.data(), out_, in_);
    MapC<T> X(in[0]->data(), in_, 1);
    MapM<T> Y(out.data(), out_, 1);
    Y.noalias() = W * X;
    for (int j = 0; j < out_; ++j) out.v[j] += b_.value.v[j];
  }
  void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&, const Tensor<T>& dout,
                const std::vector<Tensor<T>*>& din, GradBuffers<T>& sink) const override {
    MapC<T> dY(dout.data(), out_, 1);
    MapC<T> X(in[0]->data(), in_, 1);
    MapM<T> dW(sink.grads[w_.id].data(), out_, in_);
    dW.noalias() += dY * X.transpose();
    for (int j = 0; j < out_; ++j) sink.grads[b_.id].v[j] += dout.v[j];
    if (din[0]) {
      MapC<T> W(w_.value.data(), out_, in_);
      MapM<T> dX(din[0]->data(), in_, 1);
      dX.noalias() += W.transpose() * dY;
    }
  }
  std::vector<ParamTensor<T>*> params() override { return {&w_, &b_}; }
  std::vector<const ParamTensor<T>*> params() const override { return {&w_, &b_}; }
  void init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / in_);
    for (auto& v : w_.value.v) v = static_cast<T>(rng.normal(0.0, stddev));
  }

 private:
  int in_, out_;
  ParamTensor<T> w_, b_;
};

template <typename T>
class SoftmaxNode final : public Node<T> {
 public:
  std::string type() const override { return "softmax"; }
  Shape infer(const std::vector<Shape>& in) const override { return in[0]; }
  void forward(const std::vector<const Tensor<T>*>& in, Tensor<T>& out) const override {
    const Tensor<T>& x = *in[0];
    out.resize(x.shape());
    T mx = x.v[0];
    for (auto v : x.v) mx = std::max(mx, v);
    T sum{0};
    for (std::size_t i = 0; i < x.size(); ++i) {
      out.v[i] = static_cast<T>(std::exp(static_cast<double>(x.v[i] - mx)));
      sum += out.v[i];
    }
    for (auto& v : out.v) v /= sum;
  }
  void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>& out, const Tensor<T>& dout,
                const std::vector<Tensor<T>*>& din, GradBuffers<T>&) const override {
    if (!din[0]) return;
    T dot{0};
    for (std::size_t i = 0; i < out.size(); ++i) dot += dout.v[i] * out.v[i];
    for (std::size_t i = 0; i < out.size(); ++i)
      din[0]->v[i] += out.v[i] * (dout.v[i] - dot);
  }
};

}  // namespace twoview::netforge
