#include "vac/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vac/simd/kernels.hpp"

namespace vac::nn {
namespace {

// Batch, channels and spatial extent of a rank-3 ([b,c,w]) or rank-4 tensor.
struct Geometry {
  std::size_t batch, channels, height, width;
  std::size_t plane() const { return height * width; }
};

Geometry geometry(const std::vector<std::size_t>& shape, const char* what) {
  if (shape.size() == 3) return {shape[0], shape[1], 1, shape[2]};
  if (shape.size() == 4) return {shape[0], shape[1], shape[2], shape[3]};
  throw Error(ErrorCode::ShapeMismatch, std::string(what) + " expects a rank-3 or rank-4 input, got " +
                                            shape_string(shape));
}

std::vector<std::size_t> spatial_shape(const std::vector<std::size_t>& like, std::size_t b, std::size_t c,
                                       std::size_t h, std::size_t w) {
  if (like.size() == 3) return {b, c, w};
  return {b, c, h, w};
}

std::size_t pool_window(std::size_t pool, std::size_t extent) { return std::min(pool, extent); }

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
Parameter<T> make_param(const std::string& name, std::vector<std::size_t> shape, bool trainable = true) {
  Parameter<T> p;
  p.name = name;
  p.value = Tensor<T>(shape);
  p.grad = Tensor<T>(shape);
  p.trainable = trainable;
  return p;
}

template <typename T>
void init_uniform(Tensor<T>& t, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<T>((2.0 * unit(rng) - 1.0) * bound);
}

// ---------------------------------------------------------------- convolution

template <typename T>
class Conv final : public Layer<T> {
 public:
  Conv(const LayerSpec& spec, const std::string& name, std::mt19937_64& rng)
      : spec_(spec),
        k_(spec.in_channels * spec.kernel_h * spec.kernel_w),
        weight_(make_param<T>(name + ".weight", {spec.out_channels, k_})),
        bias_(make_param<T>(name + ".bias", {spec.bias ? spec.out_channels : 0})) {
    init_uniform(weight_.value, k_, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    const auto out_shape = output_shape(spec_, x.shape);
    input_ = x;
    const Geometry g = geometry(x.shape, "conv");
    const Geometry o = geometry(out_shape, "conv");
    Tensor<T> y(out_shape);
    const std::size_t p = o.plane();
    cols_.resize(k_ * p);
    for (std::size_t n = 0; n < g.batch; ++n) {
      im2col(x.data.data() + n * g.channels * g.plane(), g, o);
      T* yn = y.data.data() + n * spec_.out_channels * p;
      simd::gemm<T>(false, false, spec_.out_channels, p, k_, T(1), weight_.value.data.data(), k_, cols_.data(), p,
                    T(0), yn, p);
      if (spec_.bias)
        for (std::size_t c = 0; c < spec_.out_channels; ++c) {
          const T b = bias_.value[c];
          for (std::size_t i = 0; i < p; ++i) yn[c * p + i] += b;
        }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const Geometry g = geometry(input_.shape, "conv");
    const Geometry o = geometry(dy.shape, "conv");
    const std::size_t p = o.plane();
    Tensor<T> dx(input_.shape);
    std::vector<T> dcols(k_ * p);
    cols_.resize(k_ * p);
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* dyn = dy.data.data() + n * spec_.out_channels * p;
      im2col(input_.data.data() + n * g.channels * g.plane(), g, o);
      simd::gemm<T>(false, true, spec_.out_channels, k_, p, T(1), dyn, p, cols_.data(), p, T(1),
                    weight_.grad.data.data(), k_);
      if (spec_.bias)
        for (std::size_t c = 0; c < spec_.out_channels; ++c) {
          T acc = T(0);
          for (std::size_t i = 0; i < p; ++i) acc += dyn[c * p + i];
          bias_.grad[c] += acc;
        }
      simd::gemm<T>(true, false, k_, p, spec_.out_channels, T(1), weight_.value.data.data(), k_, dyn, p, T(0),
                    dcols.data(), p);
      col2im(dcols.data(), dx.data.data() + n * g.channels * g.plane(), g, o);
    }
    return dx;
  }

  std::vector<Parameter<T>*> parameters() override {
    if (!spec_.bias) return {&weight_};
    return {&weight_, &bias_};
  }
  const LayerSpec& spec() const override { return spec_; }

 private:
  // cols[(c, ky, kx), (oy, ox)] = x[c, oy*sh + ky, ox*sw + kx]
  void im2col(const T* x, const Geometry& g, const Geometry& o) {
    const std::size_t p = o.plane();
    for (std::size_t c = 0; c < g.channels; ++c)
      for (std::size_t ky = 0; ky < spec_.kernel_h; ++ky)
        for (std::size_t kx = 0; kx < spec_.kernel_w; ++kx) {
          T* row = cols_.data() + ((c * spec_.kernel_h + ky) * spec_.kernel_w + kx) * p;
          for (std::size_t oy = 0; oy < o.height; ++oy) {
            const T* src = x + c * g.plane() + (oy * spec_.stride_h + ky) * g.width + kx;
            T* dst = row + oy * o.width;
            if (spec_.stride_w == 1) {
              std::copy(src, src + o.width, dst);
            } else {
              for (std::size_t ox = 0; ox < o.width; ++ox) dst[ox] = src[ox * spec_.stride_w];
            }
          }
        }
  }

  void col2im(const T* cols, T* dx, const Geometry& g, const Geometry& o) {
    const std::size_t p = o.plane();
    for (std::size_t c = 0; c < g.channels; ++c)
      for (std::size_t ky = 0; ky < spec_.kernel_h; ++ky)
        for (std::size_t kx = 0; kx < spec_.kernel_w; ++kx) {
          const T* row = cols + ((c * spec_.kernel_h + ky) * spec_.kernel_w + kx) * p;
          for (std::size_t oy = 0; oy < o.height; ++oy) {
            T* dst = dx + c * g.plane() + (oy * spec_.stride_h + ky) * g.width + kx;
            const T* src = row + oy * o.width;
            for (std::size_t ox = 0; ox < o.width; ++ox) dst[ox * spec_.stride_w] += src[ox];
          }
        }
  }

  LayerSpec spec_;
  std::size_t k_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
  std::vector<T> cols_;
};

// ---------------------------------------------------------------- max pooling

template <typename T>
class MaxPool final : public Layer<T> {
 public:
  explicit MaxPool(const LayerSpec& spec) : spec_(spec) {}

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    const auto out_shape = output_shape(spec_, x.shape);
    const Geometry g = geometry(x.shape, "maxpool");
    const Geometry o = geometry(out_shape, "maxpool");
    const std::size_t ph = x.rank() == 3 ? 1 : pool_window(spec_.pool_h, g.height);
    const std::size_t pw = pool_window(spec_.pool_w, g.width);
    in_shape_ = x.shape;
    Tensor<T> y(out_shape);
    argmax_.assign(y.size(), 0);
    for (std::size_t nc = 0; nc < g.batch * g.channels; ++nc) {
      const T* plane = x.data.data() + nc * g.plane();
      for (std::size_t oy = 0; oy < o.height; ++oy)
        for (std::size_t ox = 0; ox < o.width; ++ox) {
          std::size_t best = (oy * ph) * g.width + ox * pw;
          for (std::size_t dy = 0; dy < ph; ++dy)
            for (std::size_t dx = 0; dx < pw; ++dx) {
              const std::size_t idx = (oy * ph + dy) * g.width + ox * pw + dx;
              // strict: first maximum wins; a NaN is kept so it reaches the loss
              if (plane[idx] > plane[best] || std::isnan(plane[idx])) best = idx;
            }
          const std::size_t out = nc * o.plane() + oy * o.width + ox;
          y[out] = plane[best];
          argmax_[out] = nc * g.plane() + best;
        }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(in_shape_);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
    return dx;
  }

  const LayerSpec& spec() const override { return spec_; }

 private:
  LayerSpec spec_;
  std::vector<std::size_t> in_shape_;
  std::vector<std::size_t> argmax_;
};

// ---------------------------------------------------------------- batch norm

template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm(const LayerSpec& spec, const std::string& name)
      : spec_(spec),
        gamma_(make_param<T>(name + ".weight", {spec.out_channels})),
        beta_(make_param<T>(name + ".bias", {spec.out_channels})),
        running_mean_(make_param<T>(name + ".running_mean", {spec.out_channels}, false)),
        running_var_(make_param<T>(name + ".running_var", {spec.out_channels}, false)) {
    gamma_.value.fill(T(1));
    running_var_.value.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (x.rank() < 2 || x.dim(1) != spec_.out_channels)
      throw Error(ErrorCode::ShapeMismatch, "batchnorm(" + std::to_string(spec_.out_channels) + ") got " +
                                                shape_string(x.shape));
    const std::size_t b = x.dim(0), c = x.dim(1);
    const std::size_t plane = x.size() / (b * c);
    const std::size_t count = b * plane;
    mode_ = mode;
    xhat_ = Tensor<T>(x.shape);
    inv_std_.assign(c, T(0));
    Tensor<T> y(x.shape);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double mean, var;
      if (mode == Mode::eval) {
        mean = running_mean_.value[ch];
        var = running_var_.value[ch];
      } else {
        double sum = 0.0;
        for (std::size_t n = 0; n < b; ++n)
          for (std::size_t i = 0; i < plane; ++i) sum += x[(n * c + ch) * plane + i];
        mean = sum / static_cast<double>(count);
        double sq = 0.0;
        for (std::size_t n = 0; n < b; ++n)
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = x[(n * c + ch) * plane + i] - mean;
            sq += d * d;
          }
        var = sq / static_cast<double>(count);
        if (mode == Mode::train) {
          const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
          running_mean_.value[ch] = static_cast<T>((1.0 - kMomentum) * running_mean_.value[ch] + kMomentum * mean);
          running_var_.value[ch] = static_cast<T>((1.0 - kMomentum) * running_var_.value[ch] + kMomentum * unbiased);
        }
      }
      const T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
      inv_std_[ch] = inv;
      const T m = static_cast<T>(mean);
      const T gam = gamma_.value[ch], bet = beta_.value[ch];
      for (std::size_t n = 0; n < b; ++n)
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t idx = (n * c + ch) * plane + i;
          const T xh = (x[idx] - m) * inv;
          xhat_[idx] = xh;
          y[idx] = gam * xh + bet;
        }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t b = dy.dim(0), c = dy.dim(1);
    const std::size_t plane = dy.size() / (b * c);
    const double count = static_cast<double>(b * plane);
    Tensor<T> dx(dy.shape);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t n = 0; n < b; ++n)
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t idx = (n * c + ch) * plane + i;
          sum_dy += dy[idx];
          sum_dy_xhat += static_cast<double>(dy[idx]) * xhat_[idx];
        }
      gamma_.grad[ch] += static_cast<T>(sum_dy_xhat);
      beta_.grad[ch] += static_cast<T>(sum_dy);
      const double g = gamma_.value[ch];
      const double inv = inv_std_[ch];
      for (std::size_t n = 0; n < b; ++n)
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t idx = (n * c + ch) * plane + i;
          if (mode_ == Mode::eval) {
            dx[idx] = static_cast<T>(g * inv * dy[idx]);
          } else {
            dx[idx] = static_cast<T>(g * inv / count *
                                     (count * dy[idx] - sum_dy - static_cast<double>(xhat_[idx]) * sum_dy_xhat));
          }
        }
    }
    return dx;
  }

  std::vector<Parameter<T>*> parameters() override { return {&gamma_, &beta_, &running_mean_, &running_var_}; }
  const LayerSpec& spec() const override { return spec_; }

 private:
  LayerSpec spec_;
  Parameter<T> gamma_, beta_, running_mean_, running_var_;
  Mode mode_ = Mode::train;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

// ---------------------------------------------------------------- elementwise

template <typename T>
class Relu final : public Layer<T> {
 public:
  explicit Relu(const LayerSpec& spec) : spec_(spec) {}
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    Tensor<T> y(x.shape);
    mask_.assign(x.size(), false);
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = x[i] > T(0);
      y[i] = mask_[i] || std::isnan(x[i]) ? x[i] : T(0);
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = mask_[i] ? dy[i] : T(0);
    return dx;
  }
  const LayerSpec& spec() const override { return spec_; }

 private:
  LayerSpec spec_;
  std::vector<bool> mask_;
};

template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(const LayerSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    active_ = mode == Mode::train && spec_.dropout_p > 0.0;
    if (!active_) return x;
    const T scale = static_cast<T>(1.0 / (1.0 - spec_.dropout_p));
    scale_.assign(x.size(), T(0));
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (unit(rng_) >= spec_.dropout_p) scale_[i] = scale;
      y[i] = x[i] * scale_[i];
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    if (!active_) return dy;
    Tensor<T> dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * scale_[i];
    return dx;
  }
  const LayerSpec& spec() const override { return spec_; }

 private:
  LayerSpec spec_;
  std::mt19937_64 rng_;
  bool active_ = false;
  std::vector<T> scale_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  explicit GlobalAvgPool(const LayerSpec& spec) : spec_(spec) {}
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    in_shape_ = x.shape;
    const Geometry g = geometry(x.shape, "global_avg_pool");
    Tensor<T> y({g.batch, g.channels});
    const std::size_t plane = g.plane();
    for (std::size_t nc = 0; nc < g.batch * g.channels; ++nc) {
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += x[nc * plane + i];
      y[nc] = static_cast<T>(acc / static_cast<double>(plane));
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(in_shape_);
    const std::size_t plane = dx.size() / dy.size();
    const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
    for (std::size_t nc = 0; nc < dy.size(); ++nc)
      for (std::size_t i = 0; i < plane; ++i) dx[nc * plane + i] = dy[nc] * inv;
    return dx;
  }
  const LayerSpec& spec() const override { return spec_; }

 private:
  LayerSpec spec_;
  std::vector<std::size_t> in_shape_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(const LayerSpec& spec, const std::string& name, std::mt19937_64& rng)
      : spec_(spec),
        weight_(make_param<T>(name + ".weight", {spec.out_features, spec.in_features})),
        bias_(make_param<T>(name + ".bias", {spec.out_features})) {
    init_uniform(weight_.value, spec.in_features, rng);
  }
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    const auto out_shape = output_shape(spec_, x.shape);
    input_ = x;
    const std::size_t b = x.dim(0);
    Tensor<T> y(out_shape);
    simd::gemm<T>(false, true, b, spec_.out_features, spec_.in_features, T(1), x.data.data(), spec_.in_features,
                  weight_.value.data.data(), spec_.in_features, T(0), y.data.data(), spec_.out_features);
    for (std::size_t n = 0; n < b; ++n)
      for (std::size_t o = 0; o < spec_.out_features; ++o) y[n * spec_.out_features + o] += bias_.value[o];
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t b = input_.dim(0);
    simd::gemm<T>(true, false, spec_.out_features, spec_.in_features, b, T(1), dy.data.data(), spec_.out_features,
                  input_.data.data(), spec_.in_features, T(1), weight_.grad.data.data(), spec_.in_features);
    for (std::size_t n = 0; n < b; ++n)
      for (std::size_t o = 0; o < spec_.out_features; ++o) bias_.grad[o] += dy[n * spec_.out_features + o];
    Tensor<T> dx(input_.shape);
    simd::gemm<T>(false, false, b, spec_.in_features, spec_.out_features, T(1), dy.data.data(), spec_.out_features,
                  weight_.value.data.data(), spec_.in_features, T(0), dx.data.data(), spec_.in_features);
    return dx;
  }
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  const LayerSpec& spec() const override { return spec_; }

 private:
  LayerSpec spec_;
  Parameter<T> weight_, bias_;
  Tensor<T> input_;
};

template <typename T>
class LogSoftmax final : public Layer<T> {
 public:
  explicit LogSoftmax(const LayerSpec& spec) : spec_(spec) {}
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    if (x.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "log_softmax expects [b,k], got " + shape_string(x.shape));
    const std::size_t b = x.dim(0), k = x.dim(1);
    Tensor<T> y(x.shape);
    for (std::size_t n = 0; n < b; ++n) {
      const T* row = x.data.data() + n * k;
      const T mx = *std::max_element(row, row + k);
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j] - mx));
      const double lse = static_cast<double>(mx) + std::log(sum);
      for (std::size_t j = 0; j < k; ++j) y[n * k + j] = static_cast<T>(row[j] - lse);
    }
    output_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t b = dy.dim(0), k = dy.dim(1);
    Tensor<T> dx(dy.shape);
    for (std::size_t n = 0; n < b; ++n) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) sum += dy[n * k + j];
      for (std::size_t j = 0; j < k; ++j)
        dx[n * k + j] = static_cast<T>(dy[n * k + j] - std::exp(static_cast<double>(output_[n * k + j])) * sum);
    }
    return dx;
  }
  const LayerSpec& spec() const override { return spec_; }

 private:
  LayerSpec spec_;
  Tensor<T> output_;
};

}  // namespace

std::string_view to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::dropout: return "dropout";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::linear: return "linear";
    case LayerKind::log_softmax: return "log_softmax";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::conv1d;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel_w = kernel;
  s.stride_w = stride;
  return s;
}
LayerSpec LayerSpec::conv2d(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw, std::size_t sh,
                            std::size_t sw) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.stride_h = sh;
  s.stride_w = sw;
  return s;
}
LayerSpec LayerSpec::without_bias() const {
  LayerSpec s = *this;
  s.bias = false;
  return s;
}
LayerSpec LayerSpec::batchnorm(std::size_t channels) {
  LayerSpec s;
  s.kind = LayerKind::batchnorm;
  s.in_channels = s.out_channels = channels;
  return s;
}
LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  return s;
}
LayerSpec LayerSpec::maxpool1d(std::size_t pool) {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.pool_w = pool;
  return s;
}
LayerSpec LayerSpec::maxpool2d(std::size_t ph, std::size_t pw) {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.pool_h = ph;
  s.pool_w = pw;
  return s;
}
LayerSpec LayerSpec::dropout(double p) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.dropout_p = p;
  return s;
}
LayerSpec LayerSpec::global_avg_pool() {
  LayerSpec s;
  s.kind = LayerKind::global_avg_pool;
  return s;
}
LayerSpec LayerSpec::linear(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::linear;
  s.in_features = in;
  s.out_features = out;
  return s;
}
LayerSpec LayerSpec::log_softmax() {
  LayerSpec s;
  s.kind = LayerKind::log_softmax;
  return s;
}

void LayerSpec::validate() const {
  const auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::InvalidArgument, std::string(to_string(kind)) + ": " + why);
  };
  switch (kind) {
    case LayerKind::conv1d:
      if (kernel_h != 1 || stride_h != 1) fail("1D convolution has no height");
      [[fallthrough]];
    case LayerKind::conv2d:
      if (in_channels == 0 || out_channels == 0) fail("channel counts must be positive");
      if (kernel_h == 0 || kernel_w == 0 || stride_h == 0 || stride_w == 0) fail("kernel and stride must be positive");
      break;
    case LayerKind::batchnorm:
      if (out_channels == 0) fail("channel count must be positive");
      break;
    case LayerKind::maxpool:
      if (pool_h == 0 || pool_w == 0) fail("pool size must be positive");
      break;
    case LayerKind::dropout:
      if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("probability must be in [0, 1)");
      break;
    case LayerKind::linear:
      if (in_features == 0 || out_features == 0) fail("feature counts must be positive");
      break;
    case LayerKind::relu:
    case LayerKind::global_avg_pool:
    case LayerKind::log_softmax: break;
  }
}

std::string LayerSpec::describe() const {
  const auto n = [](std::size_t v) { return std::to_string(v); };
  switch (kind) {
    case LayerKind::conv1d:
      return "conv1d(" + n(in_channels) + ">" + n(out_channels) + ",k" + n(kernel_w) + ",s" + n(stride_w) +
             (bias ? ")" : ",nobias)");
    case LayerKind::conv2d:
      return "conv2d(" + n(in_channels) + ">" + n(out_channels) + ",k" + n(kernel_h) + "x" + n(kernel_w) + ",s" +
             n(stride_h) + "x" + n(stride_w) + (bias ? ")" : ",nobias)");
    case LayerKind::batchnorm: return "batchnorm(" + n(out_channels) + ")";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool(" + n(pool_h) + "x" + n(pool_w) + ")";
    case LayerKind::dropout: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "dropout(%.17g)", dropout_p);
      return buf;
    }
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::linear: return "linear(" + n(in_features) + ">" + n(out_features) + ")";
    case LayerKind::log_softmax: return "log_softmax";
  }
  return "unknown";
}

std::vector<std::size_t> output_shape(const LayerSpec& spec, const std::vector<std::size_t>& in) {
  const auto mismatch = [&](const std::string& why) {
    return Error(ErrorCode::ShapeMismatch, spec.describe() + " on input " + shape_string(in) + ": " + why);
  };
  switch (spec.kind) {
    case LayerKind::conv1d:
    case LayerKind::conv2d: {
      const bool one_d = spec.kind == LayerKind::conv1d;
      if (in.size() != (one_d ? 3u : 4u)) throw mismatch(one_d ? "expected [b,c,w]" : "expected [b,c,h,w]");
      const Geometry g = geometry(in, "conv");
      if (g.channels != spec.in_channels) throw mismatch("channel count differs");
      if (g.height < spec.kernel_h || g.width < spec.kernel_w) throw mismatch("input smaller than kernel");
      const std::size_t ho = (g.height - spec.kernel_h) / spec.stride_h + 1;
      const std::size_t wo = (g.width - spec.kernel_w) / spec.stride_w + 1;
      return spatial_shape(in, g.batch, spec.out_channels, ho, wo);
    }
    case LayerKind::maxpool: {
      const Geometry g = geometry(in, "maxpool");
      if (g.height == 0 || g.width == 0) throw mismatch("empty input");
      const std::size_t ho = in.size() == 3 ? 1 : g.height / pool_window(spec.pool_h, g.height);
      const std::size_t wo = g.width / pool_window(spec.pool_w, g.width);
      return spatial_shape(in, g.batch, g.channels, ho, wo);
    }
    case LayerKind::batchnorm:
      if (in.size() < 2 || in[1] != spec.out_channels) throw mismatch("channel count differs");
      return in;
    case LayerKind::global_avg_pool: {
      const Geometry g = geometry(in, "global_avg_pool");
      return {g.batch, g.channels};
    }
    case LayerKind::linear: {
      if (in.empty()) throw mismatch("missing batch dimension");
      const std::size_t features = shape_size(in) / std::max<std::size_t>(in[0], 1);
      if (features != spec.in_features) throw mismatch("feature count differs");
      return {in[0], spec.out_features};
    }
    case LayerKind::log_softmax:
      if (in.size() != 2) throw mismatch("expected [b,k]");
      return in;
    case LayerKind::relu:
    case LayerKind::dropout: return in;
  }
  throw mismatch("unknown layer kind");
}

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const std::string& name, std::mt19937_64& init_rng,
                                     std::uint64_t dropout_seed) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::conv1d:
    case LayerKind::conv2d: return std::make_unique<Conv<T>>(spec, name, init_rng);
    case LayerKind::batchnorm: return std::make_unique<BatchNorm<T>>(spec, name);
    case LayerKind::relu: return std::make_unique<Relu<T>>(spec);
    case LayerKind::maxpool: return std::make_unique<MaxPool<T>>(spec);
    case LayerKind::dropout: return std::make_unique<Dropout<T>>(spec, dropout_seed);
    case LayerKind::global_avg_pool: return std::make_unique<GlobalAvgPool<T>>(spec);
    case LayerKind::linear: return std::make_unique<Linear<T>>(spec, name, init_rng);
    case LayerKind::log_softmax: return std::make_unique<LogSoftmax<T>>(spec);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown layer kind");
}

template <typename T>
Sequential<T>::Sequential(const std::vector<LayerSpec>& specs, const std::string& prefix, std::uint64_t seed)
    : specs_(specs) {
  std::mt19937_64 init_rng(seed);
  std::size_t conv = 0, bn = 0, lin = 0, drop = 0;
  for (const auto& s : specs) {
    std::string name;
    switch (s.kind) {
      case LayerKind::conv1d:
      case LayerKind::conv2d: name = "conv" + std::to_string(++conv); break;
      case LayerKind::batchnorm: name = "bn" + std::to_string(++bn); break;
      case LayerKind::linear: name = "linear" + std::to_string(++lin); break;
      case LayerKind::dropout: ++drop; break;
      default: break;
    }
    if (!prefix.empty() && !name.empty()) name = prefix + "." + name;
    layers_.push_back(make_layer<T>(s, name, init_rng, seed ^ (0xD1B54A32D192ED03ULL * drop)));
  }
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& layer : layers_)
    for (auto* p : layer->parameters()) out.push_back(p);
  return out;
}

template <typename T>
void Sequential<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T(0));
}

template <typename T>
std::string Sequential<T>::describe() const {
  std::string s;
  for (const auto& spec : specs_) {
    if (!s.empty()) s += " ";
    s += spec.describe();
  }
  return s;
}

template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&, const std::string&, std::mt19937_64&,
                                                         std::uint64_t);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&, const std::string&, std::mt19937_64&,
                                                           std::uint64_t);
template class Sequential<float>;
template class Sequential<double>;

}  // namespace vac::nn
