#ifndef ROIKIT_TENSOR_HPP
#define ROIKIT_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace roikit {

/// Working precision for every numeric path in the library. The binary tensor
/// file stores float32; see harness/tensor_io.hpp.
using Real = double;

struct Shape3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const noexcept { return channels * height * width; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

inline std::string to_string(const Shape3& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

/**
 * Dense C x H x W grid, channel-major then row-major. All dimensions are at
 * least one; construction with a zero extent throws std::invalid_argument.
 */
template <typename T = Real>
class Tensor3 {
 public:
  using value_type = T;

  Tensor3(std::size_t channels, std::size_t height, std::size_t width, T fill = T{})
      : shape_{channels, height, width} {
    check_shape(shape_);
    data_.assign(shape_.size(), fill);
  }

  explicit Tensor3(Shape3 shape, T fill = T{}) : Tensor3(shape.channels, shape.height, shape.width, fill) {}

  Tensor3(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_.size())
      throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                  " does not match shape " + to_string(shape_));
  }

  const Shape3& shape() const noexcept { return shape_; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return (c * shape_.height + y) * shape_.width + x;
  }

  T& operator()(std::size_t c, std::size_t y, std::size_t x) noexcept { return data_[index(c, y, x)]; }
  const T& operator()(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[index(c, y, x)];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  /// One channel plane, H*W values.
  std::span<const T> plane(std::size_t c) const noexcept {
    return std::span<const T>(data_).subspan(c * shape_.height * shape_.width,
                                             shape_.height * shape_.width);
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  static void check_shape(const Shape3& s) {
    if (s.channels == 0 || s.height == 0 || s.width == 0)
      throw std::invalid_argument("tensor dimensions must be >= 1, got " + to_string(s));
  }

  Shape3 shape_;
  std::vector<T> data_;
};

template <typename T>
T dot(const Tensor3<T>& a, const Tensor3<T>& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("dot: shape mismatch");
  return std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), T{});
}

/**
 * Separable bilinear upsampling kernel for integer factors.
 *
 * Along an axis with factor f the kernel has 2f - (f mod 2) taps and tap i
 * weighs 1 - |i/f - c| with c = (2f - 1 - (f mod 2)) / (2f). Used with stride f
 * and padding ceil((f - 1) / 2), the transposed convolution produces exactly
 * f times as many cells and reproduces half-pixel-centred bilinear
 * interpolation away from the borders.
 */
class BilinearKernel {
 public:
  BilinearKernel(int factor_h, int factor_w)
      : factor_h_(checked(factor_h)), factor_w_(checked(factor_w)),
        profile_h_(profile(factor_h)), profile_w_(profile(factor_w)) {}

  int factor_h() const noexcept { return factor_h_; }
  int factor_w() const noexcept { return factor_w_; }
  std::size_t size_h() const noexcept { return profile_h_.size(); }
  std::size_t size_w() const noexcept { return profile_w_.size(); }
  // ceil((f - 1) / 2) == f / 2 for f >= 1.
  std::size_t pad_h() const noexcept { return static_cast<std::size_t>(factor_h_ / 2); }
  std::size_t pad_w() const noexcept { return static_cast<std::size_t>(factor_w_ / 2); }

  std::span<const Real> profile_h() const noexcept { return profile_h_; }
  std::span<const Real> profile_w() const noexcept { return profile_w_; }

  Real operator()(std::size_t i, std::size_t j) const noexcept { return profile_h_[i] * profile_w_[j]; }

  bool is_identity() const noexcept { return factor_h_ == 1 && factor_w_ == 1; }

  /// 1-D tap weights for one axis.
  static std::vector<Real> profile(int factor) {
    checked(factor);
    const int taps = 2 * factor - factor % 2;
    const Real f = factor;
    const Real center = static_cast<Real>(2 * factor - 1 - factor % 2) / (2 * f);
    std::vector<Real> w(static_cast<std::size_t>(taps));
    for (int i = 0; i < taps; ++i) w[static_cast<std::size_t>(i)] = 1 - std::abs(i / f - center);
    return w;
  }

 private:
  static int checked(int factor) {
    if (factor < 1) throw std::invalid_argument("bilinear kernel factor must be >= 1, got " + std::to_string(factor));
    return factor;
  }

  int factor_h_;
  int factor_w_;
  std::vector<Real> profile_h_;
  std::vector<Real> profile_w_;
};

inline BilinearKernel make_bilinear_kernel(int factor_h, int factor_w) { return BilinearKernel(factor_h, factor_w); }

/// Depthwise transposed convolution; output is (f_h * H) x (f_w * W) per channel.
template <typename T>
Tensor3<T> deconv2d(const Tensor3<T>& input, const BilinearKernel& kernel) {
  if (kernel.is_identity()) return input;
  const std::size_t fh = static_cast<std::size_t>(kernel.factor_h());
  const std::size_t fw = static_cast<std::size_t>(kernel.factor_w());
  const std::size_t out_h = fh * input.height();
  const std::size_t out_w = fw * input.width();
  const std::size_t ph = kernel.pad_h(), pw = kernel.pad_w();
  Tensor3<T> out(input.channels(), out_h, out_w);
  for (std::size_t c = 0; c < input.channels(); ++c) {
    for (std::size_t iy = 0; iy < input.height(); ++iy) {
      for (std::size_t ix = 0; ix < input.width(); ++ix) {
        const T v = input(c, iy, ix);
        for (std::size_t ky = 0; ky < kernel.size_h(); ++ky) {
          // output row = iy*fh + ky - ph, skipped when it falls outside.
          const std::size_t shifted_y = iy * fh + ky;
          if (shifted_y < ph || shifted_y - ph >= out_h) continue;
          const std::size_t oy = shifted_y - ph;
          for (std::size_t kx = 0; kx < kernel.size_w(); ++kx) {
            const std::size_t shifted_x = ix * fw + kx;
            if (shifted_x < pw || shifted_x - pw >= out_w) continue;
            out(c, oy, shifted_x - pw) += v * static_cast<T>(kernel(ky, kx));
          }
        }
      }
    }
  }
  return out;
}

/// Adjoint of deconv2d: strided correlation of the output gradient with the kernel.
template <typename T>
Tensor3<T> deconv2d_input_grad(const Tensor3<T>& output_grad, const BilinearKernel& kernel,
                               const Shape3& input_shape) {
  const std::size_t fh = static_cast<std::size_t>(kernel.factor_h());
  const std::size_t fw = static_cast<std::size_t>(kernel.factor_w());
  const Shape3 expected{input_shape.channels, fh * input_shape.height, fw * input_shape.width};
  if (output_grad.shape() != expected)
    throw std::invalid_argument("deconv2d_input_grad: output gradient is " + to_string(output_grad.shape()) +
                                ", expected " + to_string(expected));
  if (kernel.is_identity()) return output_grad;
  const std::size_t ph = kernel.pad_h(), pw = kernel.pad_w();
  const std::size_t out_h = expected.height, out_w = expected.width;
  Tensor3<T> grad(input_shape);
  for (std::size_t c = 0; c < input_shape.channels; ++c) {
    for (std::size_t iy = 0; iy < input_shape.height; ++iy) {
      for (std::size_t ix = 0; ix < input_shape.width; ++ix) {
        T acc{};
        for (std::size_t ky = 0; ky < kernel.size_h(); ++ky) {
          const std::size_t shifted_y = iy * fh + ky;
          if (shifted_y < ph || shifted_y - ph >= out_h) continue;
          for (std::size_t kx = 0; kx < kernel.size_w(); ++kx) {
            const std::size_t shifted_x = ix * fw + kx;
            if (shifted_x < pw || shifted_x - pw >= out_w) continue;
            acc += output_grad(c, shifted_y - ph, shifted_x - pw) * static_cast<T>(kernel(ky, kx));
          }
        }
        grad(c, iy, ix) = acc;
      }
    }
  }
  return grad;
}

}  // namespace roikit

#endif  // ROIKIT_TENSOR_HPP
