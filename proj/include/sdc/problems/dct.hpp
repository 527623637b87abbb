#pragma once

#include "sdc/types.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace sdc {

namespace detail {
// FFTW planning and plan destruction are not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Orthonormal DCT-II (forward) and its inverse DCT-III of a fixed length.
/// Owns its work buffers, so one instance must not be used from two threads.
class OrthonormalDct {
 public:
  explicit OrthonormalDct(Index n) : n_(n) {
    if (n <= 0) throw Error(ErrorKind::invalid_dimensions, "dct length must be positive");
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_real(static_cast<std::size_t>(n));
    std::lock_guard lock(detail::fftw_planner_mutex());
    fwd_ = fftw_plan_r2r_1d(static_cast<int>(n), in_, out_, FFTW_REDFT10, FFTW_ESTIMATE);
    inv_ = fftw_plan_r2r_1d(static_cast<int>(n), in_, out_, FFTW_REDFT01, FFTW_ESTIMATE);
  }

  OrthonormalDct(const OrthonormalDct& other) : OrthonormalDct(other.n_) {}
  OrthonormalDct& operator=(const OrthonormalDct&) = delete;

  ~OrthonormalDct() {
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(fwd_);
      fftw_destroy_plan(inv_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }

  Index size() const { return n_; }

  /// X_k = c_k sum_j x_j cos(pi (j + 1/2) k / n), c_0 = sqrt(1/n), c_k = sqrt(2/n).
  void forward(const Vec& x, Vec& y) {
    std::copy(x.data(), x.data() + n_, in_);
    fftw_execute(fwd_);
    y.resize(n_);
    const double c0 = 0.5 * std::sqrt(1.0 / static_cast<double>(n_));
    const double ck = 0.5 * std::sqrt(2.0 / static_cast<double>(n_));
    y(0) = c0 * out_[0];
    for (Index k = 1; k < n_; ++k) y(k) = ck * out_[k];
  }

  /// Inverse of forward (the transpose, since the transform is orthonormal).
  void inverse(const Vec& y, Vec& x) {
    const double c0 = std::sqrt(1.0 / static_cast<double>(n_));
    const double ck = 0.5 * std::sqrt(2.0 / static_cast<double>(n_));
    in_[0] = c0 * y(0);
    for (Index k = 1; k < n_; ++k) in_[k] = ck * y(k);
    fftw_execute(inv_);
    x.resize(n_);
    std::copy(out_, out_ + n_, x.data());
  }

 private:
  Index n_;
  double* in_ = nullptr;
  double* out_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

}  // namespace sdc
