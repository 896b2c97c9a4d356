#include "zkstar/fixed_point.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace zkstar {

namespace {

using int128 = __int128;

void check_psf(int psf) {
  if (psf < kMinPsf || psf > kMaxPsf)
    throw DimensionError("psf " + std::to_string(psf) + " outside [" +
                         std::to_string(kMinPsf) + ", " +
                         std::to_string(kMaxPsf) + "]");
}

std::int64_t narrow_checked(int128 v) {
  if (v >= int128(kMaxRaw) || v <= -int128(kMaxRaw))
    throw RangeError("fixed-point overflow");
  return static_cast<std::int64_t>(v);
}

// Floor division/remainder pair for 128-bit dividend, positive divisor.
void floor_divmod(int128 num, int128 den, int128& q, int128& r) {
  q = num / den;
  r = num % den;
  if (r < 0) {
    q -= 1;
    r += den;
  }
}

// num / den with round-half-to-even, den > 0.
int128 div_round_half_even(int128 num, int128 den) {
  int128 q, r;
  floor_divmod(num, den, q, r);
  const int128 twice = 2 * r;
  if (twice > den) return q + 1;
  if (twice == den) return (q % 2 != 0) ? q + 1 : q;
  return q;
}

// Rescale an accumulated product sum back onto the psf grid.
int128 rescale(int128 v, int psf) {
  return div_round_half_even(v, int128(1) << psf);
}

void require_same_psf(const FixedTensor& a, const FixedTensor& b) {
  if (a.psf != b.psf) throw DimensionError("mismatched psf between operands");
}

void require_same_shape(const FixedTensor& a, const FixedTensor& b) {
  if (a.shape != b.shape) throw DimensionError("mismatched tensor shapes");
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_i64(std::vector<std::uint8_t>& out, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

}  // namespace

FixedScalar quantize(double x, int psf) {
  check_psf(psf);
  if (!std::isfinite(x)) throw RangeError("quantize: non-finite input");
  const double scaled = std::ldexp(x, psf);
  if (std::abs(scaled) >= static_cast<double>(kMaxRaw))
    throw RangeError("quantize: |x|*2^psf exceeds raw range");
  // nearbyint under the default FP environment rounds half to even.
  return FixedScalar{static_cast<std::int64_t>(std::nearbyint(scaled)), psf};
}

double dequantize(const FixedScalar& f) {
  return std::ldexp(static_cast<double>(f.raw), -f.psf);
}

FixedTensor FixedTensor::zeros(std::vector<std::uint32_t> shape, int psf) {
  check_psf(psf);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  FixedTensor t;
  t.shape = std::move(shape);
  t.data.assign(n, 0);
  t.psf = psf;
  return t;
}

FixedTensor FixedTensor::identity(std::uint32_t n, int psf) {
  FixedTensor t = zeros({n, n}, psf);
  const std::int64_t one = std::int64_t{1} << psf;
  for (std::uint32_t i = 0; i < n; ++i) t.data[std::size_t{i} * n + i] = one;
  return t;
}

std::uint32_t FixedTensor::rows() const {
  return shape.empty() ? 0 : shape[0];
}

std::uint32_t FixedTensor::cols() const {
  if (shape.size() >= 2) return shape[1];
  return shape.empty() ? 0 : 1;
}

std::int64_t& FixedTensor::at(std::uint32_t r, std::uint32_t c) {
  return data[std::size_t{r} * cols() + c];
}

std::int64_t FixedTensor::at(std::uint32_t r, std::uint32_t c) const {
  return data[std::size_t{r} * cols() + c];
}

FixedTensor quantize_tensor(const Mat& m, int psf) {
  FixedTensor t = FixedTensor::zeros(
      {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, psf);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.data[static_cast<std::size_t>(r) * m.cols() + c] = quantize(m(r, c), psf).raw;
  return t;
}

FixedTensor quantize_vector(const Vec& v, int psf) {
  FixedTensor t = FixedTensor::zeros({static_cast<std::uint32_t>(v.size())}, psf);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    t.data[static_cast<std::size_t>(i)] = quantize(v(i), psf).raw;
  return t;
}

Mat to_matrix(const FixedTensor& t) {
  if (t.shape.size() != 2) throw DimensionError("to_matrix: rank-2 tensor required");
  Mat m(t.shape[0], t.shape[1]);
  for (std::uint32_t r = 0; r < t.shape[0]; ++r)
    for (std::uint32_t c = 0; c < t.shape[1]; ++c)
      m(r, c) = dequantize(FixedScalar{t.at(r, c), t.psf});
  return m;
}

Vec to_vector(const FixedTensor& t) {
  if (t.shape.size() != 1) throw DimensionError("to_vector: rank-1 tensor required");
  Vec v(t.shape[0]);
  for (std::uint32_t i = 0; i < t.shape[0]; ++i)
    v(i) = dequantize(FixedScalar{t.data[i], t.psf});
  return v;
}

FixedScalar tensor_scalar(const FixedTensor& t) {
  if (t.size() != 1) throw DimensionError("tensor_scalar: single-element tensor required");
  return FixedScalar{t.data[0], t.psf};
}

FixedTensor fx_add(const FixedTensor& a, const FixedTensor& b) {
  require_same_psf(a, b);
  require_same_shape(a, b);
  FixedTensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = narrow_checked(int128(a.data[i]) + int128(b.data[i]));
  return out;
}

FixedTensor fx_sub(const FixedTensor& a, const FixedTensor& b) {
  require_same_psf(a, b);
  require_same_shape(a, b);
  FixedTensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = narrow_checked(int128(a.data[i]) - int128(b.data[i]));
  return out;
}

FixedTensor fx_elemwise_mul(const FixedTensor& a, const FixedTensor& b) {
  require_same_psf(a, b);
  require_same_shape(a, b);
  FixedTensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = narrow_checked(rescale(int128(a.data[i]) * int128(b.data[i]), a.psf));
  return out;
}

FixedTensor fx_matmul(const FixedTensor& a, const FixedTensor& b) {
  require_same_psf(a, b);
  if (a.shape.size() != 2) throw DimensionError("fx_matmul: lhs must be rank 2");
  const bool vec_rhs = b.shape.size() == 1;
  if (!vec_rhs && b.shape.size() != 2)
    throw DimensionError("fx_matmul: rhs must be rank 1 or 2");
  const std::uint32_t r = a.shape[0];
  const std::uint32_t k = a.shape[1];
  const std::uint32_t k2 = b.shape[0];
  const std::uint32_t c = vec_rhs ? 1 : b.shape[1];
  if (k != k2) throw DimensionError("fx_matmul: inner dimensions disagree");

  FixedTensor out = vec_rhs ? FixedTensor::zeros({r}, a.psf)
                            : FixedTensor::zeros({r, c}, a.psf);
  for (std::uint32_t i = 0; i < r; ++i) {
    for (std::uint32_t j = 0; j < c; ++j) {
      int128 acc = 0;
      for (std::uint32_t x = 0; x < k; ++x) {
        const int128 term =
            int128(a.data[std::size_t{i} * k + x]) * int128(b.data[std::size_t{x} * c + j]);
        acc += term;
        if (acc >= (int128(1) << 126) || acc <= -(int128(1) << 126))
          throw RangeError("fx_matmul: accumulator overflow");
      }
      out.data[std::size_t{i} * c + j] = narrow_checked(rescale(acc, a.psf));
    }
  }
  return out;
}

FixedTensor fx_transpose(const FixedTensor& a) {
  if (a.shape.size() != 2) throw DimensionError("fx_transpose: rank-2 tensor required");
  FixedTensor out = FixedTensor::zeros({a.shape[1], a.shape[0]}, a.psf);
  for (std::uint32_t r = 0; r < a.shape[0]; ++r)
    for (std::uint32_t c = 0; c < a.shape[1]; ++c) out.at(c, r) = a.at(r, c);
  return out;
}

FixedScalar fx_frob_sq(const FixedTensor& a) {
  int128 acc = 0;
  for (auto v : a.data) {
    acc += int128(v) * int128(v);
    if (acc >= (int128(1) << 126)) throw RangeError("fx_frob_sq: accumulator overflow");
  }
  return FixedScalar{narrow_checked(rescale(acc, a.psf)), a.psf};
}

FixedScalar fx_div(const FixedScalar& a, const FixedScalar& b) {
  if (a.psf != b.psf) throw DimensionError("fx_div: mismatched psf");
  if (b.raw == 0) throw RangeError("fx_div: division by zero");
  int128 num = int128(a.raw) << a.psf;
  int128 den = b.raw;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  return FixedScalar{narrow_checked(div_round_half_even(num, den)), a.psf};
}

std::vector<std::uint8_t> encode_tensor(const FixedTensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(1 + 4 * t.shape.size() + 8 * t.data.size());
  out.push_back(static_cast<std::uint8_t>(t.psf));
  for (auto d : t.shape) append_u32(out, d);
  for (auto v : t.data) append_i64(out, v);
  return out;
}

FixedTensor decode_tensor(const std::vector<std::uint8_t>& bytes, std::size_t rank) {
  if (bytes.size() < 1 + 4 * rank) throw MalformedWitness("tensor encoding truncated");
  FixedTensor t;
  t.psf = bytes[0];
  if (t.psf < kMinPsf || t.psf > kMaxPsf)
    throw MalformedWitness("tensor encoding carries invalid psf");
  std::size_t off = 1;
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    std::uint32_t d = 0;
    for (int b = 0; b < 4; ++b) d |= std::uint32_t(bytes[off + b]) << (8 * b);
    off += 4;
    t.shape.push_back(d);
    n *= d;
  }
  if (bytes.size() != off + 8 * n)
    throw MalformedWitness("tensor encoding length disagrees with shape");
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= std::uint64_t(bytes[off + b]) << (8 * b);
    off += 8;
    t.data[i] = static_cast<std::int64_t>(u);
  }
  return t;
}

std::vector<std::uint8_t> encode_bit(std::uint8_t bit) {
  if (bit > 1) throw MalformedWitness("bit outside {0,1}");
  return {bit};
}

}  // namespace zkstar
