#pragma once

#include <cstdint>
#include <vector>

#include "zkstar/errors.hpp"
#include "zkstar/linalg.hpp"

namespace zkstar {

inline constexpr int kMinPsf = 4;
inline constexpr int kMaxPsf = 24;

// Raw magnitudes are kept strictly below 2^62 so sums of a few operands
// cannot wrap an int64 before the overflow check fires.
inline constexpr std::int64_t kMaxRaw = std::int64_t{1} << 62;

/// Signed fixed-point scalar: represented value = raw / 2^psf.
struct FixedScalar {
  std::int64_t raw{0};
  int psf{12};

  friend bool operator==(const FixedScalar&, const FixedScalar&) = default;
};

/// Round-half-to-even quantization onto the 2^-psf grid.
FixedScalar quantize(double x, int psf);

/// Exact for psf <= 24: raw / 2^psf is representable in a double.
double dequantize(const FixedScalar& f);

/// Row-major tensor of raw values sharing one precision scale factor.
/// Rank 1 = vector, rank 2 = matrix; higher ranks are not used.
struct FixedTensor {
  std::vector<std::uint32_t> shape;
  std::vector<std::int64_t> data;
  int psf{12};

  static FixedTensor zeros(std::vector<std::uint32_t> shape, int psf);
  static FixedTensor identity(std::uint32_t n, int psf);

  std::size_t size() const { return data.size(); }
  std::uint32_t rows() const;
  std::uint32_t cols() const;

  std::int64_t& at(std::uint32_t r, std::uint32_t c);
  std::int64_t at(std::uint32_t r, std::uint32_t c) const;

  friend bool operator==(const FixedTensor&, const FixedTensor&) = default;
};

// Conversions between the float reference world and the fixed-point grid.
FixedTensor quantize_tensor(const Mat& m, int psf);
FixedTensor quantize_vector(const Vec& v, int psf);
Mat to_matrix(const FixedTensor& t);
Vec to_vector(const FixedTensor& t);
FixedScalar tensor_scalar(const FixedTensor& t);  // rank-0/1x1 extraction

// Element-wise; operands must share shape and psf.
FixedTensor fx_add(const FixedTensor& a, const FixedTensor& b);
FixedTensor fx_sub(const FixedTensor& a, const FixedTensor& b);
FixedTensor fx_elemwise_mul(const FixedTensor& a, const FixedTensor& b);

/// Matrix product with one round-half-to-even rescale per dot product;
/// accepts (r x k)·(k x c) and (r x k)·(k). Bit-identical across runs.
FixedTensor fx_matmul(const FixedTensor& a, const FixedTensor& b);

FixedTensor fx_transpose(const FixedTensor& a);

/// Squared Frobenius norm: sum of squares accumulated in 128 bits with a
/// single final rescale.
FixedScalar fx_frob_sq(const FixedTensor& a);

/// Fixed-point division a/b with round-half-to-even; b must be nonzero.
FixedScalar fx_div(const FixedScalar& a, const FixedScalar& b);

// Canonical byte encoding consumed by the commitment layer:
// psf as 1 byte, each dim as 4-byte unsigned LE, raw values as 8-byte LE.
std::vector<std::uint8_t> encode_tensor(const FixedTensor& t);
FixedTensor decode_tensor(const std::vector<std::uint8_t>& bytes,
                          std::size_t rank);
std::vector<std::uint8_t> encode_bit(std::uint8_t bit);

}  // namespace zkstar
