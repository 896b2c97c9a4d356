#include <doctest.h>

#include <cmath>
#include <random>

#include "zkstar/fixed_point.hpp"

using namespace zkstar;

namespace {

Mat random_matrix(std::mt19937_64& rng, int rows, int cols, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

}  // namespace

TEST_CASE("quantize maps onto the 2^-psf grid") {
  CHECK(quantize(1.5, 8).raw == 384);
  CHECK(quantize(0.0, 4).raw == 0);
  CHECK(quantize(0.0, 24).raw == 0);
  CHECK(quantize(-0.25, 10).raw == -256);
}

TEST_CASE("quantize rounds half to even") {
  CHECK(quantize(3.0 / 32.0, 4).raw == 2);  // 1.5 -> 2
  CHECK(quantize(5.0 / 32.0, 4).raw == 2);  // 2.5 -> 2
  CHECK(quantize(7.0 / 32.0, 4).raw == 4);  // 3.5 -> 4
}

TEST_CASE("quantize rejects out-of-range inputs") {
  CHECK_THROWS_AS(quantize(1e18, 24), RangeError);
  CHECK_THROWS_AS(quantize(std::nan(""), 8), RangeError);
  CHECK_THROWS_AS(quantize(1.0, 3), DimensionError);
  CHECK_THROWS_AS(quantize(1.0, 25), DimensionError);
}

TEST_CASE("dequantize inverts the grid") {
  CHECK(dequantize({384, 8}) == 1.5);
  CHECK(dequantize({0, 8}) == 0.0);
  CHECK(dequantize({1, 8}) == 0.00390625);
}

TEST_CASE("roundtrip is the identity on grid values") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> raws(-(1 << 20), 1 << 20);
  for (int psf : {4, 8, 12, 24}) {
    for (int i = 0; i < 200; ++i) {
      const std::int64_t raw = raws(rng);
      CHECK(quantize(dequantize({raw, psf}), psf).raw == raw);
    }
  }
}

TEST_CASE("fx_add and fx_sub are exact raw integer ops") {
  FixedTensor a = FixedTensor::zeros({1}, 8);
  FixedTensor b = FixedTensor::zeros({1}, 8);
  a.data[0] = 384;
  b.data[0] = 128;
  CHECK(fx_add(a, b).data[0] == 512);  // 1.5 + 0.5 = 2.0
  CHECK(fx_sub(a, a).data[0] == 0);
  const FixedTensor zero = FixedTensor::zeros({1}, 8);
  CHECK(fx_add(a, zero) == a);
}

TEST_CASE("operations between mismatched psf are rejected") {
  const FixedTensor a = FixedTensor::zeros({2}, 8);
  const FixedTensor b = FixedTensor::zeros({2}, 10);
  CHECK_THROWS_AS(fx_add(a, b), DimensionError);
  CHECK_THROWS_AS(fx_elemwise_mul(a, b), DimensionError);
}

TEST_CASE("fx_matmul spec cases") {
  SUBCASE("identity times M is raw-exact") {
    std::mt19937_64 rng(3);
    const FixedTensor m = quantize_tensor(random_matrix(rng, 3, 3, -10, 10), 8);
    const FixedTensor prod = fx_matmul(FixedTensor::identity(3, 8), m);
    CHECK(prod.data == m.data);
  }
  SUBCASE("one times one") {
    const FixedTensor one = quantize_tensor(Mat::Constant(1, 1, 1.0), 8);
    CHECK(fx_matmul(one, one).data[0] == 256);
  }
  SUBCASE("1.5 squared at psf 8 gives raw 576") {
    const FixedTensor x = quantize_tensor(Mat::Constant(1, 1, 1.5), 8);
    const FixedTensor prod = fx_matmul(x, x);
    CHECK(prod.data[0] == 576);
    CHECK(dequantize({prod.data[0], 8}) == 2.25);
  }
}

TEST_CASE("fx_frob_sq spec cases") {
  CHECK(fx_frob_sq(FixedTensor::zeros({3, 3}, 8)).raw == 0);
  FixedTensor v = FixedTensor::zeros({2}, 8);
  v.data = {256, 256};
  CHECK(dequantize(fx_frob_sq(v)) == 2.0);
  FixedTensor w = FixedTensor::zeros({1}, 8);
  w.data = {384};
  CHECK(dequantize(fx_frob_sq(w)) == 2.25);
}

TEST_CASE("fx_div basics") {
  CHECK(fx_div(quantize(1.0, 8), quantize(2.0, 8)).raw == quantize(0.5, 8).raw);
  CHECK(fx_div(quantize(-1.0, 8), quantize(2.0, 8)).raw == quantize(-0.5, 8).raw);
  CHECK_THROWS_AS(fx_div(quantize(1.0, 8), FixedScalar{0, 8}), RangeError);
}

TEST_CASE("overflow raises RangeError") {
  FixedTensor big = FixedTensor::zeros({1}, 8);
  big.data[0] = (std::int64_t{1} << 61);
  CHECK_THROWS_AS(fx_add(big, big), RangeError);
  FixedTensor bigm = FixedTensor::zeros({1, 1}, 8);
  bigm.data[0] = (std::int64_t{1} << 61);
  CHECK_THROWS_AS(fx_matmul(bigm, bigm), RangeError);
}

TEST_CASE("determinism: repeated runs produce bit-identical raw buffers") {
  std::vector<std::vector<std::int64_t>> runs;
  for (int run = 0; run < 3; ++run) {
    std::mt19937_64 rng(42);
    const FixedTensor a = quantize_tensor(random_matrix(rng, 5, 5, -10, 10), 12);
    const FixedTensor b = quantize_tensor(random_matrix(rng, 5, 5, -10, 10), 12);
    const FixedTensor c = fx_matmul(fx_matmul(a, b), fx_transpose(a));
    runs.push_back(fx_add(c, c).data);
  }
  CHECK(runs[0] == runs[1]);
  CHECK(runs[1] == runs[2]);
}

TEST_CASE("matmul rounding error bound against the dequantized-input product") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + int(rng() % 8);
    const int psf = trial % 2 == 0 ? 8 : 12;
    const FixedTensor a = quantize_tensor(random_matrix(rng, n, n, -10, 10), psf);
    const FixedTensor b = quantize_tensor(random_matrix(rng, n, n, -10, 10), psf);
    const Mat ref = to_matrix(a) * to_matrix(b);
    const Mat got = to_matrix(fx_matmul(a, b));
    const double bound = n * std::ldexp(1.0, -psf) + std::ldexp(1.0, -psf - 1);
    CHECK((got - ref).cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("psf monotonicity: error at psf 12 never exceeds error at psf 8") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + int(rng() % 5);
    const Mat a = random_matrix(rng, n, n, -10, 10);
    const Mat b = random_matrix(rng, n, n, -10, 10);
    const Mat ref = a * b;
    const double err8 =
        (to_matrix(fx_matmul(quantize_tensor(a, 8), quantize_tensor(b, 8))) - ref)
            .cwiseAbs()
            .maxCoeff();
    const double err12 =
        (to_matrix(fx_matmul(quantize_tensor(a, 12), quantize_tensor(b, 12))) - ref)
            .cwiseAbs()
            .maxCoeff();
    CHECK(err12 <= err8 + 1e-12);
  }
}

TEST_CASE("canonical encoding layout and round trip") {
  FixedTensor t = FixedTensor::zeros({2}, 8);
  t.data = {384, -1};
  const auto bytes = encode_tensor(t);
  REQUIRE(bytes.size() == 1 + 4 + 16);
  CHECK(bytes[0] == 8);     // psf first
  CHECK(bytes[1] == 2);     // dim, little-endian
  CHECK(bytes[2] == 0);
  CHECK(bytes[5] == 0x80);  // 384 = 0x180
  CHECK(bytes[6] == 0x01);
  CHECK(decode_tensor(bytes, 1) == t);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const FixedTensor m = quantize_tensor(random_matrix(rng, 3, 4, -5, 5), 12);
    CHECK(decode_tensor(encode_tensor(m), 2) == m);
  }
  CHECK_THROWS_AS(decode_tensor({8, 1}, 1), MalformedWitness);
}
