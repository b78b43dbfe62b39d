#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "privswarm/fixed_point.hpp"
#include "privswarm/model.hpp"
#include "privswarm/tensor.hpp"

namespace privswarm {

// erf by its Maclaurin series for |x| < 2.5 and a Lentz continued fraction
// for erfc beyond; agrees with a 50-digit reference to ~1e-15.
double erf_precise(double x);

enum class GeluKind { exact, paper_piecewise };
// exact: x * Phi(x). paper_piecewise: the branch table with thresholds
// -3, -1, 1 and constants 0.5, 0.8413, 0.1587.
double gelu_reference(double x, GeluKind kind);

// Double-precision mirrors of the secure approximations (same formulas,
// seeds and iteration counts).
double exp_limit(double x);
double reciprocal_newton(double x);
double rsqrt_newton(double x);
double gelu_poly(double x);

// Chebyshev coefficients c_0..c_16 of x * Phi(x) on [-5, 5] in the variable
// u = x / 5, from interpolation at 64 Chebyshev nodes.
inline constexpr int kGeluPolyDegree = 16;
inline constexpr double kGeluPolyHalfWidth = 5.0;
const std::vector<double>& gelu_poly_coefficients();

struct ErrorProfile {
  std::vector<double> grid, exact, approx, abs_error;
  double max_abs = 0;
  double mean_abs = 0;
  double argmax_x = 0;
  double max_rel = 0;  // relative to |exact|, points with exact == 0 skipped
};

// Throws RangeError for an empty or non-finite domain or step <= 0.
ErrorProfile approx_error_profile(const std::function<double(double)>& exact,
                                  const std::function<double(double)>& approx,
                                  double lo, double hi, double step);
// Columns x, exact, approx, abs_error.
void write_profile_csv(const ErrorProfile& p, std::ostream& out);

// --- float engine -----------------------------------------------------------

// mirror: same approximation formulas as the secure engine, in double.
// exact: true exp / 1/x / 1/sqrt and the GELU named by config.gelu_mode.
enum class FloatMath { mirror, exact };

// Logits [s x V] for the token sequence.
std::vector<double> float_forward(const ModelWeights& w, const std::vector<int>& tokens,
                                  FloatMath math = FloatMath::mirror);

// --- fixed-point engine -----------------------------------------------------
//
// Plaintext ring arithmetic mirroring the secure truncation schedule with
// exact floor truncation. Tensors are PublicTensor values.
namespace fixed_ref {

PublicTensor trunc(const PublicTensor& x, int bits);
PublicTensor mul(const PublicTensor& a, const PublicTensor& b);
PublicTensor matmul(const PublicTensor& a, const PublicTensor& b);
PublicTensor less_than_zero(const PublicTensor& x);
PublicTensor exp(const PublicTensor& x, const FixedPoint& fp);
PublicTensor reciprocal(const PublicTensor& x, const FixedPoint& fp);
PublicTensor rsqrt(const PublicTensor& x, const FixedPoint& fp);
PublicTensor linear(const PublicTensor& x, const PublicTensor& w, const PublicTensor* b,
                    const FixedPoint& fp);
PublicTensor layernorm(const PublicTensor& x, const PublicTensor& gamma,
                       const PublicTensor& beta, const FixedPoint& fp,
                       double eps = 1e-5);
PublicTensor gelu(const PublicTensor& x, const FixedPoint& fp);
PublicTensor gelu_poly(const PublicTensor& x, const FixedPoint& fp);
PublicTensor softmax(const PublicTensor& x, double temperature,
                     const std::vector<std::uint8_t>& mask, const FixedPoint& fp);
PublicTensor attention(const PublicTensor& q, const PublicTensor& k,
                       const PublicTensor& v, int heads, bool causal,
                       const PublicTensor& wo, double temperature,
                       const FixedPoint& fp, std::size_t offset = 0);

}  // namespace fixed_ref

// Ring logits [s x V].
PublicTensor fixed_forward(const EncodedModel& m, const std::vector<int>& tokens);

// Greedy decoding; returns the `steps` generated ids (first maximal logit
// wins).
std::vector<int> fixed_generate(const EncodedModel& m, std::vector<int> tokens, int steps);
std::vector<int> float_generate(const ModelWeights& w, std::vector<int> tokens, int steps,
                                FloatMath math = FloatMath::mirror);

}  // namespace privswarm
