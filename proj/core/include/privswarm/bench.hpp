#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "privswarm/model.hpp"
#include "privswarm/ref_engine.hpp"
#include "privswarm/session.hpp"

namespace privswarm {

// CSV schema of write_bench_csv; bump when columns change.
inline constexpr int kBenchCsvVersion = 1;

// comm_kb_total == sum of comm_kb_per_pair (P1-P2, P2-P3, P3-P1, both
// directions).
struct BenchRow {
  std::size_t swarm_size = 0;
  double computation_ms = 0;  // median over reps of the whole batch
  double comm_kb_total = 0;
  std::array<double, 3> comm_kb_per_pair{};
  std::uint64_t rounds = 0;  // per session
  std::uint64_t seed = 0;
};

struct BenchOptions {
  std::vector<std::size_t> swarm_sizes{1, 2, 3, 4, 5, 6, 7, 8};
  int reps = 3;
  std::uint64_t seed = 1;
  TransportKind transport = TransportKind::in_process;
  CarryMode carry_mode = CarryMode::ripple;
  FixedPoint fixed_point{};
  // Per-session workload: greedy generation of `steps` tokens after a
  // random prompt of `prompt_len` tokens.
  int prompt_len = 8;
  int steps = 4;
};

// Per swarm size, runs size-many three-party sessions in parallel (one per
// UAV, session seed = seed + index). Throws RangeError for a size of 0 or
// a workload that exceeds max_seq.
std::vector<BenchRow> run_bench(const ModelWeights& model, const BenchOptions& options);
// Throws FormatError for a bad model file.
std::vector<BenchRow> run_bench(const std::filesystem::path& model, const BenchOptions& options);

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out);

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};
// Least squares of comm_kb_total against swarm_size. R^2 is 1 for an exact
// fit, including the constant case.
LinearFit fit_comm_kb(const std::vector<BenchRow>& rows);

// Published operating points for swarm sizes 2, 3 and 4; printed for context only.
struct PublishedRow {
  int swarm_size;
  double computation_ms;
  double comm_kb;
};
const std::vector<PublishedRow>& published_operating_points();

enum class ApproxFunction { gelu, softmax, exp, reciprocal, rsqrt };
ApproxFunction parse_approx_function(const std::string& name);  // ValidationError
std::string approx_function_name(ApproxFunction f);

struct ApproxOptions {
  FixedPoint fixed_point{};
  // Prefix comparison keeps the sign test at a logarithmic round count.
  CarryMode carry_mode = CarryMode::parallel_prefix;
  std::uint64_t seed = 1;
  int baseline_degree = 16;
  std::size_t softmax_row = 16;  // grid values per softmax row
};

struct MpcCost {
  std::uint64_t rounds = 0;
  std::uint64_t bytes = 0;
  double wall_ms = 0;
  double max_abs_error = 0;  // reconstructed output vs the exact function
};

struct ApproxReport {
  ApproxFunction function = ApproxFunction::gelu;
  double lo = 0, hi = 0, step = 0;
  // Plaintext approximation vs exact: piecewise vs erf GELU, the
  // limit exp, the Newton reciprocal and rsqrt, and the fixed-point softmax.
  ErrorProfile profile;
  MpcCost mpc;
  // High-degree Chebyshev interpolant of the exact function over the
  // domain, Clenshaw evaluation (for softmax, in place of exp).
  MpcCost baseline;
  std::string baseline_name;
  double round_ratio = 0;  // mpc / baseline
  double time_ratio = 0;
  double max_row_sum_error = 0;  // softmax only: max |row sum - 1|
  double min_output = 0;         // softmax only
};

// Throws RangeError for a bad domain or one outside the function's valid
// input range (exp [-16, 4], reciprocal [2^-4, 500], rsqrt [2^-4, 256]).
ApproxReport approx_report(ApproxFunction f, double lo, double hi, double step,
                           const ApproxOptions& options = {});

// Chebyshev coefficients of f on [lo, hi] from `nodes` interpolation nodes
// (c0 halved, so p(x) = sum c_k T_k(u) with u mapped to [-1, 1]).
std::vector<double> chebyshev_fit(const std::function<double(double)>& f, double lo, double hi,
                                  int degree, int nodes = 64);

// Summary as key,value CSV lines; the profile goes via write_profile_csv.
void write_approx_summary_csv(const ApproxReport& r, std::ostream& out);

}  // namespace privswarm
