#include "privswarm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numbers>
#include <ostream>
#include <random>

#include "privswarm/errors.hpp"
#include "privswarm/mpc_nn.hpp"
#include "privswarm/protocols.hpp"
#include "privswarm/scenario.hpp"

namespace privswarm {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

constexpr double kKb = 1024.0;

}  // namespace

std::vector<BenchRow> run_bench(const ModelWeights& model, const BenchOptions& o) {
  if (o.reps < 1) throw RangeError("reps must be >= 1");
  if (o.prompt_len < 1 || o.steps < 1 || o.prompt_len + o.steps > model.config.max_seq)
    throw RangeError("bench workload does not fit max_seq " + std::to_string(model.config.max_seq));
  for (std::size_t s : o.swarm_sizes)
    if (s == 0) throw RangeError("swarm sizes must be >= 1");
  const EncodedModel em = encode_model(model, o.fixed_point);
  const std::uint64_t digest = model_digest(model);

  auto prompt_of = [&](std::size_t i) {
    std::mt19937_64 rng(o.seed + i);
    std::uniform_int_distribution<int> tok(0, model.config.vocab - 1);
    std::vector<int> p(static_cast<std::size_t>(o.prompt_len));
    for (int& t : p) t = tok(rng);
    return p;
  };

  std::vector<BenchRow> rows;
  for (std::size_t size : o.swarm_sizes) {
    BenchRow row;
    row.swarm_size = size;
    row.seed = o.seed;
    std::vector<double> times;
    for (int rep = 0; rep < o.reps; ++rep) {
      const auto t0 = Clock::now();
      std::vector<std::future<EncryptedRun>> runs;
      for (std::size_t i = 0; i < size; ++i) {
        SessionConfig cfg;
        cfg.seed = o.seed + i;
        cfg.transport = o.transport;
        cfg.carry_mode = o.carry_mode;
        cfg.model_digest = digest;
        runs.push_back(std::async(std::launch::async, [&em, &o, cfg, p = prompt_of(i)] {
          return encrypted_generate(em, p, o.steps, cfg);
        }));
      }
      std::vector<EncryptedRun> done;
      for (auto& f : runs) done.push_back(f.get());
      times.push_back(ms_since(t0));
      if (rep == 0) {
        std::array<std::uint64_t, 3> pair{};
        std::uint64_t total = 0;
        for (const auto& r : done) {
          for (int a = 0; a < 3; ++a) {
            const PartyId x = party_at(a), y = party_at((a + 1) % 3);
            pair[a] += r.stats.pair_bytes(x, y) + r.stats.pair_bytes(y, x);
          }
          total += r.stats.total_bytes();
          row.rounds = std::max(row.rounds, r.stats.total_rounds());
        }
        if (pair[0] + pair[1] + pair[2] != total)
          throw ProtocolDesyncError("per-pair bytes do not add up to the total");
        for (int a = 0; a < 3; ++a) row.comm_kb_per_pair[a] = static_cast<double>(pair[a]) / kKb;
        row.comm_kb_total = static_cast<double>(total) / kKb;
      }
    }
    row.computation_ms = median(times);
    rows.push_back(row);
  }
  return rows;
}

std::vector<BenchRow> run_bench(const std::filesystem::path& model, const BenchOptions& options) {
  return run_bench(load_model(model), options);
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
  out << "# privswarm bench v" << kBenchCsvVersion << "\n";
  out << "swarm_size,computation_ms,comm_kb_total,comm_kb_p1p2,comm_kb_p2p3,comm_kb_p3p1,rounds,seed\n";
  for (const auto& r : rows) {
    out << r.swarm_size << ',' << r.computation_ms << ',' << r.comm_kb_total;
    for (double p : r.comm_kb_per_pair) out << ',' << p;
    out << ',' << r.rounds << ',' << r.seed << '\n';
  }
}

LinearFit fit_comm_kb(const std::vector<BenchRow>& rows) {
  LinearFit fit;
  const double n = static_cast<double>(rows.size());
  if (rows.empty()) return fit;
  double sx = 0, sy = 0;
  for (const auto& r : rows) {
    sx += static_cast<double>(r.swarm_size);
    sy += r.comm_kb_total;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& r : rows) {
    const double dx = static_cast<double>(r.swarm_size) - mx, dy = r.comm_kb_total - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  fit.slope = sxx > 0 ? sxy / sxx : 0;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (const auto& r : rows) {
    const double e = r.comm_kb_total - (fit.intercept + fit.slope * static_cast<double>(r.swarm_size));
    ss_res += e * e;
  }
  fit.r2 = syy > 0 ? 1 - ss_res / syy : (ss_res == 0 ? 1 : 0);
  return fit;
}

const std::vector<PublishedRow>& published_operating_points() {
  static const std::vector<PublishedRow> rows = {
      {2, 520.53, 864.0}, {3, 780.78, 1286.0}, {4, 1041.05, 1726.0}};
  return rows;
}

ApproxFunction parse_approx_function(const std::string& name) {
  if (name == "gelu") return ApproxFunction::gelu;
  if (name == "softmax") return ApproxFunction::softmax;
  if (name == "exp") return ApproxFunction::exp;
  if (name == "reciprocal") return ApproxFunction::reciprocal;
  if (name == "rsqrt") return ApproxFunction::rsqrt;
  throw ValidationError("unknown function '" + name + "' (gelu, softmax, exp, reciprocal, rsqrt)");
}

std::string approx_function_name(ApproxFunction f) {
  switch (f) {
    case ApproxFunction::gelu: return "gelu";
    case ApproxFunction::softmax: return "softmax";
    case ApproxFunction::exp: return "exp";
    case ApproxFunction::reciprocal: return "reciprocal";
    case ApproxFunction::rsqrt: return "rsqrt";
  }
  return "?";
}

std::vector<double> chebyshev_fit(const std::function<double(double)>& f, double lo, double hi,
                                  int degree, int nodes) {
  if (degree < 0 || nodes <= degree) throw RangeError("need nodes > degree >= 0");
  if (!(hi > lo)) throw RangeError("chebyshev_fit needs lo < hi");
  std::vector<double> fx(static_cast<std::size_t>(nodes)), c(static_cast<std::size_t>(degree) + 1);
  for (int j = 0; j < nodes; ++j) {
    const double u = std::cos(std::numbers::pi * (j + 0.5) / nodes);
    fx[j] = f(0.5 * (hi + lo) + 0.5 * (hi - lo) * u);
  }
  for (int k = 0; k <= degree; ++k) {
    double s = 0;
    for (int j = 0; j < nodes; ++j) s += fx[j] * std::cos(std::numbers::pi * k * (j + 0.5) / nodes);
    c[k] = 2.0 * s / nodes;
  }
  c[0] *= 0.5;
  return c;
}

namespace {

PublicTensor pub(Party& party, double v) {
  return PublicTensor::scalar(party.fixed_point().encode(v), party.frac_bits());
}

// Clenshaw over the shares, u = (2x - lo - hi) / (hi - lo).
SharedTensor mpc_chebyshev(Party& party, const SharedTensor& x, const std::vector<double>& c,
                           double lo, double hi) {
  const int n = static_cast<int>(c.size()) - 1;
  const SharedTensor u = add_public(trunc(party, mul_public(x, pub(party, 2 / (hi - lo)))),
                                    pub(party, -(lo + hi) / (hi - lo)));
  if (n == 0) return add_public(SharedTensor::zeros(party.id(), x.shape, x.scale), pub(party, c[0]));
  SharedTensor b2 = SharedTensor::zeros(party.id(), x.shape, x.scale);
  SharedTensor b1 = add_public(b2, pub(party, c[n]));
  for (int k = n - 1; k >= 1; --k) {
    const SharedTensor t = mul_trunc(party, u, b1);
    SharedTensor bk = add_public(sub(mul_integer(t, 2), b2), pub(party, c[k]));
    b2 = std::move(b1);
    b1 = std::move(bk);
  }
  return add_public(sub(mul_trunc(party, u, b1), b2), pub(party, c[0]));
}

// mpc_softmax with exp replaced by a polynomial on [zlo, 0]. Rows must
// hold values spanning at most -zlo.
SharedTensor softmax_poly_exp(Party& party, const SharedTensor& x, const std::vector<double>& c,
                              double zlo, const std::vector<std::uint8_t>& mask) {
  PhaseScope scope(party, Phase::softmax);
  const std::size_t n = last_dim(x.shape);
  // Masked entries repeat a real value of their row, so z stays in the
  // fitted range; their exponentials are zeroed afterwards.
  const SharedTensor z = sub(x, repeat_cols(max_last(party, x), n));
  SharedTensor e = mpc_chebyshev(party, z, c, zlo, 0);
  if (!mask.empty()) {
    PublicTensor keep(e.shape, std::vector<Ring>(e.size(), 1), 0);
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) keep.data[i] = 0;
    e = mul_public(e, keep);
  }
  const SharedTensor r = reciprocal_approx(party, row_sum(e));
  return mul_trunc(party, e, repeat_cols(r, n));
}

struct Measured {
  MpcCost cost;
  std::vector<double> out;
};

template <class F>
Measured measure(Session& s, const PublicTensor& input, F&& fn) {
  auto shared = s.run([&](Party& p) {
    std::optional<PublicTensor> v;
    if (p.id() == PartyId::p1) v = input;
    return share_input(p, PartyId::p1, v, input.shape, input.scale);
  });
  s.reset_stats();
  const auto t0 = Clock::now();
  auto y = s.run([&](Party& p) { return fn(p, shared[index_of(p.id())]); });
  Measured m;
  m.cost.wall_ms = ms_since(t0);
  const CommStats st = s.stats();
  m.cost.rounds = st.total_rounds();
  m.cost.bytes = st.total_bytes();
  const auto ring = reconstruct(y[0], y[1]);
  m.out.reserve(ring.size());
  for (Ring r : ring) m.out.push_back(s.config().fixed_point.decode(r));
  return m;
}

}  // namespace

ApproxReport approx_report(ApproxFunction f, double lo, double hi, double step,
                           const ApproxOptions& o) {
  struct Range {
    double lo, hi;
  };
  auto within = [&](Range r) {
    if (lo < r.lo || hi > r.hi)
      throw RangeError(approx_function_name(f) + " domain must lie in [" + std::to_string(r.lo) +
                       ", " + std::to_string(r.hi) + "]");
  };
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw RangeError("bad domain");
  std::function<double(double)> exact, approx;
  const FixedPoint fp = o.fixed_point;
  switch (f) {
    case ApproxFunction::gelu:
      exact = [](double x) { return gelu_reference(x, GeluKind::exact); };
      approx = [](double x) { return gelu_reference(x, GeluKind::paper_piecewise); };
      within({-64, 64});
      break;
    case ApproxFunction::exp:
      exact = [](double x) { return std::exp(x); };
      approx = exp_limit;
      within({-16, 4});
      break;
    case ApproxFunction::reciprocal:
      exact = [](double x) { return 1 / x; };
      approx = reciprocal_newton;
      within({0.0625, 500});
      break;
    case ApproxFunction::rsqrt:
      exact = [](double x) { return 1 / std::sqrt(x); };
      approx = rsqrt_newton;
      within({0.0625, 256});
      break;
    case ApproxFunction::softmax:
      within({-32, 32});
      break;
  }

  ApproxReport rep;
  rep.function = f;
  rep.lo = lo;
  rep.hi = hi;
  rep.step = step;

  SessionConfig cfg;
  cfg.seed = o.seed;
  cfg.fixed_point = fp;
  cfg.carry_mode = o.carry_mode;
  auto session = establish_session(cfg);

  if (f != ApproxFunction::softmax) {
    rep.profile = approx_error_profile(exact, approx, lo, hi, step);
    const auto& grid = rep.profile.grid;
    std::vector<Ring> enc(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) enc[i] = fp.encode(grid[i]);
    const PublicTensor input(Shape{grid.size()}, enc, fp.frac_bits());

    const double blo = hi > lo ? lo : lo - 0.5, bhi = hi > lo ? hi : hi + 0.5;
    std::vector<double> coeffs;
    Measured mpc, base;
    if (f == ApproxFunction::gelu) {
      mpc = measure(session, input, [](Party& p, const SharedTensor& x) { return mpc_gelu(p, x); });
      base = measure(session, input, [](Party& p, const SharedTensor& x) { return mpc_gelu_poly(p, x); });
      rep.baseline_name = "chebyshev degree " + std::to_string(kGeluPolyDegree) + " on [-5, 5]";
    } else {
      const ElementaryKind kind = f == ApproxFunction::exp          ? ElementaryKind::exp
                                  : f == ApproxFunction::reciprocal ? ElementaryKind::reciprocal
                                                                    : ElementaryKind::rsqrt;
      mpc = measure(session, input,
                    [kind](Party& p, const SharedTensor& x) { return elementary_approx(p, kind, x); });
      coeffs = chebyshev_fit(exact, blo, bhi, o.baseline_degree);
      base = measure(session, input, [&](Party& p, const SharedTensor& x) {
        return mpc_chebyshev(p, x, coeffs, blo, bhi);
      });
      rep.baseline_name = "chebyshev degree " + std::to_string(o.baseline_degree) + " on the domain";
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double e = exact(grid[i]);
      mpc.cost.max_abs_error = std::max(mpc.cost.max_abs_error, std::abs(mpc.out[i] - e));
      base.cost.max_abs_error = std::max(base.cost.max_abs_error, std::abs(base.out[i] - e));
    }
    rep.mpc = mpc.cost;
    rep.baseline = base.cost;
  } else {
    // Consecutive grid values form rows; the short last row is masked.
    ErrorProfile probe = approx_error_profile([](double) { return 0.0; }, [](double) { return 0.0; },
                                              lo, hi, step);
    const std::vector<double>& grid = probe.grid;
    const std::size_t w = std::max<std::size_t>(1, o.softmax_row);
    const std::size_t rows = (grid.size() + w - 1) / w;
    std::vector<Ring> enc(rows * w, fp.encode(grid[(rows - 1) * w]));
    std::vector<std::uint8_t> mask(rows * w, 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      enc[i] = fp.encode(grid[i]);
      mask[i] = 0;
    }
    if (grid.size() == rows * w) mask.clear();
    const PublicTensor input(Shape{rows, w}, enc, fp.frac_bits());

    std::vector<double> want(grid.size());
    for (std::size_t r = 0; r < rows; ++r) {
      double mx = -INFINITY, sum = 0;
      for (std::size_t j = r * w; j < std::min(grid.size(), (r + 1) * w); ++j) mx = std::max(mx, grid[j]);
      for (std::size_t j = r * w; j < std::min(grid.size(), (r + 1) * w); ++j) sum += std::exp(grid[j] - mx);
      for (std::size_t j = r * w; j < std::min(grid.size(), (r + 1) * w); ++j)
        want[j] = std::exp(grid[j] - mx) / sum;
    }
    const PublicTensor fixed = fixed_ref::softmax(input, 1.0, mask, fp);
    rep.profile.grid = grid;
    rep.profile.exact = want;
    double total = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double a = fp.decode(fixed.data[i]);
      const double e = std::abs(a - want[i]);
      rep.profile.approx.push_back(a);
      rep.profile.abs_error.push_back(e);
      total += e;
      if (e > rep.profile.max_abs) {
        rep.profile.max_abs = e;
        rep.profile.argmax_x = grid[i];
      }
      if (want[i] != 0) rep.profile.max_rel = std::max(rep.profile.max_rel, e / std::abs(want[i]));
    }
    rep.profile.mean_abs = std::min(rep.profile.max_abs, total / static_cast<double>(grid.size()));

    Measured mpc = measure(session, input, [&](Party& p, const SharedTensor& x) {
      return mpc_softmax(p, x, 1.0, mask);
    });
    const double zlo = std::min(-1.0, lo - hi);
    const auto coeffs = chebyshev_fit([](double z) { return std::exp(z); }, zlo, 0, o.baseline_degree);
    Measured base = measure(session, input, [&](Party& p, const SharedTensor& x) {
      return softmax_poly_exp(p, x, coeffs, zlo, mask);
    });
    rep.baseline_name = "softmax with chebyshev degree " + std::to_string(o.baseline_degree) +
                        " exp on [" + std::to_string(zlo) + ", 0]";
    rep.min_output = INFINITY;
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0;
      for (std::size_t j = r * w; j < std::min(grid.size(), (r + 1) * w); ++j) {
        sum += mpc.out[j];
        rep.min_output = std::min(rep.min_output, mpc.out[j]);
        mpc.cost.max_abs_error = std::max(mpc.cost.max_abs_error, std::abs(mpc.out[j] - want[j]));
        base.cost.max_abs_error = std::max(base.cost.max_abs_error, std::abs(base.out[j] - want[j]));
      }
      rep.max_row_sum_error = std::max(rep.max_row_sum_error, std::abs(sum - 1));
    }
    rep.mpc = mpc.cost;
    rep.baseline = base.cost;
  }
  rep.round_ratio = rep.baseline.rounds ? static_cast<double>(rep.mpc.rounds) /
                                              static_cast<double>(rep.baseline.rounds)
                                        : 0;
  rep.time_ratio = rep.baseline.wall_ms > 0 ? rep.mpc.wall_ms / rep.baseline.wall_ms : 0;
  return rep;
}

void write_approx_summary_csv(const ApproxReport& r, std::ostream& out) {
  out << "key,value\n"
      << "function," << approx_function_name(r.function) << '\n'
      << "lo," << r.lo << "\nhi," << r.hi << "\nstep," << r.step << '\n'
      << "points," << r.profile.grid.size() << '\n'
      << "max_abs_error," << r.profile.max_abs << '\n'
      << "mean_abs_error," << r.profile.mean_abs << '\n'
      << "argmax_x," << r.profile.argmax_x << '\n'
      << "mpc_rounds," << r.mpc.rounds << "\nmpc_bytes," << r.mpc.bytes << '\n'
      << "mpc_ms," << r.mpc.wall_ms << "\nmpc_max_abs_error," << r.mpc.max_abs_error << '\n'
      << "baseline,\"" << r.baseline_name << "\"\n"
      << "baseline_rounds," << r.baseline.rounds << "\nbaseline_bytes," << r.baseline.bytes << '\n'
      << "baseline_ms," << r.baseline.wall_ms << "\nbaseline_max_abs_error," << r.baseline.max_abs_error
      << '\n'
      << "round_ratio," << r.round_ratio << "\ntime_ratio," << r.time_ratio << '\n';
  if (r.function == ApproxFunction::softmax)
    out << "max_row_sum_error," << r.max_row_sum_error << "\nmin_output," << r.min_output << '\n';
}

}  // namespace privswarm
