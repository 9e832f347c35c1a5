#pragma once

// Monte Carlo sweeps over outlier rates and methods, CSV output, and summaries.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "gnc/errors.hpp"
#include "gnc/gnc.hpp"
#include "gnc/ply.hpp"
#include "gnc/random.hpp"
#include "gnc/ransac.hpp"
#include "gnc/registration.hpp"
#include "gnc/shape_alignment.hpp"
#include "gnc/synthetic.hpp"

namespace gnc {

enum class Application { Registration, ShapeAlignment };
enum class Method { GncGm, GncTls, Ransac, NonRobustLs };

inline constexpr std::array<Method, 4> kAllMethods = {Method::GncGm, Method::GncTls,
                                                      Method::Ransac, Method::NonRobustLs};

inline std::string_view to_string(Application app) {
  return app == Application::Registration ? "registration" : "shape";
}

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::GncGm: return "gnc-gm";
    case Method::GncTls: return "gnc-tls";
    case Method::Ransac: return "ransac";
    case Method::NonRobustLs: return "ls";
  }
  return "?";
}

inline std::optional<Application> parse_application(std::string_view s) {
  if (s == "registration") return Application::Registration;
  if (s == "shape" || s == "shape-alignment") return Application::ShapeAlignment;
  return std::nullopt;
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : kAllMethods) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

/// Noise bound used when none is given: 6 sigma, or 1e-3 for noiseless data.
inline double default_c_bar(double sigma) { return sigma > 0.0 ? 6.0 * sigma : 1e-3; }

// ---------------------------------------------------------------------------
// One solve.

struct MethodSettings {
  double c_bar = 0.06;
  std::uint64_t seed = 0;
  /// 0 selects the per-application default (1000 registration, 100 shape).
  std::size_t ransac_max_iterations = 0;
  /// Random restarts of the shape-alignment minimizer.
  std::size_t restarts = 16;
};

template <typename Pose>
struct MethodOutcome {
  Pose estimate;
  std::vector<bool> inlier_mask;
  /// GNC outer iterations, RANSAC sampling iterations, 1 for least squares.
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t inlier_count() const {
    return static_cast<std::size_t>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
  }
};

namespace detail {

template <typename Problem, typename Pose>
MethodOutcome<Pose> run_gnc_method(const Problem& problem, CostKind kind, double c_bar) {
  GncConfig config{RobustCostSpec(kind, c_bar)};
  auto result = run_gnc(problem, config);
  return {std::move(result.estimate), std::move(result.inlier_mask), result.outer_iterations,
          result.converged};
}

}  // namespace detail

/// Throws gnc::Error when the underlying solver fails.
inline MethodOutcome<RigidPose> solve_registration(std::span<const PointCorrespondence> corrs,
                                                   Method method,
                                                   const MethodSettings& settings) {
  const RegistrationProblem problem(corrs);
  switch (method) {
    case Method::GncGm:
      return detail::run_gnc_method<RegistrationProblem, RigidPose>(
          problem, CostKind::GemanMcClure, settings.c_bar);
    case Method::GncTls:
      return detail::run_gnc_method<RegistrationProblem, RigidPose>(
          problem, CostKind::TruncatedLS, settings.c_bar);
    case Method::Ransac: {
      RansacConfig config = ransac_registration_defaults(settings.c_bar, settings.seed);
      if (settings.ransac_max_iterations > 0) config.max_iterations = settings.ransac_max_iterations;
      auto r = ransac_registration(corrs, config);
      return {r.estimate, std::move(r.inlier_mask), r.iterations_used, true};
    }
    case Method::NonRobustLs:
      break;
  }
  RigidPose pose = problem.solve_weighted(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(corrs.size())));
  return {pose, std::vector<bool>(corrs.size(), true), 1, true};
}

inline MethodOutcome<WeakPerspectivePose> solve_shape(std::span<const ShapeCorrespondence> corrs,
                                                      Method method,
                                                      const MethodSettings& settings) {
  const MinimizeOptions options{settings.restarts, mix_seed(settings.seed)};
  const ShapeAlignmentProblem problem(corrs, options);
  switch (method) {
    case Method::GncGm:
      return detail::run_gnc_method<ShapeAlignmentProblem, WeakPerspectivePose>(
          problem, CostKind::GemanMcClure, settings.c_bar);
    case Method::GncTls:
      return detail::run_gnc_method<ShapeAlignmentProblem, WeakPerspectivePose>(
          problem, CostKind::TruncatedLS, settings.c_bar);
    case Method::Ransac: {
      RansacConfig config = ransac_shape_alignment_defaults(settings.c_bar, settings.seed);
      if (settings.ransac_max_iterations > 0) config.max_iterations = settings.ransac_max_iterations;
      auto r = ransac_shape_alignment(corrs, config, settings.restarts);
      return {r.estimate, std::move(r.inlier_mask), r.iterations_used, true};
    }
    case Method::NonRobustLs:
      break;
  }
  WeakPerspectivePose pose =
      problem.solve_weighted(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(corrs.size())));
  return {pose, std::vector<bool>(corrs.size(), true), 1, true};
}

// ---------------------------------------------------------------------------
// Sweep.

struct BenchSpec {
  Application application = Application::Registration;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  std::vector<double> outlier_rates{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t runs_per_rate = 20;
  /// 0 selects the per-application default (100 registration, 50 shape).
  std::size_t n = 0;
  double sigma = 0.01;
  std::optional<double> c_bar;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::size_t ransac_max_iterations = 0;
  std::size_t restarts = 16;
  /// Registration only: draw source points from this cloud.
  std::optional<std::string> ply_path;

  std::size_t effective_n() const {
    if (n > 0) return n;
    return application == Application::Registration ? 100 : 50;
  }

  double effective_c_bar() const { return c_bar ? *c_bar : default_c_bar(sigma); }

  void validate() const {
    if (methods.empty()) throw std::invalid_argument("BenchSpec: no methods");
    if (outlier_rates.empty()) throw std::invalid_argument("BenchSpec: no outlier rates");
    if (runs_per_rate == 0) throw std::invalid_argument("BenchSpec: runs_per_rate must be >= 1");
    for (std::size_t i = 0; i < outlier_rates.size(); ++i) {
      const double r = outlier_rates[i];
      if (!(r >= 0.0 && r < 1.0)) {
        throw std::invalid_argument("BenchSpec: outlier rates must lie in [0, 1)");
      }
      if (i > 0 && !(r > outlier_rates[i - 1])) {
        throw std::invalid_argument("BenchSpec: outlier rates must be strictly increasing");
      }
    }
    if (!(sigma >= 0.0)) throw std::invalid_argument("BenchSpec: sigma must be >= 0");
    if (c_bar && !(*c_bar > 0.0)) throw std::invalid_argument("BenchSpec: c_bar must be > 0");
    if (ply_path && application != Application::Registration) {
      throw std::invalid_argument("BenchSpec: a PLY cloud applies to registration only");
    }
  }
};

inline constexpr double kFailureSentinel = 1e9;

struct BenchRecord {
  std::string method;
  double outlier_rate = 0.0;
  std::size_t run_index = 0;
  double rotation_error_deg = 0.0;
  double translation_error = 0.0;
  std::optional<double> scale_error;
  std::size_t outer_iterations = 0;
  double wall_time_ms = 0.0;
  bool converged = false;
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision and recall of `predicted` inliers against the ground-truth
/// outlier mask. Empty denominators count as perfect.
inline std::pair<double, double> precision_recall(const std::vector<bool>& predicted_inliers,
                                                  const std::vector<bool>& outlier_mask) {
  std::size_t tp = 0, predicted = 0, actual = 0;
  for (std::size_t i = 0; i < outlier_mask.size(); ++i) {
    const bool truth = !outlier_mask[i];
    const bool pred = i < predicted_inliers.size() && predicted_inliers[i];
    tp += (truth && pred) ? 1 : 0;
    predicted += pred ? 1 : 0;
    actual += truth ? 1 : 0;
  }
  const double precision = predicted == 0 ? (actual == 0 ? 1.0 : 0.0)
                                          : static_cast<double>(tp) / static_cast<double>(predicted);
  const double recall = actual == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(actual);
  return {precision, recall};
}

namespace detail {

template <typename Instance, typename SolveFn>
void run_cell_methods(const BenchSpec& spec, const Instance& inst, double rate,
                      std::size_t run, std::uint64_t instance_seed, SolveFn&& solve,
                      std::vector<BenchRecord>& out) {
  const bool shape = spec.application == Application::ShapeAlignment;
  for (Method m : spec.methods) {
    MethodSettings settings;
    settings.c_bar = spec.effective_c_bar();
    settings.seed = derive_seed(instance_seed, static_cast<std::uint64_t>(m) + 1, 0);
    settings.ransac_max_iterations = spec.ransac_max_iterations;
    settings.restarts = spec.restarts;

    BenchRecord rec;
    rec.method = std::string(to_string(m));
    rec.outlier_rate = rate;
    rec.run_index = run;
    const auto start = std::chrono::steady_clock::now();
    try {
      auto outcome = solve(m, settings);
      rec.wall_time_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
      const ErrorMetrics err = pose_errors(outcome.estimate, inst.ground_truth);
      rec.rotation_error_deg = err.rotation_error_deg;
      rec.translation_error = err.translation_error;
      rec.scale_error = err.scale_error;
      rec.outer_iterations = outcome.iterations;
      rec.converged = outcome.converged;
      std::tie(rec.precision, rec.recall) = precision_recall(outcome.inlier_mask, inst.outlier_mask);
    } catch (const Error&) {
      rec.wall_time_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
      rec.rotation_error_deg = kFailureSentinel;
      rec.translation_error = kFailureSentinel;
      if (shape) rec.scale_error = kFailureSentinel;
      rec.converged = false;
    }
    out.push_back(std::move(rec));
  }
}

}  // namespace detail

/// Records in (rate, run, method) order, independent of `jobs`.
inline std::vector<BenchRecord> run_benchmark(const BenchSpec& spec) {
  spec.validate();
  const std::size_t n = spec.effective_n();
  const std::size_t cells = spec.outlier_rates.size() * spec.runs_per_rate;

  std::vector<Eigen::Vector3d> cloud;
  if (spec.ply_path) cloud = load_ply_points(*spec.ply_path);

  std::vector<std::vector<BenchRecord>> cell_records(cells);
  auto run_cell = [&](std::size_t cell) {
    const std::size_t rate_index = cell / spec.runs_per_rate;
    const std::size_t run = cell % spec.runs_per_rate;
    const double rate = spec.outlier_rates[rate_index];
    const std::uint64_t seed = derive_seed(spec.seed, rate_index, run);
    auto& out = cell_records[cell];
    if (spec.application == Application::Registration) {
      const auto inst = generate_registration({n, spec.sigma, rate, seed, std::nullopt}, cloud);
      detail::run_cell_methods(spec, inst, rate, run, seed,
                               [&](Method m, const MethodSettings& s) {
                                 return solve_registration(inst.correspondences, m, s);
                               },
                               out);
    } else {
      const auto inst = generate_shape_alignment({n, spec.sigma, rate, seed});
      detail::run_cell_methods(spec, inst, rate, run, seed,
                               [&](Method m, const MethodSettings& s) {
                                 return solve_shape(inst.correspondences, m, s);
                               },
                               out);
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(spec.jobs, 1, cells);
  if (jobs == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) {
      workers.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) {
          try {
            run_cell(c);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<BenchRecord> records;
  records.reserve(cells * spec.methods.size());
  for (auto& cell : cell_records) {
    for (auto& r : cell) records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// CSV.

inline constexpr std::string_view kCsvHeader =
    "method,outlier_rate,run_index,rotation_error_deg,translation_error,scale_error,"
    "outer_iterations,wall_time_ms,converged,precision,recall";

/// Shortest round-trip representation, independent of the stream locale.
inline std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), ptr);
}

inline void write_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.method << ',' << format_double(r.outlier_rate) << ',' << r.run_index << ','
        << format_double(r.rotation_error_deg) << ',' << format_double(r.translation_error)
        << ',' << (r.scale_error ? format_double(*r.scale_error) : std::string()) << ','
        << r.outer_iterations << ',' << format_double(r.wall_time_ms) << ','
        << (r.converged ? "true" : "false") << ',' << format_double(r.precision) << ','
        << format_double(r.recall) << '\n';
  }
}

inline std::vector<BenchRecord> read_csv(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(name, 0, "empty CSV");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ParseError(name, line_no, "unexpected CSV header");

  std::vector<BenchRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 11) throw ParseError(name, line_no, "expected 11 fields");

    BenchRecord r;
    auto num = [&](std::string_view s, double& v) {
      if (!detail::parse_double(s, v)) {
        throw ParseError(name, line_no, "invalid number '" + std::string(s) + "'");
      }
    };
    auto count = [&](std::string_view s, std::size_t& v) {
      if (!detail::parse_size(s, v)) {
        throw ParseError(name, line_no, "invalid integer '" + std::string(s) + "'");
      }
    };
    r.method = std::string(f[0]);
    num(f[1], r.outlier_rate);
    count(f[2], r.run_index);
    num(f[3], r.rotation_error_deg);
    num(f[4], r.translation_error);
    if (!f[5].empty()) {
      double s = 0.0;
      num(f[5], s);
      r.scale_error = s;
    }
    count(f[6], r.outer_iterations);
    num(f[7], r.wall_time_ms);
    if (f[8] == "true") {
      r.converged = true;
    } else if (f[8] != "false") {
      throw ParseError(name, line_no, "converged must be true or false");
    }
    num(f[9], r.precision);
    num(f[10], r.recall);
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Summary.

struct SummaryRow {
  std::string method;
  double outlier_rate = 0.0;
  std::size_t runs = 0;
  double median_rotation_error_deg = 0.0;
  double max_rotation_error_deg = 0.0;
  double median_translation_error = 0.0;
  double max_translation_error = 0.0;
  std::optional<double> median_scale_error;
  std::optional<double> max_scale_error;
  double mean_outer_iterations = 0.0;
  std::size_t converged_runs = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// One row per (method, rate), ordered by rate then first appearance of the
/// method.
inline std::vector<SummaryRow> summarize(const std::vector<BenchRecord>& records) {
  std::vector<std::string> method_order;
  for (const auto& r : records) {
    if (std::find(method_order.begin(), method_order.end(), r.method) == method_order.end()) {
      method_order.push_back(r.method);
    }
  }
  auto method_rank = [&](const std::string& m) {
    return static_cast<std::size_t>(
        std::find(method_order.begin(), method_order.end(), m) - method_order.begin());
  };

  std::map<std::pair<double, std::size_t>, std::vector<const BenchRecord*>> groups;
  for (const auto& r : records) groups[{r.outlier_rate, method_rank(r.method)}].push_back(&r);

  std::vector<SummaryRow> rows;
  for (const auto& [key, group] : groups) {
    SummaryRow row;
    row.method = method_order[key.second];
    row.outlier_rate = key.first;
    row.runs = group.size();
    std::vector<double> rot, trans, scale;
    double iters = 0.0;
    for (const BenchRecord* r : group) {
      rot.push_back(r->rotation_error_deg);
      trans.push_back(r->translation_error);
      if (r->scale_error) scale.push_back(*r->scale_error);
      iters += static_cast<double>(r->outer_iterations);
      row.converged_runs += r->converged ? 1 : 0;
    }
    row.median_rotation_error_deg = median(rot);
    row.max_rotation_error_deg = *std::max_element(rot.begin(), rot.end());
    row.median_translation_error = median(trans);
    row.max_translation_error = *std::max_element(trans.begin(), trans.end());
    if (!scale.empty()) {
      row.median_scale_error = median(scale);
      row.max_scale_error = *std::max_element(scale.begin(), scale.end());
    }
    row.mean_outer_iterations = iters / static_cast<double>(group.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "method,outlier_rate,runs,median_rotation_error_deg,max_rotation_error_deg,"
         "median_translation_error,max_translation_error,median_scale_error,max_scale_error,"
         "mean_outer_iterations,converged_runs\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : rows) {
    out << r.method << ',' << format_double(r.outlier_rate) << ',' << r.runs << ','
        << format_double(r.median_rotation_error_deg) << ','
        << format_double(r.max_rotation_error_deg) << ','
        << format_double(r.median_translation_error) << ','
        << format_double(r.max_translation_error) << ',' << opt(r.median_scale_error) << ','
        << opt(r.max_scale_error) << ',' << format_double(r.mean_outer_iterations) << ','
        << r.converged_runs << '\n';
  }
}

}  // namespace gnc
