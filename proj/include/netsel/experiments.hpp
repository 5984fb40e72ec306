#pragma once

// Batch experiments over a scenario: strategy comparison with common random
// numbers, the connectivity sweep over beta, and leverage-score histograms.
// All outputs are CSV with LF line endings and shortest round-trip decimals.

#include <netsel/config.hpp>
#include <netsel/simulation.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace netsel {

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Accumulates rows and writes them in one go; the file is opened in binary
/// mode so line endings are LF on every platform.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { add(header); }

  void add(const std::vector<std::string>& row) {
    if (row.size() != columns_) throw Error("csv: row width does not match header");
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) text_ += ',';
      text_ += row[k];
    }
    text_ += '\n';
    ++rows_;
  }
  std::size_t rows() const { return rows_ - 1; }
  const std::string& text() const { return text_; }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text_;
    out.flush();
    if (!out) throw Error("write failed for " + path.string());
  }

 private:
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

/// Runs job(0..count-1) on up to `threads` workers. Jobs write to their own
/// slots, so the caller's reduction order is fixed regardless of scheduling.
inline void parallel_for(int count, int threads, const std::function<void(int)>& job) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::uint64_t replicate_seed(std::uint64_t master, int r) {
  return derive_seed(master, {static_cast<std::uint64_t>(Stream::Replicate), static_cast<std::uint64_t>(r)});
}

struct RunArtifacts {
  std::vector<std::filesystem::path> files;
};

struct StrategySummary {
  Strategy strategy = Strategy::Randomized;
  std::vector<double> theta;    ///< replicate mean per tau
  std::vector<double> psi;
  std::vector<double> psi_max;
  double mean_theta = 0.0;      ///< time average of `theta`
  double mean_psi = 0.0;
  double mean_selected = 0.0;   ///< average |Phi| per cycle
  double mean_candidates = 0.0;
};

struct ComparisonResult {
  std::vector<StrategySummary> strategies;
  std::vector<std::vector<RunState>> runs;  ///< [strategy][replicate]
  RunArtifacts artifacts;

  const StrategySummary& get(Strategy s) const {
    for (const auto& x : strategies)
      if (x.strategy == s) return x;
    throw Error("comparison: strategy not run");
  }
};

struct ExperimentOptions {
  int replicates = 1;
  int threads = 0;  ///< 0: hardware concurrency
  bool keep_runs = false;
  bool gnuplot = true;
};

inline StrategySummary summarize(Strategy s, const std::vector<RunState>& runs) {
  StrategySummary out;
  out.strategy = s;
  const std::size_t steps = runs.front().records.size();
  out.theta.assign(steps, 0.0);
  out.psi.assign(steps, 0.0);
  out.psi_max.assign(steps, 0.0);
  std::size_t cycles = 0;
  for (const auto& run : runs) {
    for (std::size_t k = 0; k < steps; ++k) {
      out.theta[k] += run.records[k].theta / runs.size();
      out.psi[k] += run.records[k].psi / runs.size();
      out.psi_max[k] += run.records[k].psi_max / runs.size();
    }
    for (const auto& c : run.cycles) {
      out.mean_selected += static_cast<double>(c.chosen_ids.size());
      out.mean_candidates += c.candidates;
      ++cycles;
    }
  }
  for (std::size_t k = 0; k < steps; ++k) {
    out.mean_theta += out.theta[k] / steps;
    out.mean_psi += out.psi[k] / steps;
  }
  if (cycles) {
    out.mean_selected /= cycles;
    out.mean_candidates /= cycles;
  }
  return out;
}

inline void write_gnuplot(const std::filesystem::path& path, const std::string& csv, const std::string& key,
                          const std::vector<std::string>& groups, const std::string& group_col,
                          const std::string& ylabel, int ycol) {
  std::string s;
  s += "set datafile separator ','\nset xlabel 'tau'\n";
  s += "set ylabel '" + ylabel + "'\nset terminal pngcairo size 900,500\n";
  s += "set output '" + key + ".png'\nplot ";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g) s += ", \\\n     ";
    s += "'" + csv + "' using 2:(strcol(1) eq '" + groups[g] + "' ? $" + std::to_string(ycol) +
         " : 1/0) every ::1 with lines title '" + group_col + groups[g] + "'";
  }
  s += "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << s;
  if (!out) throw Error("write failed for " + path.string());
}

/// All strategies on the same replicate seeds. Noise streams are keyed by
/// (seed, purpose, step, index), so every strategy consumes the same
/// realizations; truths still diverge once estimates feed back into control.
inline ComparisonResult run_comparison(const Scenario& sc, std::uint64_t master_seed,
                                       const std::vector<Strategy>& strategies,
                                       const ExperimentOptions& opt, const std::filesystem::path& out_dir) {
  if (strategies.empty()) throw Error("comparison: no strategies");
  if (opt.replicates < 1) throw Error("comparison: replicates must be positive");
  sc.validate();
  const int ns = static_cast<int>(strategies.size());
  std::vector<std::vector<RunState>> runs(static_cast<std::size_t>(ns),
                                          std::vector<RunState>(static_cast<std::size_t>(opt.replicates)));
  parallel_for(ns * opt.replicates, opt.threads, [&](int job) {
    const int s = job / opt.replicates, r = job % opt.replicates;
    runs[s][r] = run_trial(sc, strategies[s], replicate_seed(master_seed, r));
  });

  ComparisonResult res;
  for (int s = 0; s < ns; ++s) res.strategies.push_back(summarize(strategies[s], runs[s]));

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    CsvTable metrics({"strategy", "tau", "theta", "psi", "psi_max"});
    CsvTable traces({"strategy", "replicate", "tau", "theta", "psi", "psi_max", "candidates", "selected"});
    CsvTable cycles({"strategy", "replicate", "t", "candidates", "draws", "selected_ids"});
    for (int s = 0; s < ns; ++s) {
      const std::string name(to_string(strategies[s]));
      const auto& sum = res.strategies[s];
      for (std::size_t k = 0; k < sum.theta.size(); ++k)
        metrics.add({name, std::to_string(runs[s][0].records[k].tau), fmt(sum.theta[k]), fmt(sum.psi[k]),
                     fmt(sum.psi_max[k])});
      for (int r = 0; r < opt.replicates; ++r) {
        for (const auto& rec : runs[s][r].records)
          traces.add({name, std::to_string(r), std::to_string(rec.tau), fmt(rec.theta), fmt(rec.psi),
                      fmt(rec.psi_max), std::to_string(rec.candidates), std::to_string(rec.selected)});
        for (const auto& c : runs[s][r].cycles) {
          std::string ids;
          for (std::size_t a = 0; a < c.chosen_ids.size(); ++a) ids += (a ? ";" : "") + std::to_string(c.chosen_ids[a]);
          cycles.add({name, std::to_string(r), std::to_string(c.t), std::to_string(c.candidates),
                      std::to_string(c.draws), ids});
        }
      }
    }
    metrics.write(out_dir / "metrics.csv");
    traces.write(out_dir / "traces.csv");
    cycles.write(out_dir / "selections.csv");
    res.artifacts.files = {out_dir / "metrics.csv", out_dir / "traces.csv", out_dir / "selections.csv"};
    if (opt.gnuplot) {
      std::vector<std::string> names;
      for (auto s : strategies) names.emplace_back(to_string(s));
      write_gnuplot(out_dir / "metrics.gp", "metrics.csv", "theta", names, "", "theta", 3);
      res.artifacts.files.push_back(out_dir / "metrics.gp");
    }
  }
  if (opt.keep_runs) res.runs = std::move(runs);
  return res;
}

struct SweepPoint {
  double beta = 0.0;
  double mean_psi = 0.0;
  double mean_psi_max = 0.0;
  double mean_theta = 0.0;
  std::vector<double> psi;  ///< replicate mean per tau
};

struct SweepResult {
  std::vector<SweepPoint> points;
  RunArtifacts artifacts;
};

/// Randomized strategy at each beta, same replicate seeds throughout.
inline SweepResult run_connectivity_sweep(const Scenario& base, std::uint64_t master_seed,
                                          const std::vector<double>& betas, const ExperimentOptions& opt,
                                          const std::filesystem::path& out_dir) {
  if (betas.empty()) throw Error("sweep: no beta values");
  const int nb = static_cast<int>(betas.size());
  std::vector<Scenario> scenarios(static_cast<std::size_t>(nb), base);
  for (int b = 0; b < nb; ++b) {
    scenarios[b].law.beta = betas[b];
    scenarios[b].validate();
  }
  std::vector<std::vector<RunState>> runs(static_cast<std::size_t>(nb),
                                          std::vector<RunState>(static_cast<std::size_t>(opt.replicates)));
  parallel_for(nb * opt.replicates, opt.threads, [&](int job) {
    const int b = job / opt.replicates, r = job % opt.replicates;
    runs[b][r] = run_trial(scenarios[b], Strategy::Randomized, replicate_seed(master_seed, r));
  });

  SweepResult res;
  for (int b = 0; b < nb; ++b) {
    const auto sum = summarize(Strategy::Randomized, runs[b]);
    SweepPoint p;
    p.beta = betas[b];
    p.mean_psi = sum.mean_psi;
    p.mean_theta = sum.mean_theta;
    for (double x : sum.psi_max) p.mean_psi_max += x / sum.psi_max.size();
    p.psi = sum.psi;
    res.points.push_back(std::move(p));
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    CsvTable table({"beta", "mean_psi", "mean_psi_max", "mean_theta"});
    CsvTable series({"beta", "tau", "psi"});
    for (const auto& p : res.points) {
      table.add({fmt(p.beta), fmt(p.mean_psi), fmt(p.mean_psi_max), fmt(p.mean_theta)});
      for (std::size_t k = 0; k < p.psi.size(); ++k) series.add({fmt(p.beta), std::to_string(k), fmt(p.psi[k])});
    }
    table.write(out_dir / "sweep.csv");
    series.write(out_dir / "sweep_series.csv");
    res.artifacts.files = {out_dir / "sweep.csv", out_dir / "sweep_series.csv"};
    if (opt.gnuplot) {
      std::vector<std::string> names;
      for (double b : betas) names.push_back(fmt(b));
      std::string s = "set datafile separator ','\nset xlabel 'tau'\nset ylabel 'psi'\n"
                      "set terminal pngcairo size 900,500\nset output 'sweep.png'\nplot ";
      for (std::size_t g = 0; g < names.size(); ++g) {
        if (g) s += ", \\\n     ";
        s += "'sweep_series.csv' using 2:($1 == " + names[g] + " ? $3 : 1/0) every ::1 with lines title 'beta " +
             names[g] + "'";
      }
      s += "\n";
      std::ofstream out(out_dir / "sweep.gp", std::ios::binary | std::ios::trunc);
      if (!(out << s)) throw Error("cannot write " + (out_dir / "sweep.gp").string());
      res.artifacts.files.push_back(out_dir / "sweep.gp");
    }
  }
  return res;
}

/// Lag correlation of a series with itself after removing a linear trend.
inline double lag_correlation(const std::vector<double>& x, int lag) {
  const auto n = static_cast<Index>(x.size());
  if (lag <= 0 || n <= lag + 2) return 0.0;
  Vec y = Eigen::Map<const Vec>(x.data(), n);
  const double scale = y.norm();
  Mat a(n, 2);
  a.col(0).setOnes();
  a.col(1) = Vec::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  y -= a * a.colPivHouseholderQr().solve(y);
  // A series that is a straight line up to rounding has no structure left.
  if (!(y.norm() > 1e-12 * scale)) return 0.0;
  const Vec u = y.head(n - lag), v = y.tail(n - lag);
  const double den = std::sqrt(u.squaredNorm() * v.squaredNorm());
  return den > 0.0 ? u.dot(v) / den : 0.0;
}

struct PeakPattern {
  double lag_m = 0.0;        ///< lag-M correlation of the detrended series
  double lag_half_m = 0.0;   ///< lag-M/2 correlation, for reference
  std::vector<int> offsets;  ///< within-cycle index of each cycle's maximum
  double offset_agreement = 0.0;  ///< share of cycles whose peak sits at the modal offset
};

/// Looks at psi over tau = 1..t_e split into cycles of length `period`.
inline PeakPattern peak_pattern(const std::vector<double>& psi, int period) {
  PeakPattern out;
  const std::vector<double> body(psi.begin() + (psi.empty() ? 0 : 1), psi.end());
  out.lag_m = lag_correlation(body, period);
  out.lag_half_m = lag_correlation(body, std::max(1, period / 2));
  std::vector<int> hist(static_cast<std::size_t>(std::max(period, 1)), 0);
  for (std::size_t c = 0; c + static_cast<std::size_t>(period) <= body.size(); c += static_cast<std::size_t>(period)) {
    const auto first = body.begin() + static_cast<std::ptrdiff_t>(c);
    const int off = static_cast<int>(std::max_element(first, first + period) - first);
    out.offsets.push_back(off);
    ++hist[static_cast<std::size_t>(off)];
  }
  if (!out.offsets.empty())
    out.offset_agreement = static_cast<double>(*std::max_element(hist.begin(), hist.end())) / out.offsets.size();
  return out;
}

struct Histogram {
  double beta = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<int> counts;
  std::vector<int> ids;
  std::vector<double> scores;
  double stddev = 0.0;  ///< sample standard deviation of the scores
};

inline double sample_stddev(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  double m = 0.0;
  for (double v : x) m += v / x.size();
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / (x.size() - 1));
}

/// `bins` equal-width bins over [min, max] of the scores; the last bin is
/// closed. With a single distinct value everything lands in bin 0.
inline std::vector<int> bin_counts(const std::vector<double>& x, int bins, double& lo, double& hi) {
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  if (x.empty()) {
    lo = hi = 0.0;
    return counts;
  }
  lo = *std::min_element(x.begin(), x.end());
  hi = *std::max_element(x.begin(), x.end());
  for (double v : x) {
    int b = 0;
    if (hi > lo) b = std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins));
    ++counts[static_cast<std::size_t>(b)];
  }
  return counts;
}

/// Leverage profile of the first cycle (t = 0) for a scenario.
inline Histogram leverage_histogram(const Scenario& sc, int bins = 64) {
  const auto st = initial_state(sc);
  const auto cp = plan_cycle(sc, st.mean, st.cov, 0);
  Histogram h;
  h.beta = sc.law.beta;
  h.ids = cp.set.ids;
  if (cp.set.size() > 0) {
    const auto prof = leverage_profile(cp.set);
    h.scores.assign(prof.scores.data(), prof.scores.data() + prof.scores.size());
  }
  h.counts = bin_counts(h.scores, bins, h.lo, h.hi);
  h.stddev = sample_stddev(h.scores);
  return h;
}

struct HistogramResult {
  std::vector<Histogram> histograms;
  RunArtifacts artifacts;
};

inline HistogramResult run_leverage_histogram(const Scenario& base, const std::vector<double>& betas,
                                              const ExperimentOptions& opt, const std::filesystem::path& out_dir,
                                              int bins = 64) {
  if (betas.empty()) throw Error("histogram: no beta values");
  HistogramResult res;
  res.histograms.resize(betas.size());
  parallel_for(static_cast<int>(betas.size()), opt.threads, [&](int b) {
    Scenario sc = base;
    sc.law.beta = betas[b];
    sc.validate();
    res.histograms[b] = leverage_histogram(sc, bins);
  });
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    CsvTable hist({"beta", "bin", "lo", "hi", "count"});
    CsvTable scores({"beta", "feature_id", "score"});
    CsvTable stats({"beta", "candidates", "mean", "stddev", "min", "max"});
    for (const auto& h : res.histograms) {
      const double width = (h.hi - h.lo) / bins;
      for (int b = 0; b < bins; ++b)
        hist.add({fmt(h.beta), std::to_string(b), fmt(h.lo + b * width),
                  fmt(b + 1 == bins ? h.hi : h.lo + (b + 1) * width), std::to_string(h.counts[b])});
      double mean = 0.0;
      for (std::size_t k = 0; k < h.scores.size(); ++k) {
        scores.add({fmt(h.beta), std::to_string(h.ids[k]), fmt(h.scores[k])});
        mean += h.scores[k] / h.scores.size();
      }
      stats.add({fmt(h.beta), std::to_string(h.scores.size()), fmt(mean), fmt(h.stddev), fmt(h.lo), fmt(h.hi)});
    }
    hist.write(out_dir / "leverage_hist.csv");
    scores.write(out_dir / "leverage_scores.csv");
    stats.write(out_dir / "leverage_stats.csv");
    res.artifacts.files = {out_dir / "leverage_hist.csv", out_dir / "leverage_scores.csv",
                           out_dir / "leverage_stats.csv"};
  }
  return res;
}

}  // namespace netsel
