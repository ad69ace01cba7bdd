#include "ipgd/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ipgd/region.hpp"

namespace ipgd {

namespace {

// Scale at which a residual is indistinguishable from projection rounding.
double membership_floor(const ParamPoint& x) {
  return 64.0 * std::numeric_limits<double>::epsilon() * x.norm();
}

}  // namespace

DeviationReport deviation_rate(const Problem& problem, const ParamPoint& x) {
  DeviationReport rep;
  const ParamPoint x_sharp = project_region(problem.region(), x);
  Eigen::VectorXd perp = x.data - x_sharp.data;
  rep.residual_norm = perp.norm();
  if (rep.residual_norm <= membership_floor(x)) {
    return rep;  // on the region to rounding accuracy: all rates zero
  }

  const Eigen::MatrixXd h = problem.dense_hessian(x_sharp);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("deviation_rate: eigendecomposition failed");
  }
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double lam_scale = std::max(std::abs(lam(0)), std::abs(lam(lam.size() - 1)));
  const double tiny = 1e-12 * lam_scale;

  const Eigen::VectorXd w = eig.eigenvectors().transpose() * perp;
  const double denom = perp.squaredNorm();
  double form_pos = 0.0;  // quadratic form through the nonnegative part
  double form_neg = 0.0;  // through the strictly negative part
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    // Eigenvalues within +-tiny of zero count as the nonnegative part so the
    // split is deterministic; the two parts always sum back to the Hessian.
    if (lam(i) < -tiny) {
      form_neg += lam(i) * w(i) * w(i);
    } else {
      form_pos += lam(i) * w(i) * w(i);
    }
  }
  rep.r_minus = -form_pos / denom;
  rep.r_plus = -form_neg / denom;
  rep.r = rep.r_minus + 3.0 * rep.r_plus;
  return rep;
}

DeviationSampler make_deviation_sampler(const Problem& problem) {
  return [&problem](const ParamPoint& x) { return deviation_rate(problem, x).r; };
}

namespace {

struct SampledRate {
  long long t;
  double rate;
};

std::vector<SampledRate> sampled_rates(const std::vector<TraceRecord>& trace) {
  std::vector<SampledRate> out;
  for (const auto& rec : trace) {
    if (rec.deviation_rate) out.push_back({rec.t, *rec.deviation_rate});
  }
  return out;
}

}  // namespace

double cumulative_deviation_at(const std::vector<TraceRecord>& trace, long long t) {
  const auto samples = sampled_rates(trace);
  if (samples.empty()) {
    throw std::invalid_argument("cumulative_deviation: trace has no sampled rates");
  }
  double cum = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (t <= samples[i].t) break;
    const long long next = i + 1 < samples.size() ? std::min(samples[i + 1].t, t) : t;
    cum += samples[i].rate * static_cast<double>(next - samples[i].t);
  }
  return cum;
}

double cumulative_deviation(const std::vector<TraceRecord>& trace) {
  const auto samples = sampled_rates(trace);
  if (samples.empty()) {
    throw std::invalid_argument("cumulative_deviation: trace has no sampled rates");
  }
  return cumulative_deviation_at(trace, samples.back().t);
}

ResidualBoundReport residual_bound_check(const std::vector<TraceRecord>& trace, double eta,
                                         double rho_hat, double tau, double gamma,
                                         double res_floor) {
  if (!(rho_hat > 0.0)) {
    throw std::invalid_argument("residual_bound_check: rho_hat must be positive");
  }
  ResidualBoundReport rep;
  constexpr double kSlack = 1.0 + 1e-8;
  for (size_t i = 0; i + 1 < trace.size(); ++i) {
    const TraceRecord& cur = trace[i];
    const TraceRecord& nxt = trace[i + 1];
    if (nxt.t != cur.t + 1) continue;           // not a single-step transition
    if (nxt.event == TraceEvent::ret) continue;  // next row is a restored point
    if (cur.event == TraceEvent::ret) continue;  // row pair spans the restore
    if (!cur.deviation_rate) continue;           // rate not sampled here
    const double res = cur.residual_norm;
    if (!(res > res_floor) || res > tau) continue;
    const double strict =
        (1.0 + 0.5 * eta * (*cur.deviation_rate) + 0.5 * eta * rho_hat * res) * res;
    if (nxt.event == TraceEvent::perturb) {
      // The recorded successor includes the kick; allow its radius on top.
      const double bound = (strict + gamma) * kSlack;
      const double ratio = bound > 0.0 ? nxt.residual_norm / bound
                                       : (nxt.residual_norm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      ++rep.n_kick_checked;
      rep.worst_kick_ratio = std::max(rep.worst_kick_ratio, ratio);
      if (ratio > 1.0) ++rep.n_kick_violations;
      continue;
    }
    const double bound = strict * kSlack;
    const double ratio = bound > 0.0 ? nxt.residual_norm / bound
                                     : (nxt.residual_norm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    ++rep.n_checked;
    rep.worst_ratio = std::max(rep.worst_ratio, ratio);
    if (ratio > 1.0) ++rep.n_violations;
  }
  return rep;
}

std::vector<GrowthPoint> growth_vs_deviation(const std::vector<TraceRecord>& trace,
                                             double eta, int sample_count,
                                             const std::string& kind_tag) {
  if (sample_count < 1) {
    throw std::invalid_argument("growth_vs_deviation: sample_count must be >= 1");
  }
  // Base: the first kick that actually left the region. Earlier rows sit on
  // the region exactly (zero residual), where growth ratios are undefined.
  const TraceRecord* base = nullptr;
  for (const auto& rec : trace) {
    if (rec.event == TraceEvent::perturb && rec.residual_norm > 0.0) {
      base = &rec;
      break;
    }
  }
  if (base == nullptr) {
    throw std::invalid_argument(
        "growth_vs_deviation: trajectory never left the region (no perturbation "
        "produced a positive residual)");
  }
  std::vector<const TraceRecord*> eligible;
  for (const auto& rec : trace) {
    if (rec.t >= base->t && rec.residual_norm > 0.0) eligible.push_back(&rec);
  }
  const double cum_base = cumulative_deviation_at(trace, base->t);
  const long long t0 = base->t;
  const long long t1 = eligible.back()->t;

  std::vector<GrowthPoint> points;
  long long last_picked = -1;
  for (int j = 0; j < sample_count; ++j) {
    const double frac = sample_count == 1 ? 0.0
                                          : static_cast<double>(j) /
                                                static_cast<double>(sample_count - 1);
    const long long target =
        t0 + static_cast<long long>(std::llround(frac * static_cast<double>(t1 - t0)));
    const TraceRecord* best = eligible.front();
    long long best_gap = std::llabs(best->t - target);
    for (const auto* rec : eligible) {
      const long long gap = std::llabs(rec->t - target);
      if (gap < best_gap) {
        best = rec;
        best_gap = gap;
      }
    }
    if (best->t == last_picked) continue;  // short traces: collapse duplicates
    last_picked = best->t;
    GrowthPoint pt;
    pt.eta_rbar = eta * (cumulative_deviation_at(trace, best->t) - cum_base);
    pt.log_growth = std::log(best->residual_norm / base->residual_norm);
    pt.t = best->t;
    pt.problem_kind = kind_tag;
    points.push_back(std::move(pt));
  }
  return points;
}

double procrustes_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw std::invalid_argument("procrustes_distance: shapes differ");
  }
  if (x.cols() == 0) return 0.0;
  const Eigen::MatrixXd p = y.transpose() * x;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd o = svd.matrixU() * svd.matrixV().transpose();
  return (x - y * o).norm();
}

EscapeTable escape_probe(const Problem& problem, const ParamPoint& z,
                         const std::vector<double>& gammas, int trials, double eta,
                         double drop, long long cap, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("escape_probe: trials must be >= 1");
  if (cap < 1) throw std::invalid_argument("escape_probe: cap must be >= 1");
  if (*z.layout != *problem.layout()) {
    throw std::invalid_argument("escape_probe: z layout does not match the problem");
  }
  const double f_z = problem.value(z);
  EscapeTable table;
  for (double gamma : gammas) {
    double total = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      ParamPoint x = z;
      x.data += sample_ball(problem.dim(), gamma, rng);
      EscapeRow row{gamma, trial, cap, false};
      for (long long t = 1; t <= cap; ++t) {
        x.data -= eta * problem.gradient(x).data;
        if (problem.value(x) - f_z < -drop) {
          row.escape_iters = t;
          row.escaped = true;
          break;
        }
      }
      total += static_cast<double>(row.escape_iters);
      table.rows.push_back(row);
    }
    table.mean_iters.emplace_back(gamma, total / static_cast<double>(trials));
  }

  // Least-squares line through (ln(1/gamma), mean iterations).
  const size_t k = table.mean_iters.size();
  if (k >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [g, m] : table.mean_iters) {
      const double lx = std::log(1.0 / g);
      sx += lx;
      sy += m;
      sxx += lx * lx;
      sxy += lx * m;
    }
    const double n = static_cast<double>(k);
    const double denom = n * sxx - sx * sx;
    if (denom != 0.0) {
      table.fit_slope = (n * sxy - sx * sy) / denom;
      table.fit_intercept = (sy - table.fit_slope * sx) / n;
      double ss_res = 0, ss_tot = 0;
      const double mean_y = sy / n;
      for (const auto& [g, m] : table.mean_iters) {
        const double pred = table.fit_intercept + table.fit_slope * std::log(1.0 / g);
        ss_res += (m - pred) * (m - pred);
        ss_tot += (m - mean_y) * (m - mean_y);
      }
      table.fit_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    }
  }
  return table;
}

std::vector<std::vector<Eigen::Index>> rank_inflation(const Problem& problem,
                                                      const std::vector<ParamPoint>& points,
                                                      double eta) {
  std::vector<std::vector<Eigen::Index>> out;
  out.reserve(points.size());
  for (const auto& pt : points) {
    ParamPoint x_sharp = project_region(problem.region(), pt);
    const ParamPoint g = problem.gradient(x_sharp);
    x_sharp.data -= eta * g.data;
    std::vector<Eigen::Index> per_block;
    const bool support = std::holds_alternative<SupportRegion>(problem.region());
    for (int b = 0; b < x_sharp.layout->block_count(); ++b) {
      const Eigen::MatrixXd block = x_sharp.block(b);
      if (support) {
        const double scale = block.cwiseAbs().maxCoeff();
        Eigen::Index nz = 0;
        for (Eigen::Index i = 0; i < block.size(); ++i) {
          if (std::abs(block(i)) > 1e-10 * scale) ++nz;
        }
        per_block.push_back(nz);
      } else {
        per_block.push_back(numerical_rank(block));
      }
    }
    out.push_back(std::move(per_block));
  }
  return out;
}

}  // namespace ipgd
