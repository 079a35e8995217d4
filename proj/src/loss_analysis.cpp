#include "disco/loss_analysis.hpp"

#include <cmath>
#include <stdexcept>

#include "disco/text_format.hpp"

namespace disco {

namespace {

void check_interval(double lo, double hi, std::size_t grid_n) {
  if (!(lo < hi)) throw std::invalid_argument("interval requires lo < hi");
  if (grid_n < 100) throw std::invalid_argument("grid_n must be at least 100");
}

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

std::string_view kind_name(StationaryPoint::Kind kind) {
  return kind == StationaryPoint::Kind::kMinimum ? "minimum" : "maximum";
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

std::vector<StationaryPoint> find_stationary_points(
    LossId id, const LossParams& params, double lo, double hi,
    std::size_t grid_n, double tol, std::optional<PolicyLogps> policy) {
  check_interval(lo, hi, grid_n);
  auto deriv = [&](double r) {
    return loss_gradient_rho(id, r, params, policy).value;
  };
  auto f = [&](double r) { return eval_loss_pointwise(id, r, params, policy); };

  const std::vector<double> grid = linspace(lo, hi, grid_n);
  const double h = grid[1] - grid[0];
  std::vector<double> d(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) d[i] = deriv(grid[i]);

  std::vector<StationaryPoint> points;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    double a = grid[i];
    double b = grid[i + 1];
    double da = d[i];
    double db = d[i + 1];
    double root;
    if (db == 0.0) {
      // Exact zero on a grid node: count it once, from the left bracket, and
      // only if the derivative really changes sign across it.
      if (i + 2 >= grid.size() || sign_of(da) * sign_of(d[i + 2]) >= 0) continue;
      root = b;
    } else if (sign_of(da) * sign_of(db) < 0) {
      root = 0.5 * (a + b);
      for (int iter = 0; iter < 200; ++iter) {
        root = 0.5 * (a + b);
        const double dm = deriv(root);
        if (std::abs(dm) <= tol || root == a || root == b) break;
        if (sign_of(dm) == sign_of(da)) {
          a = root;
          da = dm;
        } else {
          b = root;
        }
      }
    } else {
      continue;
    }
    const double curvature = f(root + h) - 2.0 * f(root) + f(root - h);
    points.push_back({root, f(root),
                      curvature > 0.0 ? StationaryPoint::Kind::kMinimum
                                      : StationaryPoint::Kind::kMaximum});
  }
  return points;
}

std::vector<ConvexitySegment> convexity_profile(LossId id, const LossParams& params,
                                                double lo, double hi,
                                                std::size_t grid_n,
                                                std::optional<PolicyLogps> policy) {
  check_interval(lo, hi, grid_n);
  const std::vector<double> grid = linspace(lo, hi, grid_n);
  const double h = grid[1] - grid[0];
  std::vector<ConvexitySegment> segments;
  for (double r : grid) {
    const double up = loss_gradient_rho(id, r + h, params, policy).value;
    const double down = loss_gradient_rho(id, r - h, params, policy).value;
    const int s = sign_of(up - down);
    if (!segments.empty() && segments.back().sign == s) {
      segments.back().hi = r;
    } else {
      segments.push_back({r, r, s});
    }
  }
  return segments;
}

std::vector<SweepRow> beta_sweep_table(LossId id, std::span<const double> betas,
                                       std::span<const double> rho_grid,
                                       Variant variant,
                                       std::optional<PolicyLogps> policy) {
  std::vector<SweepRow> rows;
  rows.reserve(betas.size() * rho_grid.size());
  for (double beta : betas) {
    if (!(beta > 0.0)) throw std::invalid_argument("betas must be positive");
    const LossParams params{beta, variant};
    for (double r : rho_grid) {
      rows.push_back({beta, r, eval_loss_pointwise(id, r, params, policy),
                      loss_gradient_rho(id, r, params, policy).value});
    }
  }
  return rows;
}

double sample_region_fraction(const BatchVector& rho_values, double lo, double hi) {
  if (rho_values.empty()) throw std::invalid_argument("no samples");
  if (!(lo < hi)) throw std::invalid_argument("region requires lo < hi");
  std::size_t inside = 0;
  for (double r : rho_values.values()) {
    if (lo <= r && r <= hi) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(rho_values.size());
}

std::string sweep_csv(LossId id, Variant variant, std::span<const SweepRow> rows) {
  std::string out = csv_line({"loss_id", "variant", "beta", "rho", "f", "df_drho"});
  for (const auto& row : rows) {
    out += csv_line({std::string(loss_name(id)), std::string(variant_name(variant)),
                     format_double(row.beta), format_double(row.rho),
                     format_double(row.value), format_double(row.derivative)});
  }
  return out;
}

std::string convexity_csv(LossId id, const LossParams& params,
                          std::span<const ConvexitySegment> segments) {
  std::string out =
      csv_line({"loss_id", "variant", "beta", "rho_lo", "rho_hi", "sign"});
  for (const auto& s : segments) {
    out += csv_line({std::string(loss_name(id)),
                     std::string(variant_name(params.variant)),
                     format_double(params.beta), format_double(s.lo),
                     format_double(s.hi), std::to_string(s.sign)});
  }
  return out;
}

std::string stationary_csv(LossId id, const LossParams& params,
                           std::span<const StationaryPoint> points) {
  std::string out = csv_line({"loss_id", "variant", "beta", "rho", "f", "kind"});
  for (const auto& p : points) {
    out += csv_line({std::string(loss_name(id)),
                     std::string(variant_name(params.variant)),
                     format_double(params.beta), format_double(p.rho),
                     format_double(p.value), std::string(kind_name(p.kind))});
  }
  return out;
}

}  // namespace disco
