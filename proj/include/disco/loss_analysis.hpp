#pragma once

// Shape analysis of pointwise losses over rho: stationary points, convexity
// segments, and beta sweeps.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "disco/losses.hpp"

namespace disco {

struct StationaryPoint {
  enum class Kind { kMinimum, kMaximum };

  double rho;
  double value;
  Kind kind;
};

std::string_view kind_name(StationaryPoint::Kind kind);

// Grid scan for sign changes of f', each bracket refined by bisection until
// |f'| <= tol (or the bracket collapses to adjacent doubles). Sorted by rho.
std::vector<StationaryPoint> find_stationary_points(
    LossId id, const LossParams& params, double lo, double hi,
    std::size_t grid_n = 10001, double tol = 1e-10,
    std::optional<PolicyLogps> policy = std::nullopt);

struct ConvexitySegment {
  double lo;
  double hi;
  int sign;  // +1 convex, -1 concave, 0 flat
};

// Maximal runs of constant curvature sign on the grid. The curvature at a
// grid point is the central difference of the analytic derivative.
std::vector<ConvexitySegment> convexity_profile(
    LossId id, const LossParams& params, double lo, double hi,
    std::size_t grid_n = 10001, std::optional<PolicyLogps> policy = std::nullopt);

struct SweepRow {
  double beta;
  double rho;
  double value;
  double derivative;
};

// One row per (beta, rho), beta-major.
std::vector<SweepRow> beta_sweep_table(LossId id, std::span<const double> betas,
                                       std::span<const double> rho_grid,
                                       Variant variant,
                                       std::optional<PolicyLogps> policy = std::nullopt);

// n evenly spaced points from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);

// Fraction of entries with lo <= rho <= hi. Throws on empty input.
double sample_region_fraction(const BatchVector& rho_values, double lo, double hi);

// CSV text with header loss_id,variant,beta,rho,f,df_drho.
std::string sweep_csv(LossId id, Variant variant, std::span<const SweepRow> rows);

// CSV text with header loss_id,variant,beta,rho_lo,rho_hi,sign.
std::string convexity_csv(LossId id, const LossParams& params,
                          std::span<const ConvexitySegment> segments);

// CSV text with header loss_id,variant,beta,rho,f,kind.
std::string stationary_csv(LossId id, const LossParams& params,
                           std::span<const StationaryPoint> points);

}  // namespace disco
