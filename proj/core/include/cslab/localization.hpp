#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "cslab/common.hpp"

namespace cslab {

/// Support-volume bookkeeping of an evolving ensemble: total phase-space
/// volume vs the observed/unobserved coordinate projections, all measured by
/// the covariance-determinant proxy sqrt(det Sigma).
struct VolumeTrack {
    std::vector<double> times;
    std::vector<double> v_total;
    std::vector<double> v_observed;
    std::vector<double> v_unobserved;
    std::vector<double> product_ratio;  // v_obs * v_unobs / v_total
    std::vector<double> hull_total;     // convex-hull cross-check, dim <= 2
    bool degenerate_covariance = false;
};

/// Convex-hull volume of a projection: range length in 1d, polygon area in
/// 2d. Exactly conserved by unit-determinant linear maps, which makes it an
/// independent check on the covariance proxy.
double hull_volume(const Eigen::MatrixXd& points, const std::vector<int>& columns);

/// Time-parametrized linear map on phase-space points.
struct LinearFlow {
    std::function<Eigen::MatrixXd(double t)> matrix_at;
};

LinearFlow identity_flow(int dim);
/// One shear per (q_i, p_i) pair: q_i(t) = q_i + p_i t.
LinearFlow shear_flow(int dim);

/// Gaussian cloud with per-coordinate standard deviations, seeded.
Eigen::MatrixXd gaussian_ensemble(int count, const std::vector<double>& sigmas,
                                  std::uint64_t seed);

VolumeTrack track_volumes(const Eigen::MatrixXd& ensemble, const LinearFlow& flow,
                          const std::vector<int>& observed_indices,
                          const std::vector<double>& times);

struct LocalizationVerdict {
    bool localizes = false;
    double observed_slope = 0.0;
    double observed_slope_stderr = 0.0;
    double unobserved_slope = 0.0;
    double total_drift = 0.0;  // max relative drift of v_total
    bool total_conserved = false;
};

LocalizationVerdict localization_verdict(const VolumeTrack& track);

}  // namespace cslab
