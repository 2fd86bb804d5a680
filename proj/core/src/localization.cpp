#include "cslab/localization.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cslab/stats.hpp"

namespace cslab {

LinearFlow identity_flow(int dim) {
    return {[dim](double) { return Eigen::MatrixXd::Identity(dim, dim).eval(); }};
}

LinearFlow shear_flow(int dim) {
    if (dim % 2 != 0) throw InvalidArgument("shear_flow: dimension must be even");
    return {[dim](double t) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(dim, dim);
        for (int pair = 0; pair < dim / 2; ++pair) a(2 * pair, 2 * pair + 1) = t;
        return a;
    }};
}

Eigen::MatrixXd gaussian_ensemble(int count, const std::vector<double>& sigmas,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd pts(count, static_cast<int>(sigmas.size()));
    for (int i = 0; i < count; ++i)
        for (std::size_t c = 0; c < sigmas.size(); ++c)
            pts(i, static_cast<int>(c)) = sigmas[c] * normal(rng);
    return pts;
}

namespace {

double sqrt_det_cov(const Eigen::MatrixXd& pts, const std::vector<int>& cols,
                    bool& degenerate) {
    const int n = static_cast<int>(pts.rows());
    const int d = static_cast<int>(cols.size());
    Eigen::MatrixXd sub(n, d);
    for (int c = 0; c < d; ++c) sub.col(c) = pts.col(cols[c]);
    const Eigen::RowVectorXd mean = sub.colwise().mean();
    sub.rowwise() -= mean;
    const Eigen::MatrixXd cov = (sub.transpose() * sub) / double(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    double det = 1.0;
    bool degen = false;
    for (int i = 0; i < d; ++i) {
        const double ev = es.eigenvalues()(i);
        if (ev <= 1e-14 * std::abs(es.eigenvalues().maxCoeff())) {
            degen = true;  // rank deficiency; pseudo-volume over positive part
            continue;
        }
        det *= ev;
    }
    degenerate = degenerate || degen;
    return std::sqrt(det);
}

}  // namespace

double hull_volume(const Eigen::MatrixXd& points, const std::vector<int>& columns) {
    const int n = static_cast<int>(points.rows());
    if (columns.size() == 1) {
        const auto col = points.col(columns[0]);
        return col.maxCoeff() - col.minCoeff();
    }
    if (columns.size() != 2)
        throw InvalidArgument("hull_volume: only 1d and 2d projections are supported");
    // Andrew monotone chain on the projected cloud.
    std::vector<std::pair<double, double>> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = {points(i, columns[0]), points(i, columns[1])};
    std::sort(pts.begin(), pts.end());
    auto cross = [](const std::pair<double, double>& o, const std::pair<double, double>& a,
                    const std::pair<double, double>& b) {
        return (a.first - o.first) * (b.second - o.second) -
               (a.second - o.second) * (b.first - o.first);
    };
    std::vector<std::pair<double, double>> hull(2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const int lower = k + 1;
    for (int i = n - 2; i >= 0; --i) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    double area = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        area += a.first * b.second - b.first * a.second;
    }
    return 0.5 * std::abs(area);
}

VolumeTrack track_volumes(const Eigen::MatrixXd& ensemble, const LinearFlow& flow,
                          const std::vector<int>& observed_indices,
                          const std::vector<double>& times) {
    if (ensemble.rows() < 1000)
        throw InvalidArgument("track_volumes: ensemble must hold at least 10^3 points");
    const int dim = static_cast<int>(ensemble.cols());
    if (observed_indices.empty() || static_cast<int>(observed_indices.size()) >= dim)
        throw InvalidArgument("track_volumes: observed set must be a proper nonempty subset");
    std::vector<int> all(dim);
    for (int i = 0; i < dim; ++i) all[i] = i;
    std::vector<int> unobserved;
    for (int i = 0; i < dim; ++i)
        if (std::find(observed_indices.begin(), observed_indices.end(), i) ==
            observed_indices.end())
            unobserved.push_back(i);

    VolumeTrack track;
    track.times = times;
    for (const double t : times) {
        const Eigen::MatrixXd pts = ensemble * flow.matrix_at(t).transpose();
        const double vt = sqrt_det_cov(pts, all, track.degenerate_covariance);
        const double vo = sqrt_det_cov(pts, observed_indices, track.degenerate_covariance);
        const double vu = sqrt_det_cov(pts, unobserved, track.degenerate_covariance);
        track.v_total.push_back(vt);
        track.v_observed.push_back(vo);
        track.v_unobserved.push_back(vu);
        track.product_ratio.push_back(vo * vu / vt);
        if (dim <= 2) track.hull_total.push_back(hull_volume(pts, all));
    }
    return track;
}

LocalizationVerdict localization_verdict(const VolumeTrack& track) {
    if (track.times.size() < 5)
        throw InvalidArgument("localization_verdict: need at least 5 time samples");
    LocalizationVerdict v;

    double vmax = 0.0, vmin = std::numeric_limits<double>::infinity();
    for (double x : track.v_total) {
        vmax = std::max(vmax, x);
        vmin = std::min(vmin, x);
    }
    v.total_drift = vmin > 0.0 ? (vmax - vmin) / vmin : std::numeric_limits<double>::infinity();
    v.total_conserved = v.total_drift < 1e-4;

    std::vector<double> lo, lu;
    for (double x : track.v_observed) lo.push_back(std::log(std::max(x, 1e-300)));
    for (double x : track.v_unobserved) lu.push_back(std::log(std::max(x, 1e-300)));
    const LineFit fo = fit_line(track.times, lo);
    const LineFit fu = fit_line(track.times, lu);
    v.observed_slope = fo.slope;
    v.observed_slope_stderr = fo.slope_stderr;
    v.unobserved_slope = fu.slope;
    // 95% trend confidence: slope must clear zero by two standard errors.
    v.localizes = v.total_conserved && (fo.slope + 2.0 * fo.slope_stderr < 0.0);
    return v;
}

}  // namespace cslab
