#pragma once

#include <cmath>
#include <span>

namespace cslab {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
    int count = 0;
};

/// Ordinary or weighted least squares y ~ a + b x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y,
                        std::span<const double> wts = {}) {
    LineFit f;
    f.count = static_cast<int>(x.size());
    if (f.count < 2 || y.size() != x.size()) return f;
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < f.count; ++i) {
        const double w = wts.empty() ? 1.0 : wts[i];
        sw += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    const double den = sw * sxx - sx * sx;
    if (den == 0.0) return f;
    f.slope = (sw * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / sw;
    double ss_res = 0, ss_tot = 0, sxc = 0;
    const double ym = sy / sw, xm = sx / sw;
    for (int i = 0; i < f.count; ++i) {
        const double w = wts.empty() ? 1.0 : wts[i];
        const double fit = f.intercept + f.slope * x[i];
        ss_res += w * (y[i] - fit) * (y[i] - fit);
        ss_tot += w * (y[i] - ym) * (y[i] - ym);
        sxc += w * (x[i] - xm) * (x[i] - xm);
    }
    f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    if (f.count > 2 && sxc > 0) f.slope_stderr = std::sqrt(ss_res / (f.count - 2) / sxc);
    return f;
}

}  // namespace cslab
