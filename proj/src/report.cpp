#include "mildlab/convergence.hpp"

#include <cmath>
#include <ostream>

#include "mildlab/statistics.hpp"

namespace mildlab {

std::vector<std::size_t> signal_window(const std::vector<SweepPoint>& points) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& pt = points[i];
        if (pt.param > 0.0 && pt.error > 0.0 && pt.error > 5.0 * pt.std_error) idx.push_back(i);
    }
    return idx;
}

bool monotone_beyond_noise(const std::vector<SweepPoint>& points, double slack) {
    const auto idx = signal_window(points);
    for (std::size_t i = 1; i < idx.size(); ++i)
        if (points[idx[i]].error > slack * points[idx[i - 1]].error) return false;
    return true;
}

bool strictly_decreasing_beyond_noise(const std::vector<SweepPoint>& points) {
    const auto idx = signal_window(points);
    for (std::size_t i = 1; i < idx.size(); ++i)
        if (!(points[idx[i]].error < points[idx[i - 1]].error)) return false;
    return true;
}

void finalize_report(ConvergenceReport& r) {
    r.window = signal_window(r.points);
    r.slope = r.intercept = std::numeric_limits<double>::quiet_NaN();
    if (r.window.size() >= 2) {
        std::vector<double> x, y;
        for (auto i : r.window) {
            x.push_back(std::log(r.points[i].param));
            y.push_back(std::log(r.points[i].error));
        }
        const LinearFit fit = least_squares(x, y);
        r.slope = fit.slope;
        r.intercept = fit.intercept;
    }
    r.monotone = monotone_beyond_noise(r.points, r.tolerance.monotone_slack);
    r.final_ok = true;
    r.n_star.reset();
    if (!r.points.empty()) {
        const double first = r.points.front().error;
        const double last = r.points.back().error;
        const bool rel = r.tolerance.relative > 0.0 && last <= r.tolerance.relative * first;
        r.final_ok = rel || last <= r.tolerance.absolute;
        for (std::size_t i = r.points.size(); i-- > 0;) {
            if (r.points[i].error > r.tolerance.absolute) break;
            r.n_star = r.points[i].param;
        }
    }
    r.slope_ok = true;
    if (r.tolerance.slope_band) {
        const auto [lo, hi] = *r.tolerance.slope_band;
        r.slope_ok = std::isfinite(r.slope) && r.slope >= lo && r.slope <= hi;
    }
    r.pass = r.monotone && r.final_ok && r.slope_ok;
}

namespace {

std::string window_label(const ConvergenceReport& r) {
    if (r.window.size() < 2) return "";
    double lo = r.points[r.window.front()].param, hi = lo;
    for (auto i : r.window) {
        lo = std::min(lo, r.points[i].param);
        hi = std::max(hi, r.points[i].param);
    }
    return format_number(lo) + ":" + format_number(hi);
}

}  // namespace

void write_report_csv(std::ostream& os, const ConvergenceReport& r) {
    os << "theorem_id,sweep_param,error,stderr,slope,slope_window,pass\n";
    const std::string slope = std::isfinite(r.slope) ? format_number(r.slope) : "";
    const std::string window = window_label(r);
    for (const auto& pt : r.points) {
        os << r.theorem_id << "," << format_number(pt.param) << "," << format_number(pt.error) << ","
           << format_number(pt.std_error) << "," << slope << "," << window << "," << (r.pass ? "true" : "false")
           << "\n";
    }
}

void write_plot_csv(std::ostream& os, const ConvergenceReport& r) {
    os << "x,y\n";
    for (const auto& pt : r.points) os << format_number(pt.param) << "," << format_number(pt.error) << "\n";
}

}  // namespace mildlab
