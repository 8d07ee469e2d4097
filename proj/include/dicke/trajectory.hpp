// trajectory.hpp: collective-spin moment bundle and time series records

#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace dicke {

/// First and symmetrised second moments of the collective spin.
/// Cab = ⟨SaSb + SbSa⟩/2.
struct SpinMoments {
    double Sx = 0.0, Sy = 0.0, Sz = 0.0;
    double Sx2 = 0.0, Sy2 = 0.0, Sz2 = 0.0;
    double Cxy = 0.0, Cxz = 0.0, Cyz = 0.0;
};

struct TrajectoryRecord {
    double t = 0.0;
    SpinMoments moments;
    double xi2 = std::numeric_limits<double>::quiet_NaN();
    double trace = 1.0;
    double purity = 1.0;
    double hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;  // NaN when not monitored

    double xi2_dB() const { return 10.0 * std::log10(xi2); }
};

struct Trajectory {
    int N = 0;
    std::vector<TrajectoryRecord> records;
    std::vector<std::string> warnings;
    std::string source = "exact";

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    std::vector<double> times() const {
        std::vector<double> t;
        t.reserve(records.size());
        for (const auto& r : records) t.push_back(r.t);
        return t;
    }
    std::vector<double> xi2() const {
        std::vector<double> v;
        v.reserve(records.size());
        for (const auto& r : records) v.push_back(r.xi2);
        return v;
    }
};

inline constexpr const char* trajectory_csv_header =
    "t,Sx,Sy,Sz,Sy2,Sz2,Sx2,Cyz,Cxy,Cxz,xi2,xi2_dB,trace,purity";

/// CSV with the fixed column order; optional leading tag columns.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool header = true,
                                 const std::string& tag_names = {}, const std::string& tag_values = {}) {
    if (header) {
        if (!tag_names.empty()) os << tag_names << ',';
        os << trajectory_csv_header << '\n';
    }
    os << std::setprecision(17);
    for (const auto& r : traj.records) {
        const auto& m = r.moments;
        if (!tag_values.empty()) os << tag_values << ',';
        os << r.t << ',' << m.Sx << ',' << m.Sy << ',' << m.Sz << ',' << m.Sy2 << ',' << m.Sz2 << ',' << m.Sx2
           << ',' << m.Cyz << ',' << m.Cxy << ',' << m.Cxz << ',' << r.xi2 << ',' << r.xi2_dB() << ',' << r.trace
           << ',' << r.purity << '\n';
    }
}

}  // namespace dicke
