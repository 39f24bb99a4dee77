#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <maxent/errors.hpp>
#include <maxent/multi_index.hpp>
#include <maxent/problem.hpp>

namespace maxent {

class DegenerateAxisError : public NumericalError {
public:
    explicit DegenerateAxisError(std::size_t axis)
        : NumericalError("axis " + std::to_string(axis) + " is constant; cannot rescale"),
          axis_(axis) {}
    std::size_t axis() const { return axis_; }

private:
    std::size_t axis_;
};

struct SampleSet {
    std::vector<std::vector<double>> points;  // original units

    std::size_t count() const { return points.size(); }
    std::size_t dimension() const { return points.empty() ? 0 : points.front().size(); }
};

// Per-axis min/max mapped affinely onto [-1, 1].
inline AffineRescale fit_rescale(const SampleSet& s) {
    if (s.count() < 2) throw NumericalError("need at least 2 samples to fit a rescale");
    std::size_t d = s.dimension();
    AffineRescale r;
    r.lo.assign(d, std::numeric_limits<double>::infinity());
    r.hi.assign(d, -std::numeric_limits<double>::infinity());
    for (const auto& pt : s.points) {
        if (pt.size() != d) throw NumericalError("inconsistent sample dimension");
        for (std::size_t k = 0; k < d; ++k) {
            if (!std::isfinite(pt[k])) throw NumericalError("non-finite sample coordinate");
            r.lo[k] = std::min(r.lo[k], pt[k]);
            r.hi[k] = std::max(r.hi[k], pt[k]);
        }
    }
    for (std::size_t k = 0; k < d; ++k)
        if (!(r.lo[k] < r.hi[k])) throw DegenerateAxisError(k);
    return r;
}

// f_j = (1/N) sum over samples of c_j(rescaled sample).
inline Eigen::VectorXd empirical_moments(const SampleSet& s, const AffineRescale& r,
                                         const BasisSet& b) {
    if (s.dimension() != static_cast<std::size_t>(b.dimension))
        throw NumericalError("sample dimension does not match basis dimension");
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.indices.size()));
    std::vector<double> x(s.dimension());
    for (const auto& pt : s.points) {
        for (std::size_t k = 0; k < x.size(); ++k) {
            x[k] = r.to_cube(pt[k], k);
            if (x[k] < -1.0 - 1e-12 || x[k] > 1.0 + 1e-12)
                throw DomainError("rescaled sample falls outside [-1,1]^d");
            x[k] = std::clamp(x[k], -1.0, 1.0);
        }
        for (std::size_t j = 0; j < b.indices.size(); ++j)
            f[static_cast<Eigen::Index>(j)] += eval_monomial(b.indices[j], x.data());
    }
    f /= static_cast<double>(s.count());
    return f;
}

// One sample per row, d numeric columns, comma-separated. A non-numeric
// first row is treated as a header and skipped.
inline SampleSet read_samples_csv(std::istream& in) {
    SampleSet s;
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                numeric = false;
            }
            if (numeric && cell.find_first_not_of(" \t\r", pos) != std::string::npos)
                numeric = false;
            if (!numeric) break;
            row.push_back(v);
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;  // header row
            }
            throw NumericalError("malformed CSV row at line " + std::to_string(lineno));
        }
        first = false;
        if (!s.points.empty() && row.size() != s.points.front().size())
            throw NumericalError("inconsistent column count at line " + std::to_string(lineno));
        s.points.push_back(std::move(row));
    }
    if (s.points.empty()) throw NumericalError("CSV contains no samples");
    return s;
}

inline SampleSet read_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NumericalError("cannot open sample file: " + path);
    return read_samples_csv(in);
}

}  // namespace maxent
