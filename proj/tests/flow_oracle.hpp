#pragma once

// Independent reference for fair-share flow timing. Instead of an event loop it
// iterates on the vector of transmission end times: given a guess, the number
// of active flows on every link is a step function of time, each flow's rate is
// integrated piecewise over those steps, and the time at which the integral
// reaches the flow size is found by bisection. The iteration stops once the
// end times stop moving.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

struct FlowSpec {
    double start;
    double size;
    std::vector<int> links;  // link indices along the path
    double latency;          // path latency
};

inline std::vector<double> delivery_times(const std::vector<double>& bandwidth, const std::vector<FlowSpec>& flows) {
    const std::size_t n = flows.size();
    std::vector<double> end(n);
    for (std::size_t i = 0; i < n; ++i) {
        double bw = std::numeric_limits<double>::infinity();
        for (int l : flows[i].links) bw = std::min(bw, bandwidth[l]);
        end[i] = flows[i].start + flows[i].size / bw * static_cast<double>(n);  // generous first guess
    }

    auto rate_at = [&](std::size_t i, double t, const std::vector<double>& e) {
        double r = std::numeric_limits<double>::infinity();
        for (int l : flows[i].links) {
            int active = 0;
            for (std::size_t j = 0; j < n; ++j)
                if (flows[j].start <= t && t < e[j] &&
                    std::find(flows[j].links.begin(), flows[j].links.end(), l) != flows[j].links.end())
                    ++active;
            r = std::min(r, bandwidth[l] / std::max(active, 1));
        }
        return r;
    };

    for (int iter = 0; iter < 200; ++iter) {
        std::vector<double> cuts;
        for (std::size_t j = 0; j < n; ++j) {
            cuts.push_back(flows[j].start);
            cuts.push_back(end[j]);
        }
        std::sort(cuts.begin(), cuts.end());
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (flows[i].size == 0 || flows[i].links.empty()) {
                next[i] = flows[i].start;
                continue;
            }
            // bytes transferred by time t, integrating the piecewise-constant rate
            auto bytes_by = [&](double t) {
                double acc = 0.0, prev = flows[i].start;
                for (double c : cuts) {
                    if (c <= prev) continue;
                    const double hi = std::min(c, t);
                    if (hi > prev) acc += rate_at(i, 0.5 * (prev + hi), end) * (hi - prev);
                    prev = hi;
                    if (prev >= t) break;
                }
                if (t > prev) acc += rate_at(i, 0.5 * (prev + t), end) * (t - prev);
                return acc;
            };
            double lo = flows[i].start, hi = flows[i].start + 1.0;
            while (bytes_by(hi) < flows[i].size) hi = flows[i].start + 2.0 * (hi - flows[i].start);
            for (int b = 0; b < 200 && hi - lo > 1e-13; ++b) {
                const double mid = 0.5 * (lo + hi);
                (bytes_by(mid) < flows[i].size ? lo : hi) = mid;
            }
            next[i] = hi;
        }
        double moved = 0.0;
        for (std::size_t i = 0; i < n; ++i) moved = std::max(moved, std::abs(next[i] - end[i]));
        end = next;
        if (moved < 1e-12) break;
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = end[i] + flows[i].latency;
    return out;
}

}  // namespace oracle
