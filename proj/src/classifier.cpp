#include <algorithm>
#include <cmath>
#include <map>

#include "lfsim/workload.hpp"

namespace lfsim {

std::string_view to_string(PatternKind k) {
    switch (k) {
        case PatternKind::Regular: return "regular";
        case PatternKind::Overlapping: return "overlapping";
        case PatternKind::RealTime: return "realtime";
        case PatternKind::Unknown: break;
    }
    return "unknown";
}

PatternKind parse_pattern_kind(std::string_view s) {
    if (s == "regular") return PatternKind::Regular;
    if (s == "overlapping") return PatternKind::Overlapping;
    if (s == "realtime") return PatternKind::RealTime;
    if (s == "unknown") return PatternKind::Unknown;
    throw ValidationError("unknown pattern kind '" + std::string(s) + "'");
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace

AccessPattern classify_user_pattern(std::span<const Request> history, const ClassifierConfig& config) {
    AccessPattern out;

    std::vector<double> session_times;
    for (const auto& q : history) {
        if (session_times.empty() || q.t_arrive != session_times.back()) session_times.push_back(q.t_arrive);
    }
    out.history = session_times.size();
    if (session_times.size() < std::max<std::size_t>(config.min_history, 2)) return out;

    std::vector<double> gaps;
    gaps.reserve(session_times.size() - 1);
    for (std::size_t i = 1; i < session_times.size(); ++i) gaps.push_back(session_times[i] - session_times[i - 1]);

    std::vector<double> windows;
    std::vector<double> overlaps;
    std::map<std::string_view, const Window*> last_window;
    for (const auto& q : history) {
        windows.push_back(q.window.length());
        auto [it, fresh] = last_window.try_emplace(q.object_id, &q.window);
        if (!fresh) {
            overlaps.push_back(overlap(*it->second, q.window));
            it->second = &q.window;
        }
    }

    out.period_s = median(gaps);
    out.window_s = median(windows);
    out.overlap_s = median(overlaps);

    double mean = 0.0;
    for (double g : gaps) mean += g;
    mean /= static_cast<double>(gaps.size());
    double var = 0.0;
    for (double g : gaps) var += (g - mean) * (g - mean);
    var /= static_cast<double>(gaps.size());
    const double cv = mean > 0 ? std::sqrt(var) / mean : INFINITY;

    if (cv > config.cv_max) return out;
    if (out.period_s <= config.realtime_threshold_s) {
        out.kind = PatternKind::RealTime;
    } else if (out.overlap_s > 0) {
        out.kind = PatternKind::Overlapping;
    } else {
        out.kind = PatternKind::Regular;
    }
    return out;
}

std::map<std::string, std::vector<Request>> program_histories(const Trace& trace) {
    std::map<std::string, std::vector<Request>> out;
    for (const auto& q : trace) {
        if (q.channel == Channel::Api) out[q.user_id].push_back(q);
    }
    return out;
}

}  // namespace lfsim
