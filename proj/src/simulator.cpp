#include <algorithm>
#include <cmath>
#include <limits>

#include "lfsim/netsim.hpp"

namespace lfsim {

Simulator::Simulator(Topology topo)
    : topo_(std::move(topo)), routes_(topo_), link_count_(topo_.links().size(), 0) {}

void Simulator::push(double t, std::function<void()> fn, std::optional<Delivery> d) {
    queue_.push(Event{t, seq_++, std::move(fn), std::move(d)});
}

void Simulator::schedule(double t, std::function<void()> fn) {
    if (t < now_) t = now_;
    push(t, std::move(fn), std::nullopt);
}

FlowId Simulator::start_flow(std::string_view src, std::string_view dst, double size, DeliveryFn on_delivered) {
    return start_flow(topo_.index(src), topo_.index(dst), size, std::move(on_delivered));
}

FlowId Simulator::start_flow(NodeIndex src, NodeIndex dst, double size, DeliveryFn on_delivered) {
    if (src >= topo_.nodes().size() || dst >= topo_.nodes().size()) throw NotFoundError("flow endpoint out of range");
    if (!(size >= 0)) throw ValidationError("flow size must be non-negative");
    const FlowId id = next_id_++;
    const Route& path = routes_.get(src, dst);
    if (on_delivered) callbacks_.emplace(id, std::move(on_delivered));

    if (size == 0 || path.links.empty()) {
        Delivery d{id, src, dst, size, now_, now_ + path.latency};
        push(d.t_done, {}, d);
        return id;
    }
    accrue(now_);
    Flow f;
    f.id = id;
    f.src = src;
    f.dst = dst;
    f.size = size;
    f.t_start = now_;
    f.path = &path;
    for (auto l : path.links) ++link_count_[l];
    active_.emplace(id, f);
    recompute_rates();
    return id;
}

void Simulator::accrue(double t) {
    const double dt = t - accrued_to_;
    if (dt > 0) {
        for (auto& [_, f] : active_) f.bytes_done = std::min(f.size, f.bytes_done + f.rate * dt);
    }
    accrued_to_ = t;
}

void Simulator::recompute_rates() {
    const auto& links = topo_.links();
    for (auto& [_, f] : active_) {
        double r = std::numeric_limits<double>::infinity();
        for (auto l : f.path->links) r = std::min(r, links[l].bandwidth / static_cast<double>(link_count_[l]));
        f.rate = r;
    }
}

double Simulator::next_transmission_end() const {
    double t = std::numeric_limits<double>::infinity();
    for (const auto& [_, f] : active_) t = std::min(t, accrued_to_ + (f.size - f.bytes_done) / f.rate);
    return t;
}

void Simulator::finish_transmissions(double t) {
    // Flows whose own projected end coincides with t (to rounding) finish together.
    std::vector<FlowId> finished;
    const double tol = 1e-12 * std::max(1.0, std::abs(t));
    for (const auto& [id, f] : active_) {
        const double end = accrued_to_ + (f.size - f.bytes_done) / f.rate;
        if (end <= t + tol) finished.push_back(id);
    }
    accrue(t);
    for (auto id : finished) {
        auto it = active_.find(id);
        const Flow& f = it->second;
        for (auto l : f.path->links) --link_count_[l];
        Delivery d{f.id, f.src, f.dst, f.size, f.t_start, t + f.path->latency};
        push(d.t_done, {}, d);
        active_.erase(it);
    }
    recompute_rates();
}

bool Simulator::step() {
    const double tx_end = next_transmission_end();
    const bool have_event = !queue_.empty();
    if (!have_event && !std::isfinite(tx_end)) return false;
    ++events_;
    if (!have_event || tx_end <= queue_.top().time) {
        now_ = std::max(now_, tx_end);
        finish_transmissions(tx_end);
        return true;
    }
    Event ev = queue_.top();
    queue_.pop();
    now_ = std::max(now_, ev.time);
    accrue(now_);
    if (ev.fn) ev.fn();
    if (ev.delivery) {
        last_delivery_ = ev.delivery;
        auto it = callbacks_.find(ev.delivery->id);
        if (it != callbacks_.end()) {
            auto fn = std::move(it->second);
            callbacks_.erase(it);
            fn(*ev.delivery);
        }
    }
    return true;
}

std::optional<Delivery> Simulator::advance() {
    last_delivery_.reset();
    while (!last_delivery_ && step()) {
    }
    auto d = last_delivery_;
    last_delivery_.reset();
    return d;
}

void Simulator::run() {
    while (step()) {
    }
}

const Flow* Simulator::active_flow(FlowId id) const {
    auto it = active_.find(id);
    return it == active_.end() ? nullptr : &it->second;
}

double Simulator::link_rate_sum(LinkIndex link) const {
    double sum = 0.0;
    for (const auto& [_, f] : active_)
        if (std::find(f.path->links.begin(), f.path->links.end(), link) != f.path->links.end()) sum += f.rate;
    return sum;
}

}  // namespace lfsim
