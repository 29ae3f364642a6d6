#include <cmath>

#include "lfsim/cachenet.hpp"

namespace lfsim {

std::uint64_t segment_bytes(const DataObject& object, double chunk_s) {
    return static_cast<std::uint64_t>(std::llround(static_cast<double>(object.rate) * chunk_s));
}

std::vector<Segment> segments_for(const Request& request, const Catalog& catalog, double chunk_s) {
    if (!(chunk_s > 0)) throw ConfigError("chunk duration must be positive");
    if (!request.window.valid()) throw ValidationError("request " + std::to_string(request.req_id) + ": empty window");
    if (request.window.start < 0) throw ValidationError("request window starts before data time 0");
    auto idx = catalog.object_index(request.object_id);
    if (!idx) throw NotFoundError("unknown object '" + request.object_id + "'");
    const auto bytes = segment_bytes(catalog.objects()[*idx], chunk_s);

    const auto first = static_cast<std::int64_t>(std::floor(request.window.start / chunk_s));
    const auto last = static_cast<std::int64_t>(std::ceil(request.window.end / chunk_s)) - 1;
    std::vector<Segment> out;
    out.reserve(static_cast<std::size_t>(last - first + 1));
    for (auto c = first; c <= last; ++c) out.push_back({{static_cast<std::uint32_t>(*idx), c}, bytes});
    return out;
}

LruCache::Result LruCache::access(const SegmentKey& key, std::uint64_t size, double now, Op op, double pin_until) {
    Result r;
    switch (op) {
        case Op::Get: r.hit = get(key); break;
        case Op::Put: r = put(key, size, now); break;
        case Op::Pin:
            pin(key, pin_until);
            r.hit = true;
            break;
        case Op::Unpin:
            unpin(key);
            r.hit = true;
            break;
    }
    return r;
}

bool LruCache::get(const SegmentKey& key) {
    auto it = index_.find(key);
    if (it == index_.end()) return false;
    order_.splice(order_.begin(), order_, it->second);
    return true;
}

bool LruCache::can_fit(std::uint64_t size, double now) const {
    if (size > capacity_) return false;
    if (used_ + size <= capacity_) return true;
    std::uint64_t freeable = 0;
    const std::uint64_t need = used_ + size - capacity_;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        if (pinned(*it, now)) continue;
        freeable += it->size;
        if (freeable >= need) return true;
    }
    return false;
}

LruCache::Result LruCache::put(const SegmentKey& key, std::uint64_t size, double now) {
    Result r;
    if (size > capacity_) {
        throw CapacityError("entry of " + std::to_string(size) + " bytes exceeds cache capacity " +
                            std::to_string(capacity_));
    }
    if (auto it = index_.find(key); it != index_.end()) {
        // Refresh; sizes are fixed per object so a re-put only touches recency.
        order_.splice(order_.begin(), order_, it->second);
        r.hit = true;
        return r;
    }
    if (!can_fit(size, now)) throw CapacityError("pinned entries leave no room for " + std::to_string(size) + " bytes");

    auto it = order_.end();
    while (used_ + size > capacity_) {
        --it;
        if (pinned(*it, now)) continue;
        r.evicted.push_back(it->key);
        used_ -= it->size;
        index_.erase(it->key);
        it = order_.erase(it);
    }
    order_.push_front({key, size, std::nullopt});
    index_.emplace(key, order_.begin());
    used_ += size;
    r.inserted = true;
    return r;
}

void LruCache::pin(const SegmentKey& key, double until) {
    auto it = index_.find(key);
    if (it == index_.end()) throw NotFoundError("pin of absent segment");
    auto& p = it->second->pinned_until;
    if (!p || *p < until) p = until;
}

void LruCache::unpin(const SegmentKey& key) {
    auto it = index_.find(key);
    if (it == index_.end()) throw NotFoundError("unpin of absent segment");
    it->second->pinned_until.reset();
}

std::optional<double> LruCache::pinned_until(const SegmentKey& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second->pinned_until;
}

std::vector<SegmentKey> LruCache::keys_by_recency() const {
    std::vector<SegmentKey> out;
    out.reserve(order_.size());
    for (const auto& e : order_) out.push_back(e.key);
    return out;
}

}  // namespace lfsim
