#pragma once

// Allocation accounting for the large arrays of the solvers.
//
// Containers that hold O(n), O(n*m) or grid-sized data use tracked_vector.
// While a MemoryTracker is installed on the current thread (ScopedTracking),
// every allocation made through TrackingAllocator is recorded with its
// element count, which lets callers assert that no array of size n*m exists.

#include <algorithm>
#include <cstddef>
#include <memory>
#include <vector>

namespace otfs {

struct MemoryTracker {
    std::size_t current_bytes = 0;
    std::size_t peak_bytes = 0;
    std::size_t largest_elements = 0;
    std::size_t allocation_count = 0;
    // element counts of every allocation, in order
    std::vector<std::size_t> allocations;

    void on_allocate(std::size_t elements, std::size_t bytes) {
        current_bytes += bytes;
        peak_bytes = std::max(peak_bytes, current_bytes);
        largest_elements = std::max(largest_elements, elements);
        ++allocation_count;
        allocations.push_back(elements);
    }
    void on_deallocate(std::size_t bytes) {
        current_bytes -= std::min(current_bytes, bytes);
    }
    /// Number of recorded allocations holding at least `elements` elements.
    std::size_t count_at_least(std::size_t elements) const {
        return static_cast<std::size_t>(std::count_if(
            allocations.begin(), allocations.end(),
            [elements](std::size_t e) { return e >= elements; }));
    }
};

namespace detail {
inline MemoryTracker*& active_tracker() {
    thread_local MemoryTracker* tracker = nullptr;
    return tracker;
}
}  // namespace detail

class ScopedTracking {
public:
    explicit ScopedTracking(MemoryTracker& tracker)
        : previous_(detail::active_tracker()) {
        detail::active_tracker() = &tracker;
    }
    ~ScopedTracking() { detail::active_tracker() = previous_; }
    ScopedTracking(const ScopedTracking&) = delete;
    ScopedTracking& operator=(const ScopedTracking&) = delete;

private:
    MemoryTracker* previous_;
};

template <class T>
struct TrackingAllocator {
    using value_type = T;

    TrackingAllocator() noexcept = default;
    template <class U>
    TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        T* p = std::allocator<T>{}.allocate(n);
        if (auto* t = detail::active_tracker()) t->on_allocate(n, n * sizeof(T));
        return p;
    }
    void deallocate(T* p, std::size_t n) noexcept {
        if (auto* t = detail::active_tracker()) t->on_deallocate(n * sizeof(T));
        std::allocator<T>{}.deallocate(p, n);
    }
    template <class U>
    bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

template <class T>
using tracked_vector = std::vector<T, TrackingAllocator<T>>;

}  // namespace otfs
