#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <new>
#include <vector>

namespace hyla {

// Process-wide byte counters for every buffer allocated through
// CountingAllocator. The benchmark harness reads the peak to report each
// kernel's working set independent of the system allocator.
class AllocCounter {
public:
    static void add(std::size_t bytes) noexcept {
        const std::size_t now = current_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
        std::size_t peak = peak_.load(std::memory_order_relaxed);
        while (now > peak && !peak_.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
        }
    }

    static void sub(std::size_t bytes) noexcept { current_.fetch_sub(bytes, std::memory_order_relaxed); }

    static std::size_t current() noexcept { return current_.load(std::memory_order_relaxed); }
    static std::size_t peak() noexcept { return peak_.load(std::memory_order_relaxed); }

    static void reset_peak() noexcept { peak_.store(current(), std::memory_order_relaxed); }

private:
    static inline std::atomic<std::size_t> current_{0};
    static inline std::atomic<std::size_t> peak_{0};
};

// Measures the peak number of counted bytes allocated above the level that
// was live when the scope opened.
class AllocScope {
public:
    AllocScope() noexcept : baseline_(AllocCounter::current()) { AllocCounter::reset_peak(); }

    std::size_t peak_bytes() const noexcept {
        const std::size_t peak = AllocCounter::peak();
        return peak > baseline_ ? peak - baseline_ : 0;
    }

private:
    std::size_t baseline_;
};

template <class T>
struct CountingAllocator {
    using value_type = T;

    CountingAllocator() noexcept = default;
    template <class U>
    CountingAllocator(const CountingAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        T* p = std::allocator<T>{}.allocate(n);
        AllocCounter::add(n * sizeof(T));
        return p;
    }

    void deallocate(T* p, std::size_t n) noexcept {
        AllocCounter::sub(n * sizeof(T));
        std::allocator<T>{}.deallocate(p, n);
    }

    template <class U>
    bool operator==(const CountingAllocator<U>&) const noexcept {
        return true;
    }
};

template <class T>
using counted_vector = std::vector<T, CountingAllocator<T>>;

} // namespace hyla
