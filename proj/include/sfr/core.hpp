// Basic vocabulary types shared by every sfr header: 3-vectors, axis-aligned
// boxes, the error hierarchy surfaced through the CLI, and a small thread pool
// helper for embarrassingly parallel query batches.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sfr {

inline constexpr const char* kVersion = "0.1.0";

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    bool operator==(const Vec3&) const = default;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    Vec3 normalized() const {
        const double n = norm();
        return n > 0.0 ? *this / n : Vec3{};
    }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline Vec3 min(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 max(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

struct Aabb {
    Vec3 lo{0, 0, 0};
    Vec3 hi{0, 0, 0};

    static Aabb of_points(const std::vector<Vec3>& pts) {
        Aabb b;
        if (pts.empty()) return b;
        b.lo = b.hi = pts[0];
        for (const Vec3& p : pts) {
            b.lo = min(b.lo, p);
            b.hi = max(b.hi, p);
        }
        return b;
    }

    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    double diagonal() const { return extent().norm(); }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }
    Aabb padded(double pad) const {
        return {lo - Vec3{pad, pad, pad}, hi + Vec3{pad, pad, pad}};
    }
    void expand(const Aabb& o) {
        lo = min(lo, o.lo);
        hi = max(hi, o.hi);
    }
    bool degenerate() const {
        return !(hi.x > lo.x && hi.y > lo.y && hi.z > lo.z);
    }
};

// Errors carry a stable machine-readable category so the CLI can report them
// uniformly. NoSupport is deliberately *not* an error type: an unsupported
// field query is a value (std::nullopt), not a failure.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}
    const std::string& category() const { return category_; }

private:
    std::string category_;
};

#define SFR_DEFINE_ERROR(Name, category)                          \
    class Name : public Error {                                   \
    public:                                                       \
        explicit Name(const std::string& what)                    \
            : Error(category, what) {}                            \
    }

SFR_DEFINE_ERROR(OutOfRangeError, "out_of_range");
SFR_DEFINE_ERROR(EmptyCloudError, "empty_cloud");
SFR_DEFINE_ERROR(EmptySetError, "empty_set");
SFR_DEFINE_ERROR(EmptyMeshError, "empty_mesh");
SFR_DEFINE_ERROR(ZeroDenominatorError, "zero_denominator");
SFR_DEFINE_ERROR(ParseError, "parse_error");
SFR_DEFINE_ERROR(UnsupportedFormatError, "unsupported_format");
SFR_DEFINE_ERROR(InvalidSpecError, "invalid_spec");
SFR_DEFINE_ERROR(NonFiniteLossError, "non_finite_loss");
SFR_DEFINE_ERROR(AllUnsupportedError, "all_unsupported");

#undef SFR_DEFINE_ERROR

// Worker count for parallel query batches. Controlled by the SFR_THREADS
// environment variable; defaults to 1 so runs are single-threaded unless the
// caller opts in.
inline int thread_count() {
    if (const char* env = std::getenv("SFR_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

// Chunked parallel loop over [0, n). fn(i) must only write to per-i slots so
// results stay deterministic regardless of the worker count; reductions are
// the caller's job and must run in index order.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
    if (threads <= 0) threads = thread_count();
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (std::thread& t : pool) t.join();
}

}  // namespace sfr
