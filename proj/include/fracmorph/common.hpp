#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fracmorph {

using Vec3 = Eigen::Vector3d;

/// Coarse classification used by the CLI to pick an exit code.
enum class ErrorKind { config, data, resource };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct TopologyError : Error {
    explicit TopologyError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct DegenerateFaceError : Error {
    explicit DegenerateFaceError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct VisibilityError : Error {
    explicit VisibilityError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct GeometryMismatchError : Error {
    explicit GeometryMismatchError(const std::string& w) : Error(ErrorKind::data, w) {}
};
/// A morphological front reached the outermost shell of the grid.
struct PaddingError : Error {
    explicit PaddingError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct ResourceError : Error {
    explicit ResourceError(const std::string& w) : Error(ErrorKind::resource, w) {}
};

namespace parallel {

namespace detail {
inline std::atomic<unsigned>& thread_count_storage()
{
    static std::atomic<unsigned> count{1};
    return count;
}
} // namespace detail

inline void set_threads(unsigned n) { detail::thread_count_storage() = std::max(1u, n); }
[[nodiscard]] inline unsigned threads() { return detail::thread_count_storage(); }

/// Runs fn(begin, end) over contiguous chunks of [0, n). Work is split
/// statically so results never depend on scheduling.
template <class Fn>
void for_chunks(std::size_t n, Fn&& fn)
{
    const std::size_t workers = std::min<std::size_t>(threads(), n);
    if (workers <= 1) {
        if (n > 0) fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t step = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = w * step;
        const std::size_t e = std::min(n, b + step);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool) t.join();
}

} // namespace parallel

} // namespace fracmorph
