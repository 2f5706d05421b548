#ifndef FAIRTOR_PARALLEL_HPP
#define FAIRTOR_PARALLEL_HPP

#include <cstddef>
#include <cstdlib>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fairtor::par {

enum class Mode { Serial, Parallel };

namespace detail {
inline Mode& mode_ref() {
    static Mode m = [] {
        const char* env = std::getenv("FAIRTOR_SERIAL");
        if (env && env[0] == '1') return Mode::Serial;
        return Mode::Parallel;
    }();
    return m;
}
}  // namespace detail

// Process-wide default for the parallel kernels. FAIRTOR_SERIAL=1 in the
// environment forces serial; tests flip it explicitly to compare paths.
inline Mode default_mode() { return detail::mode_ref(); }
inline void set_default_mode(Mode m) { detail::mode_ref() = m; }

template <typename F>
void parallel_for(std::size_t n, Mode mode, F&& fn) {
    if (mode == Mode::Parallel) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            fn(static_cast<std::size_t>(i));
        }
        return;
#endif
    }
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

template <typename F>
void parallel_for(std::size_t n, F&& fn) {
    parallel_for(n, default_mode(), fn);
}

// AND-reduction over n independent predicates. Order-independent, so the
// parallel path matches the serial reference bit for bit.
template <typename F>
bool parallel_all(std::size_t n, Mode mode, F&& pred) {
    bool ok = true;
    if (mode == Mode::Parallel) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) reduction(&& : ok)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            ok = pred(static_cast<std::size_t>(i)) && ok;
        }
        return ok;
#endif
    }
    for (std::size_t i = 0; i < n; ++i) ok = pred(i) && ok;
    return ok;
}

}  // namespace fairtor::par

#endif
