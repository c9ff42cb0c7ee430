#include "lensdeg/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <tuple>

namespace lensdeg::fft {

namespace {

// The FFTW planner is not thread-safe; execution of an existing plan on new arrays is.
std::mutex g_planner;

enum class Kind { c2c_forward, c2c_backward, r2c, c2r };

fftw_plan plan_for(Kind kind, int rows, int cols) {
    static std::map<std::tuple<Kind, int, int>, fftw_plan> cache;
    std::lock_guard lock(g_planner);
    auto key = std::make_tuple(kind, rows, cols);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    const std::size_t nc = static_cast<std::size_t>(rows) * (cols / 2 + 1);
    fftw_plan plan = nullptr;
    switch (kind) {
        case Kind::c2c_forward:
        case Kind::c2c_backward: {
            auto* buf = fftw_alloc_complex(n);
            plan = fftw_plan_dft_2d(rows, cols, buf, buf,
                                    kind == Kind::c2c_forward ? FFTW_FORWARD : FFTW_BACKWARD, flags);
            fftw_free(buf);
            break;
        }
        case Kind::r2c: {
            auto* in = fftw_alloc_real(n);
            auto* out = fftw_alloc_complex(nc);
            plan = fftw_plan_dft_r2c_2d(rows, cols, in, out, flags);
            fftw_free(in);
            fftw_free(out);
            break;
        }
        case Kind::c2r: {
            auto* in = fftw_alloc_complex(nc);
            auto* out = fftw_alloc_real(n);
            plan = fftw_plan_dft_c2r_2d(rows, cols, in, out, flags);
            fftw_free(in);
            fftw_free(out);
            break;
        }
    }
    cache.emplace(key, plan);
    return plan;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

void dft2d(std::vector<cplx>& data, int rows, int cols, int sign) {
    auto plan = plan_for(sign < 0 ? Kind::c2c_forward : Kind::c2c_backward, rows, cols);
    fftw_execute_dft(plan, as_fftw(data.data()), as_fftw(data.data()));
}

std::vector<cplx> r2c(const std::vector<double>& in, int rows, int cols) {
    std::vector<double> scratch = in;  // r2c may clobber its input
    std::vector<cplx> out(static_cast<std::size_t>(rows) * (cols / 2 + 1));
    fftw_execute_dft_r2c(plan_for(Kind::r2c, rows, cols), scratch.data(), as_fftw(out.data()));
    return out;
}

std::vector<double> c2r(std::vector<cplx> in, int rows, int cols) {
    std::vector<double> out(static_cast<std::size_t>(rows) * cols);
    fftw_execute_dft_c2r(plan_for(Kind::c2r, rows, cols), as_fftw(in.data()), out.data());
    return out;
}

int fast_size(int n) {
    for (int m = std::max(n, 1);; ++m) {
        int k = m;
        for (int f : {2, 3, 5}) {
            while (k % f == 0) k /= f;
        }
        if (k == 1) return m;
    }
}

}  // namespace lensdeg::fft
