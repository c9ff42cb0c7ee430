#pragma once

#include <complex>
#include <vector>

namespace lensdeg::fft {

using cplx = std::complex<double>;

/// In-place 2-D complex DFT of a row-major rows×cols array. `sign` = -1 forward, +1 backward
/// (unnormalized, FFTW convention).
void dft2d(std::vector<cplx>& data, int rows, int cols, int sign);

/// Real-to-complex 2-D DFT; output has rows × (cols/2 + 1) coefficients.
std::vector<cplx> r2c(const std::vector<double>& in, int rows, int cols);
/// Inverse of r2c, unnormalized (result is rows·cols times the original).
std::vector<double> c2r(std::vector<cplx> in, int rows, int cols);

/// Smallest n' >= n whose prime factors are all in {2, 3, 5}.
int fast_size(int n);

/// Swaps quadrants so the zero-frequency sample moves to (rows/2, cols/2).
template <typename T>
void fftshift(std::vector<T>& a, int rows, int cols) {
    std::vector<T> out(a.size());
    for (int r = 0; r < rows; ++r) {
        const int rr = (r + rows / 2) % rows;
        for (int c = 0; c < cols; ++c) out[rr * cols + (c + cols / 2) % cols] = a[r * cols + c];
    }
    a.swap(out);
}

}  // namespace lensdeg::fft
