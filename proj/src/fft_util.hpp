// Minimal RAII wrapper over FFTW complex-to-complex transforms. Plans are
// created with FFTW_ESTIMATE so results are bit-reproducible across runs.
#pragma once

#include <complex>
#include <algorithm>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace atomlaser {

class Fft1D {
public:
    explicit Fft1D(std::size_t n) : n_(n) {
        // FFTW's planner is not thread safe; plan creation and destruction
        // are serialized behind one mutex. fftw_execute is safe concurrently.
        const std::lock_guard<std::mutex> lock(planner_mutex());
        buf_ = fftw_alloc_complex(n);
        fwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft1D() {
        const std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    Fft1D(const Fft1D&) = delete;
    Fft1D& operator=(const Fft1D&) = delete;

    std::size_t size() const { return n_; }

    // In-place unnormalized transforms on caller data.
    void forward(std::complex<double>* data) { run(fwd_, data); }
    // Backward applies the 1/n normalization so forward+backward is identity.
    void backward(std::complex<double>* data) {
        run(bwd_, data);
        const double s = 1.0 / static_cast<double>(n_);
        for (std::size_t i = 0; i < n_; ++i) data[i] *= s;
    }

private:
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    void run(fftw_plan plan, std::complex<double>* data) {
        // fftw_complex and std::complex<double> share layout by construction.
        auto* buf = reinterpret_cast<std::complex<double>*>(buf_);
        std::copy(data, data + n_, buf);
        fftw_execute(plan);
        std::copy(buf, buf + n_, data);
    }

    std::size_t n_;
    fftw_complex* buf_;
    fftw_plan fwd_;
    fftw_plan bwd_;
};

} // namespace atomlaser
