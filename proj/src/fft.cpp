#include "czl/error.hpp"
#include "czl/lattice.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

namespace czl {

namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new arrays is.
// Plans are estimated (not measured) so that the chosen algorithm, and therefore
// rounding, is identical from run to run. Every execution runs on an fftw_malloc buffer,
// so one aligned plan serves all inputs.
class PlanCache {
public:
    fftw_plan get(std::span<const std::size_t> n_axis, int sign) {
        std::vector<int> dims(n_axis.begin(), n_axis.end());
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_pair(dims, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;

        std::size_t total = 1;
        for (int n : dims) total *= static_cast<std::size_t>(n);
        auto* buf = fftw_alloc_complex(total);
        fftw_plan plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), buf, buf, sign, FFTW_ESTIMATE);
        fftw_free(buf);
        if (plan == nullptr) throw StructuralError("FFTW failed to create a plan");
        plans_.emplace(std::move(key), plan);
        return plan;
    }

    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::vector<int>, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

class AlignedBuffer {
public:
    ~AlignedBuffer() { fftw_free(data_); }
    cplx* get(std::size_t n) {
        if (n > size_) {
            fftw_free(data_);
            data_ = reinterpret_cast<cplx*>(fftw_alloc_complex(n));
            if (data_ == nullptr) throw StructuralError("fft: allocation failed");
            size_ = n;
        }
        return data_;
    }

private:
    cplx* data_ = nullptr;
    std::size_t size_ = 0;
};

void transform(const ProductLattice& lattice, std::span<cplx> data, int sign) {
    if (data.size() != lattice.size()) throw StructuralError("fft: data size does not match lattice");
    fftw_plan plan = plan_cache().get(lattice.n_axis(), sign);
    thread_local AlignedBuffer scratch;
    cplx* buf = scratch.get(data.size());
    std::copy(data.begin(), data.end(), buf);
    auto* raw = reinterpret_cast<fftw_complex*>(buf);
    fftw_execute_dft(plan, raw, raw);
    const double scale = 1.0 / std::sqrt(static_cast<double>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = buf[i] * scale;
}

}  // namespace

void fft_forward_inplace(const ProductLattice& lattice, std::span<cplx> data) {
    transform(lattice, data, FFTW_FORWARD);
}

void fft_inverse_inplace(const ProductLattice& lattice, std::span<cplx> data) {
    transform(lattice, data, FFTW_BACKWARD);
}

}  // namespace czl
