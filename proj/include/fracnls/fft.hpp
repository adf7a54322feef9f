#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "grid.hpp"

namespace fracnls::detail {

// FFTW's planner is not thread-safe even though plan execution is; all plan
// creation and destruction is serialized through this mutex.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Cached complex-to-complex plan pair for one (dim, M) shape, with owned
// aligned buffers. Transforms are unnormalized in both directions; callers
// apply the 1/M^dim factor where needed.
class PlanSet {
public:
  PlanSet(int dim, int m) : n_(1) {
    int shape[3] = {m, m, m};
    for (int d = 0; d < dim; ++d) n_ *= static_cast<std::size_t>(m);
    buf_in_ = fftw_alloc_complex(n_);
    buf_out_ = fftw_alloc_complex(n_);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft(dim, shape, buf_in_, buf_out_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft(dim, shape, buf_in_, buf_out_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  PlanSet(const PlanSet&) = delete;
  PlanSet& operator=(const PlanSet&) = delete;

  ~PlanSet() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_in_);
    fftw_free(buf_out_);
  }

  std::size_t size() const { return n_; }
  std::complex<double>* in() { return reinterpret_cast<std::complex<double>*>(buf_in_); }
  std::complex<double>* out() { return reinterpret_cast<std::complex<double>*>(buf_out_); }
  void run_forward() { fftw_execute(fwd_); }
  void run_backward() { fftw_execute(bwd_); }

private:
  std::size_t n_;
  fftw_complex* buf_in_;
  fftw_complex* buf_out_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

inline PlanSet& plans_for(const GridDescriptor& g) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<PlanSet>> cache;
  auto key = std::make_pair(g.dim, g.points_per_axis);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_unique<PlanSet>(g.dim, g.points_per_axis)).first;
  return *it->second;
}

// Unnormalized forward DFT of a real field: Y_k = sum_j u_j e^{-2 pi i k.j / M}.
inline std::vector<std::complex<double>> forward_dft(const Field& u) {
  PlanSet& ps = plans_for(u.grid);
  std::complex<double>* in = ps.in();
  for (std::size_t i = 0; i < ps.size(); ++i) in[i] = u.values[i];
  ps.run_forward();
  return std::vector<std::complex<double>>(ps.out(), ps.out() + ps.size());
}

// Inverse DFT including the 1/M^dim normalization; writes the real part into
// out (the imaginary part is round-off for conjugate-symmetric spectra).
inline void inverse_dft_real(const GridDescriptor& g,
                             const std::vector<std::complex<double>>& spec,
                             std::vector<double>& out) {
  PlanSet& ps = plans_for(g);
  std::complex<double>* in = ps.in();
  for (std::size_t i = 0; i < ps.size(); ++i) in[i] = spec[i];
  ps.run_backward();
  const double scale = 1.0 / static_cast<double>(ps.size());
  out.resize(ps.size());
  const std::complex<double>* res = ps.out();
  for (std::size_t i = 0; i < ps.size(); ++i) out[i] = res[i].real() * scale;
}

}  // namespace fracnls::detail
