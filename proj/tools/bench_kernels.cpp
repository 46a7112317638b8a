// Copyright 2026 The dpfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Times the OpenMP kernels against their serial references on a synthetic
// workload and prints per-kernel speedups. Build target only; not a test.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif
#ifdef _OPENMP
#include <omp.h>
#endif

#include "dpfl/datasets.hpp"
#include "dpfl/dpcore.hpp"
#include "dpfl/model.hpp"
#include "dpfl/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_best_of(int repeats, F&& f) {
  f();  // warmup: allocator and page-fault costs stay out of the timings
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    f();
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    if (ms < best) best = ms;
  }
  return best;
}

void report(const std::string& name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %9.2f ms   openmp %9.2f ms   speedup %.2fx\n", name.c_str(), serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
  int batch = 512;
  int dim = 784;
  int hidden = 64;
  int classes = 10;
  int repeats = 5;
  if (argc > 1) batch = std::stoi(argv[1]);
  if (argc > 2) dim = std::stoi(argv[2]);
  if (argc > 3) hidden = std::stoi(argv[3]);

#ifdef __GLIBC__
  // Keep freed pages in the process so the timings measure compute, not the
  // trim/fault churn of releasing ~200 MB of gradients between calls.
  mallopt(M_TRIM_THRESHOLD, -1);
  mallopt(M_MMAP_MAX, 0);
#endif

#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: disabled at build time\n");
#endif
  std::printf("batch %d, input dim %d, hidden %d, classes %d\n\n", batch, dim, hidden, classes);

  dpfl::RngStream rng(42);
  const dpfl::Dataset data = dpfl::synth(classes, dim, batch / classes + 1, 4.0, rng);
  const std::vector<dpfl::Example> lot(data.examples.begin(), data.examples.begin() + batch);

  const auto model = dpfl::make_mlp(static_cast<std::size_t>(dim),
                                    static_cast<std::size_t>(hidden),
                                    static_cast<std::size_t>(classes));
  dpfl::RngStream init_rng(7);
  const dpfl::ParamVector params = model->init_params(init_rng);

  const double grad_serial = time_best_of(repeats, [&] {
    dpfl::per_sample_gradients_serial(*model, params, lot);
  });
  const double grad_parallel = time_best_of(repeats, [&] {
    dpfl::per_sample_gradients(*model, params, lot);
  });
  report("per_sample_gradients", grad_serial, grad_parallel);

  dpfl::PerSampleBatch batch_grads = dpfl::per_sample_gradients(*model, params, lot);
  const double norms_serial = time_best_of(repeats, [&] {
    dpfl::per_sample_norms_serial(batch_grads.gradients);
  });
  const double norms_parallel = time_best_of(repeats, [&] {
    dpfl::per_sample_norms(batch_grads.gradients);
  });
  report("per_sample_norms", norms_serial, norms_parallel);

  // Clipping is idempotent at a fixed threshold, so each call halves the
  // threshold to keep every repeat on the rescaling path.
  auto clip_work_serial = [&, c = 1.0](auto& grads) mutable {
    dpfl::clip_batch_serial(grads, c);
    c *= 0.5;
  };
  auto clip_work_parallel = [&, c = 1.0](auto& grads) mutable {
    dpfl::clip_batch(grads, c);
    c *= 0.5;
  };
  auto grads_a = batch_grads.gradients;
  const double clip_serial = time_best_of(repeats, [&] { clip_work_serial(grads_a); });
  auto grads_b = batch_grads.gradients;
  const double clip_parallel = time_best_of(repeats, [&] { clip_work_parallel(grads_b); });
  report("clip_batch", clip_serial, clip_parallel);

  std::vector<std::uint32_t> all(data.examples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  const double eval_serial = time_best_of(repeats, [&] {
    dpfl::evaluate_serial(*model, params, data.examples, all);
  });
  const double eval_parallel = time_best_of(repeats, [&] {
    dpfl::evaluate(*model, params, data.examples, all);
  });
  report("evaluate", eval_serial, eval_parallel);

  return 0;
}
