// Benchmark comparing the serial reference kernels against the OpenMP
// variants, plus one end-to-end model step. The parallel kernels are written
// to be bit-identical to the reference, so this also cross-checks outputs.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "core/kernels.hpp"
#include "core/optimizer.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "data/synth.hpp"
#include "model/mortality.hpp"

using namespace vitalattn;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_seconds();
    fn();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

void report(const char* name, double flops, double serial_s, double parallel_s, bool identical) {
  std::printf("%-28s %9.3f ms %9.3f ms  %5.2fx  %7.2f GF/s  %s\n", name, serial_s * 1e3,
              parallel_s * 1e3, serial_s / parallel_s, flops / parallel_s / 1e9,
              identical ? "bit-identical" : "MISMATCH");
}

void bench_matmul(int64_t m, int64_t k, int64_t n, int reps) {
  Rng rng(42);
  std::vector<double> a(m * k), b(k * n), c_serial(m * n), c_parallel(m * n);
  for (auto& v : a) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);

  const double serial_s =
      time_best_of(reps, [&] { kernels::matmul_serial(a.data(), b.data(), c_serial.data(), m, k, n); });
  const double parallel_s =
      time_best_of(reps, [&] { kernels::matmul_omp(a.data(), b.data(), c_parallel.data(), m, k, n); });
  char name[64];
  std::snprintf(name, sizeof(name), "matmul %lldx%lldx%lld", static_cast<long long>(m),
                static_cast<long long>(k), static_cast<long long>(n));
  report(name, 2.0 * m * k * n, serial_s, parallel_s,
         std::memcmp(c_serial.data(), c_parallel.data(), c_serial.size() * 8) == 0);
}

void bench_bmm(int64_t batch, int64_t m, int64_t k, int64_t n, int reps) {
  Rng rng(43);
  std::vector<double> a(batch * m * k), b(batch * k * n), c_serial(batch * m * n),
      c_parallel(batch * m * n);
  for (auto& v : a) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);
  const double serial_s = time_best_of(
      reps, [&] { kernels::bmm_serial(a.data(), b.data(), c_serial.data(), batch, m, k, n); });
  const double parallel_s = time_best_of(
      reps, [&] { kernels::bmm_omp(a.data(), b.data(), c_parallel.data(), batch, m, k, n); });
  char name[64];
  std::snprintf(name, sizeof(name), "bmm %lldx(%lldx%lldx%lld)", static_cast<long long>(batch),
                static_cast<long long>(m), static_cast<long long>(k), static_cast<long long>(n));
  report(name, 2.0 * batch * m * k * n, serial_s, parallel_s,
         std::memcmp(c_serial.data(), c_parallel.data(), c_serial.size() * 8) == 0);
}

void bench_map(int64_t n, int reps) {
  Rng rng(44);
  std::vector<double> x(n), out_serial(n), out_parallel(n);
  for (auto& v : x) v = rng.uniform(-3, 3);
  const double serial_s = time_best_of(reps, [&] {
    kernels::map_serial(kernels::Unary::Sigmoid, x.data(), out_serial.data(), n, 0.0);
  });
  const double parallel_s = time_best_of(reps, [&] {
    kernels::map_omp(kernels::Unary::Sigmoid, x.data(), out_parallel.data(), n, 0.0);
  });
  char name[64];
  std::snprintf(name, sizeof(name), "sigmoid map n=%lld", static_cast<long long>(n));
  report(name, static_cast<double>(n), serial_s, parallel_s,
         std::memcmp(out_serial.data(), out_parallel.data(), n * 8) == 0);
}

// One supervised step of the full model, kernels serial vs parallel.
void bench_model_step(int reps) {
  auto [cohort, truth] = synth_generate({.n = 32, .positive_fraction = 0.5, .seed = 9});
  std::vector<const PatientRecord*> batch;
  for (const auto& rec : cohort.records) batch.push_back(&rec);
  std::vector<double> labels(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) labels[i] = batch[i]->label;
  const Tensor y = Tensor::from_values({static_cast<int64_t>(batch.size())}, labels);

  const auto step = [&](MortalityModel& model, Adam& opt) {
    Tensor loss = bce_loss(model.forward(batch).prob, y);
    backward(loss);
    opt.step();
    Tape::active().clear();
  };

  MortalityConfig cfg;
  cfg.encoder.dim = 32;
  cfg.encoder.blocks = 2;
  cfg.encoder.heads = 4;

  MortalityModel model_serial(cfg, 7);
  Adam opt_serial(model_serial.trainable_params(true));
  kernels::set_parallel(false);
  const double serial_s = time_best_of(reps, [&] { step(model_serial, opt_serial); });

  MortalityModel model_parallel(cfg, 7);
  Adam opt_parallel(model_parallel.trainable_params(true));
  kernels::set_parallel(true);
  const double parallel_s = time_best_of(reps, [&] { step(model_parallel, opt_parallel); });

  // same seed, same data: parameter trajectories must agree bitwise
  bool identical = true;
  const auto a = model_serial.named_params();
  const auto b = model_parallel.named_params();
  for (size_t i = 0; i < a.size(); ++i)
    identical = identical && std::memcmp(a[i].second.values().data(),
                                         b[i].second.values().data(),
                                         a[i].second.size() * 8) == 0;
  report("model fwd+bwd+step (B=32)", 0.0, serial_s, parallel_s, identical);
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1) reps = std::atoi(argv[1]);
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; parallel variants run serially\n");
#endif
  std::printf("%-28s %12s %12s %7s %13s\n", "kernel", "serial", "parallel", "speedup",
              "parallel rate");

  bench_matmul(128, 128, 128, reps);
  bench_matmul(256, 256, 256, reps);
  bench_matmul(512, 512, 512, reps);
  bench_matmul(4096, 364, 364, reps);  // SHAP normal-equation shape
  bench_bmm(64, 24, 32, 24, reps);     // attention logits shape
  bench_bmm(256, 20, 8, 20, reps);
  bench_map(1 << 20, reps);
  bench_model_step(std::max(2, reps / 2));
  return 0;
}
