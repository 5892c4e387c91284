#include "egopose/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace egopose::kernels {

namespace {

struct Table {
  void (*sgemm_nn)(int, int, int, float, const float*, int, const float*, int, float, float*, int);
  void (*sgemm_nt)(int, int, int, float, const float*, int, const float*, int, float, float*, int);
  void (*sgemm_tn)(int, int, int, float, const float*, int, const float*, int, float, float*, int);
  void (*axpy)(int64_t, float, const float*, float*);
  void (*scale)(int64_t, float, float*);
  void (*vadd)(int64_t, const float*, const float*, float*);
  void (*vmul)(int64_t, const float*, const float*, float*);
  void (*leaky_relu_fwd)(int64_t, float, const float*, float*);
  void (*leaky_relu_bwd)(int64_t, float, const float*, const float*, float*);
  double (*reduce_sum)(int64_t, const float*);
  double (*reduce_sumsq)(int64_t, const float*);
  float (*reduce_max)(int64_t, const float*);
};

constexpr Table kScalarTable = {
    scalar::sgemm_nn,       scalar::sgemm_nt,       scalar::sgemm_tn,
    scalar::axpy,           scalar::scale,          scalar::vadd,
    scalar::vmul,           scalar::leaky_relu_fwd, scalar::leaky_relu_bwd,
    scalar::reduce_sum,     scalar::reduce_sumsq,   scalar::reduce_max,
};

#if defined(__x86_64__) || defined(_M_X64)
constexpr Table kAvx2Table = {
    avx2::sgemm_nn,       avx2::sgemm_nt,       avx2::sgemm_tn,
    avx2::axpy,           avx2::scale,          avx2::vadd,
    avx2::vmul,           avx2::leaky_relu_fwd, avx2::leaky_relu_bwd,
    avx2::reduce_sum,     avx2::reduce_sumsq,   avx2::reduce_max,
};
#endif

Isa g_isa = Isa::scalar;
const Table* g_table = &kScalarTable;
std::atomic<bool> g_initialized{false};

Isa detect_default_isa() {
  if (const char* env = std::getenv("EGOPOSE_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0 && isa_supported(Isa::avx2)) return Isa::avx2;
    if (std::strcmp(env, "auto") != 0) return Isa::scalar;
  }
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

// explicit set_isa wins over lazy auto-detection, whichever happens first
void ensure_init() {
  if (!g_initialized.load(std::memory_order_acquire)) set_isa(detect_default_isa());
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

void set_isa(Isa isa) {
  if (!isa_supported(isa)) isa = Isa::scalar;
  g_initialized.store(true, std::memory_order_release);
  g_isa = isa;
#if defined(__x86_64__) || defined(_M_X64)
  g_table = (isa == Isa::avx2) ? &kAvx2Table : &kScalarTable;
#else
  g_table = &kScalarTable;
#endif
}

Isa active_isa() {
  ensure_init();
  return g_isa;
}

const char* isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

void sgemm_nn(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc) {
  ensure_init();
  g_table->sgemm_nn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void sgemm_nt(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc) {
  ensure_init();
  g_table->sgemm_nt(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void sgemm_tn(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc) {
  ensure_init();
  g_table->sgemm_tn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void axpy(int64_t n, float alpha, const float* x, float* y) {
  ensure_init();
  g_table->axpy(n, alpha, x, y);
}

void scale(int64_t n, float alpha, float* x) {
  ensure_init();
  g_table->scale(n, alpha, x);
}

void vadd(int64_t n, const float* a, const float* b, float* out) {
  ensure_init();
  g_table->vadd(n, a, b, out);
}

void vmul(int64_t n, const float* a, const float* b, float* out) {
  ensure_init();
  g_table->vmul(n, a, b, out);
}

void leaky_relu_fwd(int64_t n, float slope, const float* x, float* y) {
  ensure_init();
  g_table->leaky_relu_fwd(n, slope, x, y);
}

void leaky_relu_bwd(int64_t n, float slope, const float* x, const float* gy, float* gx) {
  ensure_init();
  g_table->leaky_relu_bwd(n, slope, x, gy, gx);
}

double reduce_sum(int64_t n, const float* x) {
  ensure_init();
  return g_table->reduce_sum(n, x);
}

double reduce_sumsq(int64_t n, const float* x) {
  ensure_init();
  return g_table->reduce_sumsq(n, x);
}

float reduce_max(int64_t n, const float* x) {
  ensure_init();
  return g_table->reduce_max(n, x);
}

}  // namespace egopose::kernels
