#pragma once

#include <cstdint>

// Data-parallel inner loops behind the tensor ops. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2 variant selected at runtime
// (override with EGOPOSE_KERNELS=scalar|avx2). The two are equivalence-tested.
namespace egopose::kernels {

enum class Isa { scalar, avx2 };

Isa active_isa();
void set_isa(Isa isa);
bool isa_supported(Isa isa);
const char* isa_name(Isa isa);

// C (m x n) = alpha * A (m x k) * B (k x n) + beta * C
void sgemm_nn(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc);
// C (m x n) = alpha * A (m x k) * B^T, B stored (n x k)
void sgemm_nt(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc);
// C (m x n) = alpha * A^T * B, A stored (k x m), B stored (k x n)
void sgemm_tn(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc);

void axpy(int64_t n, float alpha, const float* x, float* y);  // y += alpha * x
void scale(int64_t n, float alpha, float* x);
void vadd(int64_t n, const float* a, const float* b, float* out);
void vmul(int64_t n, const float* a, const float* b, float* out);

void leaky_relu_fwd(int64_t n, float slope, const float* x, float* y);
// gx += gy * (x > 0 ? 1 : slope)
void leaky_relu_bwd(int64_t n, float slope, const float* x, const float* gy, float* gx);

double reduce_sum(int64_t n, const float* x);
double reduce_sumsq(int64_t n, const float* x);
float reduce_max(int64_t n, const float* x);

namespace scalar {
void sgemm_nn(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc);
void sgemm_nt(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc);
void sgemm_tn(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc);
void axpy(int64_t n, float alpha, const float* x, float* y);
void scale(int64_t n, float alpha, float* x);
void vadd(int64_t n, const float* a, const float* b, float* out);
void vmul(int64_t n, const float* a, const float* b, float* out);
void leaky_relu_fwd(int64_t n, float slope, const float* x, float* y);
void leaky_relu_bwd(int64_t n, float slope, const float* x, const float* gy, float* gx);
double reduce_sum(int64_t n, const float* x);
double reduce_sumsq(int64_t n, const float* x);
float reduce_max(int64_t n, const float* x);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void sgemm_nn(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc);
void sgemm_nt(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc);
void sgemm_tn(int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc);
void axpy(int64_t n, float alpha, const float* x, float* y);
void scale(int64_t n, float alpha, float* x);
void vadd(int64_t n, const float* a, const float* b, float* out);
void vmul(int64_t n, const float* a, const float* b, float* out);
void leaky_relu_fwd(int64_t n, float slope, const float* x, float* y);
void leaky_relu_bwd(int64_t n, float slope, const float* x, const float* gy, float* gx);
double reduce_sum(int64_t n, const float* x);
double reduce_sumsq(int64_t n, const float* x);
float reduce_max(int64_t n, const float* x);
}  // namespace avx2
#endif

}  // namespace egopose::kernels
