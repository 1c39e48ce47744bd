#pragma once

#include <cstddef>
#include <vector>

// Numeric inner loops. Every kernel exists twice: a plain serial reference
// under kernels::serial, and an OpenMP version at kernels:: scope with an
// identical per-element accumulation order. Parallel loops only ever write
// disjoint outputs, and scalar reductions combine fixed-size chunk partials
// in chunk order, so results are bit-identical for any thread count and
// bit-identical to the serial reference. `bench_kernels` compares the two.

namespace cosca::kernels {

// one contrastive pair: row i of A against row j of B
struct PairTerm {
  int i = 0;
  int j = 0;
  bool same = false;
};

// chunk size for partitioned scalar reductions
inline constexpr std::size_t kSumChunk = 4096;

// element counts below this stay on the calling thread
inline constexpr std::size_t kMinParallelWork = 1u << 14;

namespace serial {

// C[m x n] = A[m x k] * B[k x n]
void matmul(double* c, const double* a, const double* b,
            std::size_t m, std::size_t k, std::size_t n);

// dA[m x k] += G[m x n] * B[k x n]^T
void matmul_abt_acc(double* da, const double* g, const double* b,
                    std::size_t m, std::size_t k, std::size_t n);

// dB[k x n] += A[m x k]^T * G[m x n]
void matmul_atb_acc(double* db, const double* a, const double* g,
                    std::size_t m, std::size_t k, std::size_t n);

double sum(const double* x, std::size_t n);
double sum_sq(const double* x, std::size_t n);

void softmax_rows(double* out, const double* in, std::size_t rows, std::size_t cols);

double contrastive_sum(const double* a, const double* b, std::size_t d,
                       const PairTerm* pairs, std::size_t n_pairs, double margin);

// accumulates scale * d(contrastive_sum)/dA into da and likewise into db;
// da == db is allowed (target-target pairs share one feature matrix)
void contrastive_grad(double* da, double* db, const double* a, const double* b,
                      std::size_t rows_a, std::size_t rows_b, std::size_t d,
                      const PairTerm* pairs, std::size_t n_pairs, double margin,
                      double scale);

}  // namespace serial

void matmul(double* c, const double* a, const double* b,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_abt_acc(double* da, const double* g, const double* b,
                    std::size_t m, std::size_t k, std::size_t n);
void matmul_atb_acc(double* db, const double* a, const double* g,
                    std::size_t m, std::size_t k, std::size_t n);
double sum(const double* x, std::size_t n);
double sum_sq(const double* x, std::size_t n);
void softmax_rows(double* out, const double* in, std::size_t rows, std::size_t cols);
double contrastive_sum(const double* a, const double* b, std::size_t d,
                       const PairTerm* pairs, std::size_t n_pairs, double margin);
void contrastive_grad(double* da, double* db, const double* a, const double* b,
                      std::size_t rows_a, std::size_t rows_b, std::size_t d,
                      const PairTerm* pairs, std::size_t n_pairs, double margin,
                      double scale);

}  // namespace cosca::kernels
