#include "cosca/kernels.hpp"

#include <cmath>
#include <cstring>

namespace cosca::kernels {

namespace {

inline double pair_term(const double* ai, const double* bj, std::size_t d,
                        bool same, double margin) {
  double dist_sq = 0.0;
  for (std::size_t t = 0; t < d; ++t) {
    const double delta = ai[t] - bj[t];
    dist_sq += delta * delta;
  }
  if (same) return dist_sq;
  const double dist = std::sqrt(dist_sq);
  if (dist >= margin) return 0.0;
  const double h = margin - dist;
  return h * h;
}

// accumulates scale * d(term)/d(a_i) into out for one pair; sign = +1 for the
// A side, -1 for the B side
inline void pair_grad_row(double* out, const double* ai, const double* bj,
                          std::size_t d, bool same, double margin,
                          double scale, double sign) {
  double dist_sq = 0.0;
  for (std::size_t t = 0; t < d; ++t) {
    const double delta = ai[t] - bj[t];
    dist_sq += delta * delta;
  }
  if (same) {
    const double c = 2.0 * scale * sign;
    for (std::size_t t = 0; t < d; ++t) out[t] += c * (ai[t] - bj[t]);
    return;
  }
  const double dist = std::sqrt(dist_sq);
  if (dist >= margin || dist == 0.0) return;  // zero subgradient at the kink
  const double c = -2.0 * (margin - dist) / dist * scale * sign;
  for (std::size_t t = 0; t < d; ++t) out[t] += c * (ai[t] - bj[t]);
}

std::vector<std::vector<int>> bucket_pairs(const PairTerm* pairs, std::size_t n_pairs,
                                           std::size_t rows, bool by_i) {
  std::vector<std::vector<int>> buckets(rows);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    buckets[static_cast<std::size_t>(by_i ? pairs[p].i : pairs[p].j)].push_back(
        static_cast<int>(p));
  }
  return buckets;
}

}  // namespace

// ---------------------------------------------------------------- serial

namespace serial {

void matmul(double* c, const double* a, const double* b,
            std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const double ait = a[i * k + t];
      const double* bt = b + t * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += ait * bt[j];
    }
  }
}

void matmul_abt_acc(double* da, const double* g, const double* b,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* dai = da + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double* bt = b + t * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bt[j];
      dai[t] += acc;
    }
  }
}

void matmul_atb_acc(double* db, const double* a, const double* g,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t t = 0; t < k; ++t) {
    double* dbt = db + t * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double ait = a[i * k + t];
      const double* gi = g + i * n;
      for (std::size_t j = 0; j < n; ++j) dbt[j] += ait * gi[j];
    }
  }
}

double sum(const double* x, std::size_t n) {
  const std::size_t nchunks = (n + kSumChunk - 1) / kSumChunk;
  std::vector<double> partial(nchunks, 0.0);
  for (std::size_t c = 0; c < nchunks; ++c) {
    const std::size_t lo = c * kSumChunk;
    const std::size_t hi = lo + kSumChunk < n ? lo + kSumChunk : n;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += x[i];
    partial[c] = s;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) total += partial[c];
  return total;
}

double sum_sq(const double* x, std::size_t n) {
  const std::size_t nchunks = (n + kSumChunk - 1) / kSumChunk;
  std::vector<double> partial(nchunks, 0.0);
  for (std::size_t c = 0; c < nchunks; ++c) {
    const std::size_t lo = c * kSumChunk;
    const std::size_t hi = lo + kSumChunk < n ? lo + kSumChunk : n;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += x[i] * x[i];
    partial[c] = s;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) total += partial[c];
  return total;
}

void softmax_rows(double* out, const double* in, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = in + i * cols;
    double* oi = out + i * cols;
    double mx = xi[0];
    for (std::size_t j = 1; j < cols; ++j) mx = xi[j] > mx ? xi[j] : mx;
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      oi[j] = std::exp(xi[j] - mx);
      denom += oi[j];
    }
    for (std::size_t j = 0; j < cols; ++j) oi[j] /= denom;
  }
}

double contrastive_sum(const double* a, const double* b, std::size_t d,
                       const PairTerm* pairs, std::size_t n_pairs, double margin) {
  const std::size_t nchunks = (n_pairs + kSumChunk - 1) / kSumChunk;
  std::vector<double> partial(nchunks, 0.0);
  for (std::size_t c = 0; c < nchunks; ++c) {
    const std::size_t lo = c * kSumChunk;
    const std::size_t hi = lo + kSumChunk < n_pairs ? lo + kSumChunk : n_pairs;
    double s = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      s += pair_term(a + static_cast<std::size_t>(pairs[p].i) * d,
                     b + static_cast<std::size_t>(pairs[p].j) * d, d,
                     pairs[p].same, margin);
    }
    partial[c] = s;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) total += partial[c];
  return total;
}

void contrastive_grad(double* da, double* db, const double* a, const double* b,
                      std::size_t rows_a, std::size_t rows_b, std::size_t d,
                      const PairTerm* pairs, std::size_t n_pairs, double margin,
                      double scale) {
  const auto by_i = bucket_pairs(pairs, n_pairs, rows_a, true);
  for (std::size_t r = 0; r < rows_a; ++r) {
    for (int p : by_i[r]) {
      pair_grad_row(da + r * d, a + r * d,
                    b + static_cast<std::size_t>(pairs[p].j) * d, d,
                    pairs[p].same, margin, scale, 1.0);
    }
  }
  const auto by_j = bucket_pairs(pairs, n_pairs, rows_b, false);
  for (std::size_t r = 0; r < rows_b; ++r) {
    for (int p : by_j[r]) {
      pair_grad_row(db + r * d, a + static_cast<std::size_t>(pairs[p].i) * d,
                    b + r * d, d, pairs[p].same, margin, scale, -1.0);
    }
  }
}

}  // namespace serial

// ---------------------------------------------------------------- OpenMP

void matmul(double* c, const double* a, const double* b,
            std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kMinParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* ci = c + i * static_cast<std::ptrdiff_t>(n);
    for (std::size_t t = 0; t < k; ++t) {
      const double ait = a[static_cast<std::size_t>(i) * k + t];
      const double* bt = b + t * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += ait * bt[j];
    }
  }
}

void matmul_abt_acc(double* da, const double* g, const double* b,
                    std::size_t m, std::size_t k, std::size_t n) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kMinParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const double* gi = g + i * static_cast<std::ptrdiff_t>(n);
    double* dai = da + i * static_cast<std::ptrdiff_t>(k);
    for (std::size_t t = 0; t < k; ++t) {
      const double* bt = b + t * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bt[j];
      dai[t] += acc;
    }
  }
}

void matmul_atb_acc(double* db, const double* a, const double* g,
                    std::size_t m, std::size_t k, std::size_t n) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if (m * k * n >= kMinParallelWork)
  for (std::ptrdiff_t t = 0; t < rows; ++t) {
    double* dbt = db + t * static_cast<std::ptrdiff_t>(n);
    for (std::size_t i = 0; i < m; ++i) {
      const double ait = a[i * k + static_cast<std::size_t>(t)];
      const double* gi = g + i * n;
      for (std::size_t j = 0; j < n; ++j) dbt[j] += ait * gi[j];
    }
  }
}

double sum(const double* x, std::size_t n) {
  const std::size_t nchunks = (n + kSumChunk - 1) / kSumChunk;
  std::vector<double> partial(nchunks, 0.0);
  const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(nchunks);
#pragma omp parallel for schedule(static) if (n >= kMinParallelWork)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kSumChunk;
    const std::size_t hi = lo + kSumChunk < n ? lo + kSumChunk : n;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += x[i];
    partial[static_cast<std::size_t>(c)] = s;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) total += partial[c];
  return total;
}

double sum_sq(const double* x, std::size_t n) {
  const std::size_t nchunks = (n + kSumChunk - 1) / kSumChunk;
  std::vector<double> partial(nchunks, 0.0);
  const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(nchunks);
#pragma omp parallel for schedule(static) if (n >= kMinParallelWork)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kSumChunk;
    const std::size_t hi = lo + kSumChunk < n ? lo + kSumChunk : n;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += x[i] * x[i];
    partial[static_cast<std::size_t>(c)] = s;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) total += partial[c];
  return total;
}

void softmax_rows(double* out, const double* in, std::size_t rows, std::size_t cols) {
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kMinParallelWork)
  for (std::ptrdiff_t i = 0; i < r; ++i) {
    const double* xi = in + i * static_cast<std::ptrdiff_t>(cols);
    double* oi = out + i * static_cast<std::ptrdiff_t>(cols);
    double mx = xi[0];
    for (std::size_t j = 1; j < cols; ++j) mx = xi[j] > mx ? xi[j] : mx;
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      oi[j] = std::exp(xi[j] - mx);
      denom += oi[j];
    }
    for (std::size_t j = 0; j < cols; ++j) oi[j] /= denom;
  }
}

double contrastive_sum(const double* a, const double* b, std::size_t d,
                       const PairTerm* pairs, std::size_t n_pairs, double margin) {
  const std::size_t nchunks = (n_pairs + kSumChunk - 1) / kSumChunk;
  std::vector<double> partial(nchunks, 0.0);
  const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(nchunks);
#pragma omp parallel for schedule(static) if (n_pairs * d >= kMinParallelWork)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kSumChunk;
    const std::size_t hi = lo + kSumChunk < n_pairs ? lo + kSumChunk : n_pairs;
    double s = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      s += pair_term(a + static_cast<std::size_t>(pairs[p].i) * d,
                     b + static_cast<std::size_t>(pairs[p].j) * d, d,
                     pairs[p].same, margin);
    }
    partial[static_cast<std::size_t>(c)] = s;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) total += partial[c];
  return total;
}

void contrastive_grad(double* da, double* db, const double* a, const double* b,
                      std::size_t rows_a, std::size_t rows_b, std::size_t d,
                      const PairTerm* pairs, std::size_t n_pairs, double margin,
                      double scale) {
  const auto by_i = bucket_pairs(pairs, n_pairs, rows_a, true);
  const std::ptrdiff_t ra = static_cast<std::ptrdiff_t>(rows_a);
#pragma omp parallel for schedule(static) if (n_pairs * d >= kMinParallelWork)
  for (std::ptrdiff_t r = 0; r < ra; ++r) {
    for (int p : by_i[static_cast<std::size_t>(r)]) {
      pair_grad_row(da + r * static_cast<std::ptrdiff_t>(d),
                    a + r * static_cast<std::ptrdiff_t>(d),
                    b + static_cast<std::size_t>(pairs[p].j) * d, d,
                    pairs[p].same, margin, scale, 1.0);
    }
  }
  const auto by_j = bucket_pairs(pairs, n_pairs, rows_b, false);
  const std::ptrdiff_t rb = static_cast<std::ptrdiff_t>(rows_b);
#pragma omp parallel for schedule(static) if (n_pairs * d >= kMinParallelWork)
  for (std::ptrdiff_t r = 0; r < rb; ++r) {
    for (int p : by_j[static_cast<std::size_t>(r)]) {
      pair_grad_row(db + r * static_cast<std::ptrdiff_t>(d),
                    a + static_cast<std::size_t>(pairs[p].i) * d,
                    b + r * static_cast<std::ptrdiff_t>(d), d,
                    pairs[p].same, margin, scale, -1.0);
    }
  }
}

}  // namespace cosca::kernels
