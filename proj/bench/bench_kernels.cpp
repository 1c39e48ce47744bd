// times the OpenMP kernels against their serial references and double-checks
// that the pair produces bit-identical results while it is at it
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <omp.h>
#include <string>
#include <vector>

#include "cosca/kernels.hpp"
#include "cosca/rng.hpp"

using cosca::Rng;
namespace k = cosca::kernels;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

struct Row {
  std::string name;
  double serial_ms;
  double parallel_ms;
  bool identical;
};

void print_rows(const std::vector<Row>& rows) {
  std::printf("%-24s %12s %12s %9s %10s\n", "kernel", "serial ms", "parallel ms",
              "speedup", "bit-equal");
  for (const auto& r : rows) {
    std::printf("%-24s %12.3f %12.3f %8.2fx %10s\n", r.name.c_str(), r.serial_ms,
                r.parallel_ms, r.serial_ms / r.parallel_ms, r.identical ? "yes" : "NO");
  }
}

}  // namespace

int main() {
  Rng rng(7);
  std::vector<Row> rows;
  bool all_identical = true;

  std::printf("omp max threads: %d\n\n", omp_get_max_threads());

  {
    const std::size_t m = 256, kk = 256, n = 256;
    std::vector<double> a(m * kk), b(kk * n), c_s(m * n), c_p(m * n);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    Row r{"matmul 256^3", 0, 0, false};
    r.serial_ms = time_ms([&] { k::serial::matmul(c_s.data(), a.data(), b.data(), m, kk, n); }, 5);
    r.parallel_ms = time_ms([&] { k::matmul(c_p.data(), a.data(), b.data(), m, kk, n); }, 5);
    r.identical = std::memcmp(c_s.data(), c_p.data(), c_s.size() * sizeof(double)) == 0;
    all_identical &= r.identical;
    rows.push_back(r);
  }

  {
    const std::size_t n = 1u << 22;
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1, 1);
    double s_s = 0, s_p = 0;
    Row r{"sum 4M", 0, 0, false};
    r.serial_ms = time_ms([&] { s_s = k::serial::sum(x.data(), n); }, 10);
    r.parallel_ms = time_ms([&] { s_p = k::sum(x.data(), n); }, 10);
    r.identical = std::memcmp(&s_s, &s_p, sizeof(double)) == 0;
    all_identical &= r.identical;
    rows.push_back(r);

    Row r2{"sum_sq 4M", 0, 0, false};
    r2.serial_ms = time_ms([&] { s_s = k::serial::sum_sq(x.data(), n); }, 10);
    r2.parallel_ms = time_ms([&] { s_p = k::sum_sq(x.data(), n); }, 10);
    r2.identical = std::memcmp(&s_s, &s_p, sizeof(double)) == 0;
    all_identical &= r2.identical;
    rows.push_back(r2);
  }

  {
    const std::size_t rows_n = 4096, cols = 64;
    std::vector<double> x(rows_n * cols), p_s(rows_n * cols), p_p(rows_n * cols);
    for (auto& v : x) v = rng.uniform(-8, 8);
    Row r{"softmax 4096x64", 0, 0, false};
    r.serial_ms = time_ms([&] { k::serial::softmax_rows(p_s.data(), x.data(), rows_n, cols); }, 10);
    r.parallel_ms = time_ms([&] { k::softmax_rows(p_p.data(), x.data(), rows_n, cols); }, 10);
    r.identical = std::memcmp(p_s.data(), p_p.data(), p_s.size() * sizeof(double)) == 0;
    all_identical &= r.identical;
    rows.push_back(r);
  }

  {
    const std::size_t ra = 256, rb = 256, d = 64;
    std::vector<double> a(ra * d), b(rb * d);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    std::vector<k::PairTerm> pairs;
    for (std::size_t i = 0; i < ra; ++i)
      for (std::size_t j = 0; j < rb; ++j)
        pairs.push_back({static_cast<int>(i), static_cast<int>(j), (i + j) % 2 == 0});
    double s_s = 0, s_p = 0;
    Row r{"contrastive_sum 65k", 0, 0, false};
    r.serial_ms = time_ms(
        [&] { s_s = k::serial::contrastive_sum(a.data(), b.data(), d, pairs.data(), pairs.size(), 1.0); }, 5);
    r.parallel_ms = time_ms(
        [&] { s_p = k::contrastive_sum(a.data(), b.data(), d, pairs.data(), pairs.size(), 1.0); }, 5);
    r.identical = std::memcmp(&s_s, &s_p, sizeof(double)) == 0;
    all_identical &= r.identical;
    rows.push_back(r);

    std::vector<double> da_s(ra * d, 0.0), db_s(rb * d, 0.0), da_p(ra * d, 0.0), db_p(rb * d, 0.0);
    Row r2{"contrastive_grad 65k", 0, 0, false};
    r2.serial_ms = time_ms(
        [&] {
          std::fill(da_s.begin(), da_s.end(), 0.0);
          std::fill(db_s.begin(), db_s.end(), 0.0);
          k::serial::contrastive_grad(da_s.data(), db_s.data(), a.data(), b.data(), ra, rb, d,
                                      pairs.data(), pairs.size(), 1.0, 1.0);
        },
        5);
    r2.parallel_ms = time_ms(
        [&] {
          std::fill(da_p.begin(), da_p.end(), 0.0);
          std::fill(db_p.begin(), db_p.end(), 0.0);
          k::contrastive_grad(da_p.data(), db_p.data(), a.data(), b.data(), ra, rb, d,
                              pairs.data(), pairs.size(), 1.0, 1.0);
        },
        5);
    r2.identical = std::memcmp(da_s.data(), da_p.data(), da_s.size() * sizeof(double)) == 0 &&
                   std::memcmp(db_s.data(), db_p.data(), db_s.size() * sizeof(double)) == 0;
    all_identical &= r2.identical;
    rows.push_back(r2);
  }

  print_rows(rows);
  if (!all_identical) {
    std::printf("\nFAIL: parallel kernels diverged from serial reference\n");
    return 1;
  }
  std::printf("\nall parallel kernels bit-identical to serial reference\n");
  return 0;
}
