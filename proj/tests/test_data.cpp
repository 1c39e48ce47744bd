#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <string>

#include "cosca/data.hpp"

using namespace cosca;
using namespace cosca::data;

namespace {

std::string temp_path(const char* name) {
  return std::string("/tmp/cosca_test_") + name;
}

}  // namespace

TEST_CASE("two moons generation is deterministic per seed") {
  auto a = gen_two_moons_shift(64, 35.0, 0.1, 7);
  auto b = gen_two_moons_shift(64, 35.0, 0.1, 7);
  CHECK(std::memcmp(a.source.inputs.data.data(), b.source.inputs.data.data(),
                    a.source.inputs.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.target.inputs.data.data(), b.target.inputs.data.data(),
                    a.target.inputs.size() * sizeof(double)) == 0);
  CHECK(a.source.labels == b.source.labels);
  CHECK(a.target_truth == b.target_truth);

  auto c = gen_two_moons_shift(64, 35.0, 0.1, 8);
  CHECK(std::memcmp(a.source.inputs.data.data(), c.source.inputs.data.data(),
                    a.source.inputs.size() * sizeof(double)) != 0);
}

TEST_CASE("two moons shapes and tags") {
  auto d = gen_two_moons_shift(100, 35.0, 0.1, 3);
  CHECK(d.source.size() == 100);
  CHECK(d.source.dim() == 2);
  CHECK(d.source.has_labels());
  CHECK(d.source.domain_tag == DomainTag::source);
  CHECK(d.source.num_classes == 2);
  CHECK(d.target.size() == 100);
  CHECK_FALSE(d.target.has_labels());
  CHECK(d.target.domain_tag == DomainTag::target);
  CHECK(d.target_truth.size() == 100);
  for (int y : d.target_truth) CHECK((y == 0 || y == 1));
  CHECK(d.source.labels[0] == 0);
  CHECK(d.source.labels[1] == 1);
  CHECK_THROWS_AS(gen_two_moons_shift(3, 35.0, 0.1, 3), std::invalid_argument);
  CHECK_THROWS_AS(gen_two_moons_shift(100, 35.0, -0.5, 3), std::invalid_argument);
}

TEST_CASE("full-turn rotation matches no rotation") {
  auto zero = gen_two_moons_shift(50, 0.0, 0.05, 11);
  auto full = gen_two_moons_shift(50, 360.0, 0.05, 11);
  for (std::size_t i = 0; i < zero.target.inputs.size(); ++i)
    CHECK(zero.target.inputs.data[i] == doctest::Approx(full.target.inputs.data[i]).epsilon(1e-9));
}

TEST_CASE("rotation moves the target cloud") {
  auto flat = gen_two_moons_shift(200, 0.0, 0.05, 11);
  auto tilted = gen_two_moons_shift(200, 35.0, 0.05, 11);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < flat.target.inputs.size(); ++i)
    max_diff = std::max(max_diff,
                        std::abs(flat.target.inputs.data[i] - tilted.target.inputs.data[i]));
  CHECK(max_diff > 0.1);
  // rotation preserves the centroid
  double cx0 = 0, cy0 = 0, cx1 = 0, cy1 = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    cx0 += flat.target.inputs.at(i, 0);
    cy0 += flat.target.inputs.at(i, 1);
    cx1 += tilted.target.inputs.at(i, 0);
    cy1 += tilted.target.inputs.at(i, 1);
  }
  CHECK(cx0 / 200 == doctest::Approx(cx1 / 200).epsilon(1e-9));
  CHECK(cy0 / 200 == doctest::Approx(cy1 / 200).epsilon(1e-9));
}

TEST_CASE("gaussian blobs shapes and shift") {
  auto d = gen_gaussian_blobs_shift(3, 40, {1.0, -0.5}, 1.2, 5);
  CHECK(d.source.size() == 120);
  CHECK(d.source.num_classes == 3);
  CHECK(d.target.size() == 120);
  CHECK(d.target_truth.size() == 120);
  for (std::size_t i = 0; i < 40; ++i) CHECK(d.source.labels[i] == 0);
  for (std::size_t i = 80; i < 120; ++i) CHECK(d.source.labels[i] == 2);

  CHECK_THROWS_AS(gen_gaussian_blobs_shift(1, 40, {1.0, -0.5}, 1.2, 5), std::invalid_argument);
  CHECK_THROWS_AS(gen_gaussian_blobs_shift(3, 0, {1.0, -0.5}, 1.2, 5), std::invalid_argument);
  CHECK_THROWS_AS(gen_gaussian_blobs_shift(3, 40, {1.0}, 1.2, 5), std::invalid_argument);
  CHECK_THROWS_AS(gen_gaussian_blobs_shift(3, 40, {1.0, -0.5}, 0.0, 5), std::invalid_argument);
}

TEST_CASE("blob classes sit near their shifted means") {
  auto d = gen_gaussian_blobs_shift(2, 500, {2.0, 0.0}, 1.0, 9);
  // class 0 source mean should be near (3, 0), target near (5, 0)
  double sx = 0, tx = 0;
  for (std::size_t i = 0; i < 500; ++i) {
    sx += d.source.inputs.at(i, 0);
    tx += d.target.inputs.at(i, 0);
  }
  CHECK(sx / 500 == doctest::Approx(3.0).epsilon(0.05));
  CHECK(tx / 500 == doctest::Approx(5.0).epsilon(0.05));
}

TEST_CASE("standardization zeroes source mean and unit-scales sd") {
  auto d = gen_two_moons_shift(300, 35.0, 0.1, 21);
  auto stats = standardize(d.source, d.target);
  CHECK(stats.mean.size() == 2);
  CHECK(d.source.standardized);
  CHECK(d.target.standardized);
  for (std::size_t j = 0; j < 2; ++j) {
    double m = 0;
    for (std::size_t i = 0; i < d.source.size(); ++i) m += d.source.inputs.at(i, j);
    m /= static_cast<double>(d.source.size());
    CHECK(std::abs(m) < 1e-9);
    double v = 0;
    for (std::size_t i = 0; i < d.source.size(); ++i) {
      const double c = d.source.inputs.at(i, j) - m;
      v += c * c;
    }
    CHECK(std::sqrt(v / static_cast<double>(d.source.size())) == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK_THROWS_AS(standardize(d.source, d.target), std::logic_error);
}

TEST_CASE("constant features survive standardization") {
  Dataset s, t;
  s.inputs = ad::Tensor::matrix(3, 2, {1.0, 5.0, 1.0, 6.0, 1.0, 7.0});
  s.labels = {0, 1, 0};
  s.num_classes = 2;
  t.inputs = ad::Tensor::matrix(2, 2, {1.0, 5.5, 1.0, 6.5});
  t.domain_tag = DomainTag::target;
  auto stats = standardize(s, t);
  CHECK(stats.sd[0] == 1e-8);
  CHECK(s.inputs.all_finite());
  CHECK(t.inputs.all_finite());
}

TEST_CASE("class-aware sampler balances a two-class batch") {
  auto d = gen_two_moons_shift(100, 0.0, 0.1, 2);
  ClassAwareSampler sampler(d.source, 8, 42);
  for (int rep = 0; rep < 5; ++rep) {
    auto b = sampler.next();
    CHECK(b.labels.size() == 8);
    CHECK(b.inputs.rows() == 8);
    int c0 = 0;
    for (int y : b.labels) c0 += y == 0 ? 1 : 0;
    CHECK(c0 == 4);
  }
}

TEST_CASE("odd batch sizes spread the remainder over leading classes") {
  auto d = gen_gaussian_blobs_shift(3, 30, {0.0, 0.0}, 1.0, 2);
  ClassAwareSampler sampler(d.source, 7, 1);
  auto b = sampler.next();
  int counts[3] = {0, 0, 0};
  for (int y : b.labels) counts[y]++;
  CHECK(counts[0] == 3);
  CHECK(counts[1] == 2);
  CHECK(counts[2] == 2);
}

TEST_CASE("class-aware sampler covers every sample across an epoch") {
  auto d = gen_two_moons_shift(64, 0.0, 0.1, 4);
  ClassAwareSampler sampler(d.source, 16, 3);
  // 64 samples, 16 per batch, balanced classes: 4 batches exhaust both pools
  std::multiset<double> seen;
  for (int rep = 0; rep < 4; ++rep) {
    auto b = sampler.next();
    for (std::size_t i = 0; i < 16; ++i) seen.insert(b.inputs.at(i, 0));
  }
  std::multiset<double> expect;
  for (std::size_t i = 0; i < 64; ++i) expect.insert(d.source.inputs.at(i, 0));
  CHECK(seen == expect);
}

TEST_CASE("samplers are deterministic per seed") {
  auto d = gen_two_moons_shift(64, 0.0, 0.1, 4);
  ClassAwareSampler s1(d.source, 10, 99), s2(d.source, 10, 99);
  for (int rep = 0; rep < 3; ++rep) {
    auto a = s1.next(), b = s2.next();
    CHECK(a.labels == b.labels);
    CHECK(a.inputs.data == b.inputs.data);
  }
  UniformSampler u1(d.target, 10, 7), u2(d.target, 10, 7);
  for (int rep = 0; rep < 3; ++rep) CHECK(u1.next().inputs.data == u2.next().inputs.data);
}

TEST_CASE("uniform sampler reshuffles mid-batch without repeats inside an epoch") {
  auto d = gen_two_moons_shift(10, 0.0, 0.1, 4);
  UniformSampler sampler(d.target, 4, 5);
  std::multiset<double> seen;
  // first 2 full batches + first 2 rows of the third cover the pool exactly once
  auto b1 = sampler.next(), b2 = sampler.next(), b3 = sampler.next();
  for (std::size_t i = 0; i < 4; ++i) seen.insert(b1.inputs.at(i, 0));
  for (std::size_t i = 0; i < 4; ++i) seen.insert(b2.inputs.at(i, 0));
  for (std::size_t i = 0; i < 2; ++i) seen.insert(b3.inputs.at(i, 0));
  std::multiset<double> expect;
  for (std::size_t i = 0; i < 10; ++i) expect.insert(d.target.inputs.at(i, 0));
  CHECK(seen == expect);
}

TEST_CASE("sampler construction validates sizes and labels") {
  auto d = gen_two_moons_shift(20, 0.0, 0.1, 4);
  CHECK_THROWS_AS(ClassAwareSampler(d.source, 21, 1), std::invalid_argument);
  CHECK_THROWS_AS(ClassAwareSampler(d.source, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(ClassAwareSampler(d.target, 8, 1), std::invalid_argument);
  CHECK_THROWS_AS(ClassAwareSampler(d.source, 1, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(UniformSampler(d.target, 21, 1), std::invalid_argument);
}

TEST_CASE("subset of classes per batch still balances") {
  auto d = gen_gaussian_blobs_shift(4, 25, {0.0, 0.0}, 1.0, 6);
  ClassAwareSampler sampler(d.source, 10, 13, 2);
  for (int rep = 0; rep < 6; ++rep) {
    auto b = sampler.next();
    std::set<int> classes(b.labels.begin(), b.labels.end());
    CHECK(classes.size() == 2);
    for (int c : classes) {
      int count = 0;
      for (int y : b.labels) count += y == c ? 1 : 0;
      CHECK(count == 5);
    }
  }
}

TEST_CASE("labeled csv round-trips bit-exactly") {
  auto d = gen_two_moons_shift(30, 35.0, 0.1, 17);
  const auto path = temp_path("roundtrip.csv");
  save_csv(d.source, path);
  auto back = load_csv(path);
  CHECK(back.size() == 30);
  CHECK(back.dim() == 2);
  CHECK(back.domain_tag == DomainTag::source);
  CHECK(back.num_classes == 2);
  CHECK(back.labels == d.source.labels);
  CHECK(std::memcmp(back.inputs.data.data(), d.source.inputs.data.data(),
                    back.inputs.size() * sizeof(double)) == 0);
  std::remove(path.c_str());
}

TEST_CASE("unlabeled csv loads as target domain") {
  auto d = gen_two_moons_shift(12, 35.0, 0.1, 17);
  const auto path = temp_path("unlabeled.csv");
  save_csv(d.target, path);
  auto back = load_csv(path);
  CHECK(back.domain_tag == DomainTag::target);
  CHECK_FALSE(back.has_labels());
  CHECK(std::memcmp(back.inputs.data.data(), d.target.inputs.data.data(),
                    back.inputs.size() * sizeof(double)) == 0);
  std::remove(path.c_str());
}

TEST_CASE("csv errors name the file and line") {
  const auto path = temp_path("bad.csv");
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x0,x1,label\n0.5,1.5,0\n0.25,oops,1\n", f);
    std::fclose(f);
  }
  try {
    load_csv(path);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find(path) != std::string::npos);
    CHECK(msg.find(":3:") != std::string::npos);
  }
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x0,x1,label\n0.5,1.5,1.5\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_csv(path), std::runtime_error);
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x0,x1,label\n0.5,1.5\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_csv(path), std::runtime_error);
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x0,banana\n0.5,1.5\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_csv(path), std::runtime_error);
  CHECK_THROWS_AS(load_csv(temp_path("does_not_exist.csv")), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("label csv round-trips") {
  const auto path = temp_path("labels.csv");
  std::vector<int> labels = {0, 1, 1, 0, 2};
  save_labels_csv(labels, path);
  CHECK(load_labels_csv(path) == labels);
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("wrong\n0\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_labels_csv(path), std::runtime_error);
  std::remove(path.c_str());
}
