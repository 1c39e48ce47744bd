#include "cosca/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace cosca::data {

namespace {

void rotate_about_centroid(std::vector<double>& xy, std::size_t n, double degrees) {
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cx += xy[i * 2];
    cy += xy[i * 2 + 1];
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xy[i * 2] - cx, y = xy[i * 2 + 1] - cy;
    xy[i * 2] = cx + c * x - s * y;
    xy[i * 2 + 1] = cy + s * x + c * y;
  }
}

void draw_moons(Rng& rng, std::size_t n, double noise_sd, std::vector<double>& xy,
                std::vector<int>& labels) {
  xy.resize(n * 2);
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i % 2);
    const double t = rng.uniform(0.0, std::numbers::pi);
    double x, y;
    if (cls == 0) {
      x = std::cos(t);
      y = std::sin(t);
    } else {
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
    }
    xy[i * 2] = x + noise_sd * rng.normal();
    xy[i * 2 + 1] = y + noise_sd * rng.normal();
    labels[i] = cls;
  }
}

}  // namespace

DomainShiftData gen_two_moons_shift(std::size_t n_per_domain, double rotation_deg,
                                    double noise_sd, std::uint64_t seed) {
  if (n_per_domain < 4)
    throw std::invalid_argument("gen_two_moons_shift: need at least 4 samples per domain");
  if (noise_sd < 0.0)
    throw std::invalid_argument("gen_two_moons_shift: negative noise");

  DomainShiftData out;
  Rng rs(mix_seed(seed, 1)), rt(mix_seed(seed, 2));

  std::vector<double> xy;
  std::vector<int> labels;
  draw_moons(rs, n_per_domain, noise_sd, xy, labels);
  out.source.inputs = ad::Tensor::matrix(n_per_domain, 2, std::move(xy));
  out.source.labels = std::move(labels);
  out.source.domain_tag = DomainTag::source;
  out.source.num_classes = 2;

  std::vector<double> txy;
  draw_moons(rt, n_per_domain, noise_sd, txy, out.target_truth);
  rotate_about_centroid(txy, n_per_domain, rotation_deg);
  out.target.inputs = ad::Tensor::matrix(n_per_domain, 2, std::move(txy));
  out.target.domain_tag = DomainTag::target;
  out.target.num_classes = 2;
  return out;
}

DomainShiftData gen_gaussian_blobs_shift(int num_classes, std::size_t n_per_class,
                                         const std::vector<double>& mean_shift, double scale,
                                         std::uint64_t seed) {
  if (num_classes < 2)
    throw std::invalid_argument("gen_gaussian_blobs_shift: need at least 2 classes");
  if (n_per_class == 0)
    throw std::invalid_argument("gen_gaussian_blobs_shift: empty classes");
  if (mean_shift.size() != 2)
    throw std::invalid_argument("gen_gaussian_blobs_shift: mean_shift must be 2-d");
  if (!(scale > 0.0))
    throw std::invalid_argument("gen_gaussian_blobs_shift: scale must be positive");

  const double radius = 3.0, sd = 0.5;
  const std::size_t k = static_cast<std::size_t>(num_classes);
  const std::size_t n = k * n_per_class;
  std::vector<double> means(k * 2);
  for (std::size_t c = 0; c < k; ++c) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
    means[c * 2] = radius * std::cos(ang);
    means[c * 2 + 1] = radius * std::sin(ang);
  }

  DomainShiftData out;
  Rng rs(mix_seed(seed, 1)), rt(mix_seed(seed, 2));

  std::vector<double> sxy(n * 2), txy(n * 2);
  std::vector<int> slabels(n);
  out.target_truth.resize(n);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const std::size_t row = c * n_per_class + i;
      sxy[row * 2] = means[c * 2] + sd * rs.normal();
      sxy[row * 2 + 1] = means[c * 2 + 1] + sd * rs.normal();
      slabels[row] = static_cast<int>(c);
      txy[row * 2] = scale * (means[c * 2] + mean_shift[0] + sd * rt.normal());
      txy[row * 2 + 1] = scale * (means[c * 2 + 1] + mean_shift[1] + sd * rt.normal());
      out.target_truth[row] = static_cast<int>(c);
    }
  }
  out.source.inputs = ad::Tensor::matrix(n, 2, std::move(sxy));
  out.source.labels = std::move(slabels);
  out.source.domain_tag = DomainTag::source;
  out.source.num_classes = num_classes;
  out.target.inputs = ad::Tensor::matrix(n, 2, std::move(txy));
  out.target.domain_tag = DomainTag::target;
  out.target.num_classes = num_classes;
  return out;
}

StandardizationStats standardize(Dataset& source, Dataset& target) {
  if (source.size() == 0) throw std::invalid_argument("standardize: empty source");
  if (source.dim() != target.dim())
    throw std::invalid_argument("standardize: dimension mismatch between domains");
  if (source.standardized || target.standardized)
    throw std::logic_error("standardize: dataset already standardized");

  const std::size_t n = source.size(), d = source.dim();
  StandardizationStats stats;
  stats.mean.assign(d, 0.0);
  stats.sd.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) stats.mean[j] += source.inputs.at(i, j);
  for (std::size_t j = 0; j < d; ++j) stats.mean[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = source.inputs.at(i, j) - stats.mean[j];
      stats.sd[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) {
    stats.sd[j] = std::sqrt(stats.sd[j] / static_cast<double>(n));
    if (stats.sd[j] < 1e-8) stats.sd[j] = 1e-8;
  }
  apply_standardization(source, stats);
  apply_standardization(target, stats);
  return stats;
}

void apply_standardization(Dataset& ds, const StandardizationStats& stats) {
  if (ds.standardized) throw std::logic_error("apply_standardization: already standardized");
  if (stats.mean.size() != ds.dim())
    throw std::invalid_argument("apply_standardization: stats dimension mismatch");
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.dim(); ++j)
      ds.inputs.at(i, j) = (ds.inputs.at(i, j) - stats.mean[j]) / stats.sd[j];
  ds.standardized = true;
}

namespace {

ad::Tensor gather_batch(const Dataset& ds, const std::vector<std::size_t>& rows) {
  const std::size_t d = ds.dim();
  std::vector<double> out(rows.size() * d);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = ds.inputs.at(rows[r], j);
  return ad::Tensor::matrix(rows.size(), d, std::move(out));
}

}  // namespace

ClassAwareSampler::ClassAwareSampler(const Dataset& ds, std::size_t batch_size,
                                     std::uint64_t seed, std::size_t classes_per_batch)
    : ds_(&ds), batch_size_(batch_size), rng_(seed) {
  if (!ds.has_labels())
    throw std::invalid_argument("class-aware sampler: dataset has no labels");
  if (ds.num_classes < 1)
    throw std::invalid_argument("class-aware sampler: no classes");
  if (batch_size == 0 || batch_size > ds.size())
    throw std::invalid_argument("class-aware sampler: batch larger than dataset");
  const std::size_t k = static_cast<std::size_t>(ds.num_classes);
  classes_per_batch_ = classes_per_batch == 0 ? k : std::min(classes_per_batch, k);
  if (batch_size < classes_per_batch_)
    throw std::invalid_argument("class-aware sampler: batch smaller than classes per batch");

  pools_.resize(k);
  for (std::size_t i = 0; i < ds.size(); ++i)
    pools_[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  for (auto& pool : pools_) {
    if (pool.empty())
      throw std::invalid_argument("class-aware sampler: a class has no samples");
    rng_.shuffle(pool);
  }
  pool_pos_.assign(k, 0);
}

std::size_t ClassAwareSampler::draw_from_pool(std::size_t cls) {
  auto& pool = pools_[cls];
  auto& pos = pool_pos_[cls];
  if (pos == pool.size()) {
    rng_.shuffle(pool);
    pos = 0;
  }
  return pool[pos++];
}

LabeledBatch ClassAwareSampler::next() {
  const std::size_t k = pools_.size();
  std::vector<std::size_t> classes;
  if (classes_per_batch_ >= k) {
    for (std::size_t c = 0; c < k; ++c) classes.push_back(c);
  } else {
    std::vector<std::size_t> all(k);
    for (std::size_t c = 0; c < k; ++c) all[c] = c;
    for (std::size_t i = 0; i < classes_per_batch_; ++i) {
      const std::size_t j = i + rng_.below(k - i);
      std::swap(all[i], all[j]);
      classes.push_back(all[i]);
    }
  }
  const std::size_t c_count = classes.size();
  const std::size_t base = batch_size_ / c_count, rem = batch_size_ % c_count;

  std::vector<std::size_t> rows;
  rows.reserve(batch_size_);
  for (std::size_t ci = 0; ci < c_count; ++ci) {
    const std::size_t count = base + (ci < rem ? 1 : 0);
    for (std::size_t i = 0; i < count; ++i) rows.push_back(draw_from_pool(classes[ci]));
  }

  LabeledBatch batch;
  batch.inputs = gather_batch(*ds_, rows);
  batch.labels.reserve(rows.size());
  for (std::size_t r : rows) batch.labels.push_back(ds_->labels[r]);
  return batch;
}

UniformSampler::UniformSampler(const Dataset& ds, std::size_t batch_size, std::uint64_t seed)
    : ds_(&ds), batch_size_(batch_size), rng_(seed) {
  if (batch_size == 0 || batch_size > ds.size())
    throw std::invalid_argument("uniform sampler: batch larger than dataset");
  pool_.resize(ds.size());
  for (std::size_t i = 0; i < pool_.size(); ++i) pool_[i] = i;
  rng_.shuffle(pool_);
}

UnlabeledBatch UniformSampler::next() {
  std::vector<std::size_t> rows;
  rows.reserve(batch_size_);
  for (std::size_t i = 0; i < batch_size_; ++i) {
    if (pos_ == pool_.size()) {
      rng_.shuffle(pool_);
      pos_ = 0;
    }
    rows.push_back(pool_[pos_++]);
  }
  return UnlabeledBatch{gather_batch(*ds_, rows)};
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

[[noreturn]] void csv_error(const std::string& path, std::size_t line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& cell, const std::string& path, std::size_t line) {
  if (cell.empty()) csv_error(path, line, "empty cell");
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) csv_error(path, line, "malformed number: " + cell);
  return v;
}

int parse_label(const std::string& cell, const std::string& path, std::size_t line) {
  if (cell.empty()) csv_error(path, line, "empty label");
  char* end = nullptr;
  const long v = std::strtol(cell.c_str(), &end, 10);
  if (end != cell.c_str() + cell.size() || v < 0 || v > 1'000'000)
    csv_error(path, line, "malformed label: " + cell);
  return static_cast<int>(v);
}

void format_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open csv: " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ":1: missing header");
  auto header = split_line(line);
  bool labeled = false;
  std::size_t d = header.size();
  if (header.back() == "label") {
    labeled = true;
    d -= 1;
  }
  if (d == 0) csv_error(path, 1, "no feature columns");
  for (std::size_t j = 0; j < d; ++j)
    if (header[j] != "x" + std::to_string(j))
      csv_error(path, 1, "unexpected column name: " + header[j]);

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size())
      csv_error(path, line_no, "expected " + std::to_string(header.size()) + " columns, got " +
                                   std::to_string(cells.size()));
    for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(cells[j], path, line_no));
    if (labeled) labels.push_back(parse_label(cells[d], path, line_no));
  }
  if (values.empty()) csv_error(path, line_no, "no data rows");

  Dataset ds;
  const std::size_t n = values.size() / d;
  ds.inputs = ad::Tensor::matrix(n, d, std::move(values));
  ds.labels = std::move(labels);
  ds.domain_tag = labeled ? DomainTag::source : DomainTag::target;
  if (labeled) {
    int max_label = 0;
    for (int y : ds.labels) max_label = std::max(max_label, y);
    ds.num_classes = max_label + 1;
  }
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open csv for writing: " + path);
  std::string line;
  for (std::size_t j = 0; j < ds.dim(); ++j) {
    if (j) line += ',';
    line += "x" + std::to_string(j);
  }
  if (ds.has_labels()) line += ",label";
  f << line << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    line.clear();
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      if (j) line += ',';
      format_double(line, ds.inputs.at(i, j));
    }
    if (ds.has_labels()) {
      line += ',';
      line += std::to_string(ds.labels[i]);
    }
    f << line << '\n';
  }
  if (!f) throw std::runtime_error("csv write failed: " + path);
}

std::vector<int> load_labels_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open csv: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "label")
    throw std::runtime_error(path + ":1: expected a single 'label' header");
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    labels.push_back(parse_label(line, path, line_no));
  }
  return labels;
}

void save_labels_csv(const std::vector<int>& labels, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open csv for writing: " + path);
  f << "label\n";
  for (int y : labels) f << y << '\n';
  if (!f) throw std::runtime_error("csv write failed: " + path);
}

}  // namespace cosca::data
