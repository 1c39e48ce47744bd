#include "cosca/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "cosca/losses.hpp"

namespace cosca::report {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

json iter_json(const train::IterRecord& r) {
  json j;
  j["type"] = "iter";
  j["iter"] = r.iter;
  j["loss_ce"] = r.loss_ce;
  j["loss_mmd"] = r.loss_mmd;
  j["loss_adv"] = r.loss_adv;
  j["loss_contras"] = r.loss_contras;
  j["omega"] = r.omega;
  return j;
}

json epoch_json(const train::EpochRecord& e) {
  json j;
  j["type"] = "epoch";
  j["epoch"] = e.epoch;
  j["source_acc"] = e.source_acc;
  j["target_acc"] = e.target_acc;
  j["pseudo_label_acc"] = e.pseudo_label_acc;
  return j;
}

void format_g(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

void write_metrics_jsonl(const std::string& path, const train::RunRecord& rec,
                         int iters_per_epoch) {
  if (iters_per_epoch < 1) throw std::invalid_argument("metrics: iters_per_epoch must be positive");
  if (rec.iters.size() != rec.epochs.size() * static_cast<std::size_t>(iters_per_epoch))
    throw std::invalid_argument("metrics: record sizes are inconsistent");
  auto f = open_out(path);
  std::size_t it = 0;
  for (const auto& e : rec.epochs) {
    for (int k = 0; k < iters_per_epoch; ++k) f << iter_json(rec.iters[it++]).dump() << '\n';
    f << epoch_json(e).dump() << '\n';
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

void write_final_json(const std::string& path, const FinalSummary& s) {
  json j;
  j["variant"] = s.variant;
  j["seed"] = s.seed;
  j["loss_ce"] = s.last_iter.loss_ce;
  j["loss_mmd"] = s.last_iter.loss_mmd;
  j["loss_adv"] = s.last_iter.loss_adv;
  j["loss_contras"] = s.last_iter.loss_contras;
  j["omega"] = s.last_iter.omega;
  j["source_acc"] = s.last_epoch.source_acc;
  j["target_acc"] = s.last_epoch.target_acc;
  j["pseudo_label_acc"] = s.last_epoch.pseudo_label_acc;
  j["accuracy_f1"] = s.target_eval.accuracy_f1;
  j["accuracy_f2"] = s.target_eval.accuracy_f2;
  j["accuracy_ensemble"] = s.target_eval.accuracy_ensemble;
  auto f = open_out(path);
  f << j.dump(2) << '\n';
  if (!f) throw std::runtime_error("write failed: " + path);
}

namespace {

// cyclic jacobi eigendecomposition of a symmetric matrix, ascending is not
// guaranteed so callers sort by eigenvalue
void jacobi_eigen(std::vector<double>& a, std::vector<double>& v, std::size_t d) {
  v.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
    if (off < 1e-22) return;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < d; ++i) {
          const double aip = a[i * d + p], aiq = a[i * d + q];
          a[i * d + p] = c * aip - s * aiq;
          a[i * d + q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double api = a[p * d + i], aqi = a[q * d + i];
          a[p * d + i] = c * api - s * aqi;
          a[q * d + i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double vip = v[i * d + p], viq = v[i * d + q];
          v[i * d + p] = c * vip - s * viq;
          v[i * d + q] = s * vip + c * viq;
        }
      }
    }
  }
}

void fix_sign(std::vector<double>& axis) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < axis.size(); ++i)
    if (std::abs(axis[i]) > std::abs(axis[best])) best = i;
  if (axis[best] < 0.0)
    for (double& x : axis) x = -x;
}

}  // namespace

Pca2 pca2(const ad::Tensor& features) {
  if (features.rank() != 2) throw std::invalid_argument("pca2: features must be rank 2");
  const std::size_t n = features.rows(), d = features.cols();
  if (n == 0 || d < 2) throw std::invalid_argument("pca2: need rows and at least 2 columns");

  Pca2 out;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += features.at(i, j);
  for (std::size_t j = 0; j < d; ++j) out.mean[j] /= static_cast<double>(n);

  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < d; ++p) {
      const double cp = features.at(i, p) - out.mean[p];
      for (std::size_t q = p; q < d; ++q)
        cov[p * d + q] += cp * (features.at(i, q) - out.mean[q]);
    }
  for (std::size_t p = 0; p < d; ++p)
    for (std::size_t q = p; q < d; ++q) {
      cov[p * d + q] /= static_cast<double>(n);
      cov[q * d + p] = cov[p * d + q];
    }

  std::vector<double> evecs;
  jacobi_eigen(cov, evecs, d);
  std::vector<std::size_t> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cov[a * d + a] > cov[b * d + b]; });

  out.axis0.resize(d);
  out.axis1.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    out.axis0[i] = evecs[i * d + order[0]];
    out.axis1[i] = evecs[i * d + order[1]];
  }
  fix_sign(out.axis0);
  fix_sign(out.axis1);

  out.projected.resize(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    double p0 = 0.0, p1 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = features.at(i, j) - out.mean[j];
      p0 += c * out.axis0[j];
      p1 += c * out.axis1[j];
    }
    out.projected[i * 2] = p0;
    out.projected[i * 2 + 1] = p1;
  }
  return out;
}

void write_embeddings_csv(const std::string& path, const models::ModelTriple& model,
                          const data::Dataset& source, const data::Dataset& target,
                          const std::vector<int>& target_truth) {
  if (!target_truth.empty() && target_truth.size() != target.size())
    throw std::invalid_argument("embeddings: truth size does not match target");

  auto sf = models::forward_features(model.g, source.inputs);
  auto tf = models::forward_features(model.g, target.inputs);
  auto s_pseudo = losses::pseudo_label(losses::prob_pair(models::forward_logits(model.f1, sf),
                                                         models::forward_logits(model.f2, sf)));
  auto t_pseudo = losses::pseudo_label(losses::prob_pair(models::forward_logits(model.f1, tf),
                                                         models::forward_logits(model.f2, tf)));

  const std::size_t ns = source.size(), nt = target.size(), d = sf.cols();
  std::vector<double> stacked(sf.data);
  stacked.insert(stacked.end(), tf.data.begin(), tf.data.end());
  const auto pca = pca2(ad::Tensor::matrix(ns + nt, d, std::move(stacked)));

  auto f = open_out(path);
  std::string line = "domain,true_label,pseudo_label";
  for (std::size_t j = 0; j < d; ++j) line += ",feature_" + std::to_string(j);
  line += ",pca_0,pca_1";
  f << line << '\n';

  auto write_row = [&](const char* domain, int truth, int pseudo, const ad::Tensor& feats,
                       std::size_t row, std::size_t pca_row) {
    line.clear();
    line += domain;
    line += ',';
    line += std::to_string(truth);
    line += ',';
    line += std::to_string(pseudo);
    for (std::size_t j = 0; j < d; ++j) {
      line += ',';
      format_g(line, feats.at(row, j));
    }
    line += ',';
    format_g(line, pca.projected[pca_row * 2]);
    line += ',';
    format_g(line, pca.projected[pca_row * 2 + 1]);
    f << line << '\n';
  };

  for (std::size_t i = 0; i < ns; ++i)
    write_row("source", source.labels[i], s_pseudo.labels[i], sf, i, i);
  for (std::size_t i = 0; i < nt; ++i)
    write_row("target", target_truth.empty() ? -1 : target_truth[i], t_pseudo.labels[i], tf, i,
              ns + i);
  if (!f) throw std::runtime_error("write failed: " + path);
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqr(std::vector<double> v) {
  if (v.size() < 2) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const std::vector<double> lower(v.begin(), v.begin() + n / 2);
  const std::vector<double> upper(v.begin() + (n + 1) / 2, v.end());
  return median(upper) - median(lower);
}

std::string ablation_summary(const std::vector<AblationCell>& cells) {
  // per-variant spread over the cells that finished, in first-seen order
  std::vector<std::string> seen;
  std::map<std::string, std::vector<double>> by_variant;
  for (const auto& c : cells) {
    if (c.failed) continue;
    if (!by_variant.count(c.variant)) seen.push_back(c.variant);
    by_variant[c.variant].push_back(c.eval.accuracy_ensemble);
  }
  std::string out;
  for (const auto& name : seen) {
    const auto& accs = by_variant[name];
    out += "# ";
    out += name;
    out += " median=";
    format_g(out, median(accs));
    out += " iqr=";
    format_g(out, iqr(accs));
    out += " n=" + std::to_string(accs.size());
    out += '\n';
  }
  return out;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationCell>& cells) {
  auto f = open_out(path);
  f << "variant,seed,accuracy_ensemble,accuracy_f1,accuracy_f2,status\n";
  std::string line;
  for (const auto& c : cells) {
    line.clear();
    line += c.variant;
    line += ',';
    line += std::to_string(c.seed);
    line += ',';
    format_g(line, c.eval.accuracy_ensemble);
    line += ',';
    format_g(line, c.eval.accuracy_f1);
    line += ',';
    format_g(line, c.eval.accuracy_f2);
    line += c.failed ? ",failed" : ",ok";
    f << line << '\n';
  }
  f << ablation_summary(cells);
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace cosca::report
