#include "cosca/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace cosca::config {

namespace {

struct RawValue {
  std::string value;
  std::size_t line = 0;
};

using Section = std::map<std::string, RawValue>;

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& msg) {
  throw ConfigError(path + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::map<std::string, Section> scan(const std::string& text, const std::string& path) {
  std::map<std::string, Section> out;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail(path, line_no, "malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section != "dataset" && section != "train" && section != "output")
        fail(path, line_no, "unknown section [" + section + "]");
      out[section];
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) fail(path, line_no, "expected key = value");
    if (section.empty()) fail(path, line_no, "key outside any section");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) fail(path, line_no, "empty key");
    auto [it, inserted] = out[section].emplace(key, RawValue{trim(t.substr(eq + 1)), line_no});
    if (!inserted) fail(path, line_no, "duplicate key '" + key + "'");
  }
  return out;
}

// typed accessors over one scanned section; every fetched key is marked so
// leftovers can be reported as unknown
class KeyReader {
 public:
  KeyReader(const Section* sec, std::string path, std::string section)
      : sec_(sec), path_(std::move(path)), section_(std::move(section)) {}

  bool fetch(const std::string& key, std::string& out) {
    if (!sec_) return false;
    auto it = sec_->find(key);
    if (it == sec_->end()) return false;
    consumed_.insert(key);
    out = it->second.value;
    line_ = it->second.line;
    return true;
  }

  void get(const std::string& key, std::string& out) {
    std::string v;
    if (fetch(key, v)) out = v;
  }

  void get(const std::string& key, double& out) {
    std::string v;
    if (!fetch(key, v)) return;
    char* end = nullptr;
    const double parsed = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size())
      fail(path_, line_, "expected a number for '" + key + "', got '" + v + "'");
    out = parsed;
  }

  void get(const std::string& key, int& out) {
    std::string v;
    if (!fetch(key, v)) return;
    out = static_cast<int>(parse_ll(key, v));
  }

  // covers std::size_t and std::uint64_t, one type on this platform
  void get(const std::string& key, std::uint64_t& out) {
    std::string v;
    if (!fetch(key, v)) return;
    char* end = nullptr;
    const unsigned long long parsed = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || v[0] == '-')
      fail(path_, line_, "expected a nonnegative integer for '" + key + "', got '" + v + "'");
    out = parsed;
  }

  void get(const std::string& key, bool& out) {
    std::string v;
    if (!fetch(key, v)) return;
    if (v == "true" || v == "1")
      out = true;
    else if (v == "false" || v == "0")
      out = false;
    else
      fail(path_, line_, "expected true/false for '" + key + "', got '" + v + "'");
  }

  void get(const std::string& key, std::vector<std::size_t>& out) {
    std::string v;
    if (!fetch(key, v)) return;
    std::vector<std::size_t> widths;
    std::size_t start = 0;
    while (start <= v.size()) {
      std::size_t comma = v.find(',', start);
      if (comma == std::string::npos) comma = v.size();
      const std::string cell = trim(v.substr(start, comma - start));
      const long long parsed = parse_ll(key, cell);
      if (parsed <= 0) fail(path_, line_, "expected positive widths for '" + key + "'");
      widths.push_back(static_cast<std::size_t>(parsed));
      start = comma + 1;
    }
    out = std::move(widths);
  }

  // last fetched key's line, for custom messages
  std::size_t line() const { return line_; }
  const std::string& path() const { return path_; }

  void finish() const {
    if (!sec_) return;
    for (const auto& [key, raw] : *sec_)
      if (!consumed_.count(key))
        fail(path_, raw.line, "unknown key '" + key + "' in [" + section_ + "]");
  }

 private:
  long long parse_ll(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long long parsed = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size())
      fail(path_, line_, "expected an integer for '" + key + "', got '" + v + "'");
    return parsed;
  }

  const Section* sec_;
  std::string path_;
  std::string section_;
  std::size_t line_ = 0;
  std::set<std::string> consumed_;
};

const Section* find_section(const std::map<std::string, Section>& raw, const char* name) {
  auto it = raw.find(name);
  return it == raw.end() ? nullptr : &it->second;
}

void apply_dataset(KeyReader& r, DatasetSpec& spec) {
  std::string kind;
  if (r.fetch("kind", kind)) {
    if (kind == "moons")
      spec.kind = DatasetKind::moons;
    else if (kind == "blobs")
      spec.kind = DatasetKind::blobs;
    else if (kind == "csv")
      spec.kind = DatasetKind::csv;
    else
      fail(r.path(), r.line(), "unknown dataset kind '" + kind + "'");
  }
  switch (spec.kind) {
    case DatasetKind::moons:
      r.get("seed", spec.seed);
      r.get("n_per_domain", spec.n_per_domain);
      r.get("rotation_deg", spec.rotation_deg);
      r.get("noise_sd", spec.noise_sd);
      break;
    case DatasetKind::blobs:
      r.get("seed", spec.seed);
      r.get("num_classes", spec.num_classes);
      r.get("n_per_class", spec.n_per_class);
      r.get("shift_x", spec.shift_x);
      r.get("shift_y", spec.shift_y);
      r.get("scale", spec.scale);
      break;
    case DatasetKind::csv:
      r.get("source_csv", spec.source_csv);
      r.get("target_csv", spec.target_csv);
      r.get("target_truth_csv", spec.target_truth_csv);
      break;
  }
  r.finish();  // keys of the other kinds are unknown here on purpose
}

void apply_train(KeyReader& r, train::TrainConfig& cfg) {
  std::string variant;
  if (r.fetch("variant", variant)) {
    try {
      cfg.variant = train::variant_from_name(variant);
    } catch (const std::invalid_argument& e) {
      fail(r.path(), r.line(), e.what());
    }
  }
  r.get("lambda1", cfg.lambda1);
  r.get("lambda2", cfg.lambda2);
  r.get("lambda3", cfg.lambda3);
  r.get("theta", cfg.theta);
  r.get("tau", cfg.tau);
  r.get("delta", cfg.delta);
  r.get("margin", cfg.margin);
  r.get("max_epochs", cfg.max_epochs);
  r.get("iters_per_epoch", cfg.iters_per_epoch);
  r.get("batch_size_source", cfg.batch_size_source);
  r.get("batch_size_target", cfg.batch_size_target);
  r.get("g_hidden", cfg.g_hidden);
  r.get("feature_dim", cfg.feature_dim);
  r.get("f_hidden", cfg.f_hidden);
  r.get("tanh_hidden", cfg.tanh_hidden);
  r.get("seed", cfg.seed);
  r.get("pair_budget", cfg.pair_budget);
  r.get("conf_threshold", cfg.conf_threshold);
  r.get("reuse_batch", cfg.reuse_batch);

  std::string opt;
  if (r.fetch("optimizer", opt)) {
    models::OptKind kind;
    if (opt == "sgd")
      kind = models::OptKind::sgd;
    else if (opt == "sgd_momentum")
      kind = models::OptKind::sgd_momentum;
    else if (opt == "adam")
      kind = models::OptKind::adam;
    else
      fail(r.path(), r.line(), "unknown optimizer '" + opt + "'");
    cfg.opt_g.kind = kind;
    cfg.opt_f.kind = kind;
  }
  double lr = 0.0;
  std::string lr_raw;
  if (r.fetch("learning_rate", lr_raw)) {
    char* end = nullptr;
    lr = std::strtod(lr_raw.c_str(), &end);
    if (lr_raw.empty() || end != lr_raw.c_str() + lr_raw.size())
      fail(r.path(), r.line(), "expected a number for 'learning_rate'");
    cfg.opt_g.learning_rate = lr;
    cfg.opt_f.learning_rate = lr;
  }
  // per-group rates override the shared one regardless of file order
  r.get("lr_g", cfg.opt_g.learning_rate);
  r.get("lr_f", cfg.opt_f.learning_rate);
  double momentum = cfg.opt_g.momentum;
  r.get("momentum", momentum);
  cfg.opt_g.momentum = momentum;
  cfg.opt_f.momentum = momentum;
  double b1 = cfg.opt_g.beta1, b2 = cfg.opt_g.beta2, eps = cfg.opt_g.eps;
  r.get("adam_beta1", b1);
  r.get("adam_beta2", b2);
  r.get("adam_eps", eps);
  cfg.opt_g.beta1 = cfg.opt_f.beta1 = b1;
  cfg.opt_g.beta2 = cfg.opt_f.beta2 = b2;
  cfg.opt_g.eps = cfg.opt_f.eps = eps;

  std::string kernel;
  if (r.fetch("mmd_kernel", kernel)) {
    if (kernel == "normalized_mean_sq")
      cfg.mmd_kernel.kind = losses::MmdKernel::normalized_mean_sq;
    else if (kernel == "rbf_mean")
      cfg.mmd_kernel.kind = losses::MmdKernel::rbf_mean;
    else
      fail(r.path(), r.line(), "unknown mmd kernel '" + kernel + "'");
  }
  r.get("mmd_sigma", cfg.mmd_kernel.sigma);
  r.finish();
}

void apply_output(KeyReader& r, OutputConfig& cfg) {
  r.get("dir", cfg.dir);
  r.get("export_embeddings", cfg.export_embeddings);
  r.get("save_checkpoint", cfg.save_checkpoint);
  r.finish();
}

void fmt(std::string& out, const char* key, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
  out += buf;
}

void fmt(std::string& out, const char* key, const std::string& v) {
  out += key;
  out += " = ";
  out += v;
  out += '\n';
}

void fmt(std::string& out, const char* key, bool v) {
  fmt(out, key, std::string(v ? "true" : "false"));
}

template <class Int>
void fmt_int(std::string& out, const char* key, Int v) {
  fmt(out, key, std::to_string(v));
}

std::string join_widths(const std::vector<std::size_t>& widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(widths[i]);
  }
  return out;
}

}  // namespace

const char* dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::moons: return "moons";
    case DatasetKind::blobs: return "blobs";
    case DatasetKind::csv: return "csv";
  }
  throw std::logic_error("dataset_kind_name: bad enum value");
}

ExperimentConfig parse_config(const std::string& text, const std::string& path) {
  const auto raw = scan(text, path);
  ExperimentConfig cfg;
  {
    KeyReader r(find_section(raw, "dataset"), path, "dataset");
    apply_dataset(r, cfg.dataset);
  }
  {
    KeyReader r(find_section(raw, "train"), path, "train");
    apply_train(r, cfg.train);
  }
  {
    KeyReader r(find_section(raw, "output"), path, "output");
    apply_output(r, cfg.output);
  }
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str(), path);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  out += "[dataset]\n";
  fmt(out, "kind", std::string(dataset_kind_name(cfg.dataset.kind)));
  switch (cfg.dataset.kind) {
    case DatasetKind::moons:
      fmt_int(out, "seed", cfg.dataset.seed);
      fmt_int(out, "n_per_domain", cfg.dataset.n_per_domain);
      fmt(out, "rotation_deg", cfg.dataset.rotation_deg);
      fmt(out, "noise_sd", cfg.dataset.noise_sd);
      break;
    case DatasetKind::blobs:
      fmt_int(out, "seed", cfg.dataset.seed);
      fmt_int(out, "num_classes", cfg.dataset.num_classes);
      fmt_int(out, "n_per_class", cfg.dataset.n_per_class);
      fmt(out, "shift_x", cfg.dataset.shift_x);
      fmt(out, "shift_y", cfg.dataset.shift_y);
      fmt(out, "scale", cfg.dataset.scale);
      break;
    case DatasetKind::csv:
      fmt(out, "source_csv", cfg.dataset.source_csv);
      fmt(out, "target_csv", cfg.dataset.target_csv);
      if (!cfg.dataset.target_truth_csv.empty())
        fmt(out, "target_truth_csv", cfg.dataset.target_truth_csv);
      break;
  }

  const auto& t = cfg.train;
  out += "\n[train]\n";
  fmt(out, "variant", std::string(train::variant_name(t.variant)));
  fmt(out, "lambda1", t.lambda1);
  fmt(out, "lambda2", t.lambda2);
  fmt(out, "lambda3", t.lambda3);
  fmt(out, "theta", t.theta);
  fmt_int(out, "tau", t.tau);
  fmt_int(out, "delta", t.delta);
  fmt(out, "margin", t.margin);
  fmt_int(out, "max_epochs", t.max_epochs);
  fmt_int(out, "iters_per_epoch", t.iters_per_epoch);
  fmt_int(out, "batch_size_source", t.batch_size_source);
  fmt_int(out, "batch_size_target", t.batch_size_target);
  fmt(out, "g_hidden", join_widths(t.g_hidden));
  fmt_int(out, "feature_dim", t.feature_dim);
  fmt(out, "f_hidden", join_widths(t.f_hidden));
  fmt(out, "tanh_hidden", t.tanh_hidden);
  const char* opt = t.opt_g.kind == models::OptKind::sgd              ? "sgd"
                    : t.opt_g.kind == models::OptKind::sgd_momentum   ? "sgd_momentum"
                                                                      : "adam";
  fmt(out, "optimizer", std::string(opt));
  fmt(out, "lr_g", t.opt_g.learning_rate);
  fmt(out, "lr_f", t.opt_f.learning_rate);
  fmt(out, "momentum", t.opt_g.momentum);
  fmt(out, "adam_beta1", t.opt_g.beta1);
  fmt(out, "adam_beta2", t.opt_g.beta2);
  fmt(out, "adam_eps", t.opt_g.eps);
  fmt_int(out, "seed", t.seed);
  fmt_int(out, "pair_budget", t.pair_budget);
  fmt(out, "conf_threshold", t.conf_threshold);
  fmt(out, "reuse_batch", t.reuse_batch);
  fmt(out, "mmd_kernel",
      std::string(t.mmd_kernel.kind == losses::MmdKernel::rbf_mean ? "rbf_mean"
                                                                   : "normalized_mean_sq"));
  fmt(out, "mmd_sigma", t.mmd_kernel.sigma);

  out += "\n[output]\n";
  fmt(out, "dir", cfg.output.dir);
  fmt(out, "export_embeddings", cfg.output.export_embeddings);
  fmt(out, "save_checkpoint", cfg.output.save_checkpoint);
  return out;
}

data::DomainShiftData build_dataset(const DatasetSpec& spec) {
  switch (spec.kind) {
    case DatasetKind::moons:
      return data::gen_two_moons_shift(spec.n_per_domain, spec.rotation_deg, spec.noise_sd,
                                       spec.seed);
    case DatasetKind::blobs:
      return data::gen_gaussian_blobs_shift(spec.num_classes, spec.n_per_class,
                                            {spec.shift_x, spec.shift_y}, spec.scale, spec.seed);
    case DatasetKind::csv: {
      if (spec.source_csv.empty() || spec.target_csv.empty())
        throw ConfigError("csv dataset needs source_csv and target_csv");
      data::DomainShiftData out;
      out.source = data::load_csv(spec.source_csv);
      if (!out.source.has_labels())
        throw ConfigError(spec.source_csv + ": source csv must carry a label column");
      out.target = data::load_csv(spec.target_csv);
      if (out.target.has_labels())
        throw ConfigError(spec.target_csv + ": target csv must not carry a label column");
      out.target.num_classes = out.source.num_classes;
      if (!spec.target_truth_csv.empty()) {
        out.target_truth = data::load_labels_csv(spec.target_truth_csv);
        if (out.target_truth.size() != out.target.size())
          throw ConfigError(spec.target_truth_csv + ": truth size does not match target csv");
      }
      return out;
    }
  }
  throw std::logic_error("build_dataset: bad enum value");
}

}  // namespace cosca::config
