#include "debias/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "debias/errors.hpp"

namespace debias {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, out);
  return r.ec == std::errc() && r.ptr == end;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

template <typename T>
std::string join_numbers(const std::vector<T>& values) {
  std::vector<std::string> items;
  for (const T& v : values) {
    if constexpr (std::is_floating_point_v<T>) {
      items.push_back(format_double(v));
    } else {
      items.push_back(std::to_string(v));
    }
  }
  return join(items);
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text, std::string source) {
  ConfigFile cfg;
  cfg.source_ = std::move(source);
  std::string section = "experiment";
  std::size_t line_no = 0;
  std::size_t order = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto at = [&] { return cfg.source_ + " line " + std::to_string(line_no) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(at() + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(at() + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(at() + "missing key");
    if (value.empty()) throw ConfigError(at() + "empty value for '" + key + "'");
    const std::string full = key.find('.') == std::string::npos ? section + "." + key : key;
    if (cfg.entries_.count(full)) throw ConfigError(at() + "duplicate field '" + full + "'");
    cfg.entries_[full] = Entry{value, line_no, order++};
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

std::optional<std::string> ConfigFile::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  used_[key] = true;
  return it->second.value;
}

void ConfigFile::set(const std::string& key, std::string value) {
  const auto it = entries_.find(key);
  if (it != entries_.end()) {
    it->second.value = std::move(value);
  } else {
    entries_[key] = Entry{std::move(value), 0, entries_.size()};
  }
}

std::string ConfigFile::where(const std::string& key) const {
  const auto it = entries_.find(key);
  std::string out = source_;
  if (it != entries_.end() && it->second.line) out += " line " + std::to_string(it->second.line);
  return out + ", field '" + key + "'";
}

std::optional<double> ConfigFile::get_double(const std::string& key) const {
  const auto v = get(key);
  if (!v) return std::nullopt;
  double out = 0.0;
  if (!parse_number(*v, out)) throw ConfigError(where(key) + ": not a number: '" + *v + "'");
  return out;
}

std::optional<long long> ConfigFile::get_int(const std::string& key) const {
  const auto v = get(key);
  if (!v) return std::nullopt;
  long long out = 0;
  if (!parse_number(*v, out)) throw ConfigError(where(key) + ": not an integer: '" + *v + "'");
  return out;
}

std::optional<bool> ConfigFile::get_bool(const std::string& key) const {
  const auto v = get(key);
  if (!v) return std::nullopt;
  if (*v == "true" || *v == "yes" || *v == "1") return true;
  if (*v == "false" || *v == "no" || *v == "0") return false;
  throw ConfigError(where(key) + ": expected true or false, got '" + *v + "'");
}

std::optional<std::vector<double>> ConfigFile::get_doubles(const std::string& key) const {
  const auto v = get(key);
  if (!v) return std::nullopt;
  std::vector<double> out;
  for (const std::string& item : split_list(*v)) {
    double d = 0.0;
    if (!parse_number(item, d)) throw ConfigError(where(key) + ": not a number: '" + item + "'");
    out.push_back(d);
  }
  if (out.empty()) throw ConfigError(where(key) + ": empty list");
  return out;
}

std::optional<std::vector<std::string>> ConfigFile::get_strings(const std::string& key) const {
  const auto v = get(key);
  if (!v) return std::nullopt;
  return split_list(*v);
}

std::vector<std::string> ConfigFile::unused_keys() const {
  std::vector<std::pair<std::size_t, std::string>> keys;
  for (const auto& [key, entry] : entries_) {
    if (!used_.count(key)) keys.emplace_back(entry.order, key);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<std::string> out;
  for (auto& k : keys) out.push_back(std::move(k.second));
  return out;
}

ExperimentConfig experiment_from_config(const ConfigFile& f, bool sweep) {
  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;

  if (auto v = f.get("experiment.name")) cfg.name = *v;
  if (auto v = f.get("experiment.mode")) {
    const auto mode = parse_train_mode(*v);
    if (!mode) throw ConfigError("field 'experiment.mode': unknown mode '" + *v + "'");
    t.mode = *mode;
  }
  const bool dfl = detector_mode(t.mode).has_value();
  if (auto v = f.get_double("experiment.gamma")) {
    t.gamma = *v;
  } else if (dfl && !sweep) {
    throw ConfigError("missing field 'experiment.gamma' (required for mode " +
                      std::string(to_string(t.mode)) + ")");
  }
  if (auto v = f.get_double("experiment.temperature")) t.temperature = *v;
  if (auto v = f.get_int("experiment.seed")) t.seed = static_cast<std::uint64_t>(*v);
  if (auto v = f.get_int("experiment.epochs")) t.epochs = static_cast<int>(*v);
  if (auto v = f.get_int("experiment.batch_size")) t.batch_size = static_cast<std::size_t>(*v);
  if (auto v = f.get_double("experiment.main_lr")) t.main_lr = *v;
  if (auto v = f.get_double("experiment.detector_lr")) t.detector_lr = *v;
  if (auto v = f.get_double("experiment.weight_decay")) t.weight_decay = *v;
  if (auto v = f.get_int("experiment.hidden_width")) t.hidden_width = static_cast<std::size_t>(*v);
  if (auto v = f.get_int("experiment.depth")) t.depth = static_cast<std::size_t>(*v);
  if (auto v = f.get_int("experiment.jtt_upweight")) t.jtt_upweight = static_cast<int>(*v);
  if (auto v = f.get_int("experiment.jtt_epoch")) t.jtt_epoch = static_cast<int>(*v);
  if (auto v = f.get_bool("experiment.joint_success_only")) t.joint_success_only = *v;
  if (auto v = f.get_double("experiment.smoothing")) cfg.smoothing = *v;
  if (!(cfg.smoothing >= 0.0)) throw ConfigError("field 'experiment.smoothing' must be >= 0");

  DataSource& d = cfg.data;
  const std::string source = f.get("data.source").value_or("synthetic");
  if (source == "synthetic") {
    d.kind = DataSource::Kind::synthetic;
  } else if (source == "file") {
    d.kind = DataSource::Kind::file;
    const auto path = f.get("data.path");
    if (!path) throw ConfigError("missing field 'data.path' (required for data.source = file)");
    d.path = *path;
  } else {
    throw ConfigError("field 'data.source': expected synthetic or file, got '" + source + "'");
  }
  SyntheticSpec& s = d.synthetic;
  if (auto v = f.get_int("data.samples")) s.samples = static_cast<std::size_t>(*v);
  if (auto v = f.get_int("data.classes")) {
    s.num_classes = static_cast<int>(*v);
    d.schema.num_classes = static_cast<int>(*v);
  }
  if (auto v = f.get_int("data.groups")) d.schema.num_groups = static_cast<int>(*v);
  if (auto v = f.get_double("data.correlation")) s.correlation = *v;
  if (auto v = f.get_int("data.task_dims")) s.task_dims = static_cast<std::size_t>(*v);
  if (auto v = f.get_double("data.task_separation")) s.task_separation = *v;
  if (auto v = f.get_double("data.task_noise")) s.task_noise = *v;
  if (auto v = f.get_int("data.demographic_dims")) s.demographic_dims = static_cast<std::size_t>(*v);
  if (auto v = f.get_double("data.demographic_separation")) s.demographic_separation = *v;
  if (auto v = f.get_double("data.demographic_noise")) s.demographic_noise = *v;
  if (auto v = f.get_int("data.seed")) s.seed = static_cast<std::uint64_t>(*v);
  if (auto v = f.get_strings("data.feature_columns")) d.schema.feature_columns = *v;
  if (auto v = f.get("data.label_column")) d.schema.label_column = *v;
  if (auto v = f.get("data.attribute_column")) {
    d.schema.attribute_column = *v == "none" ? std::nullopt : std::optional<std::string>(*v);
  }
  if (auto v = f.get_bool("data.attribute_required")) d.schema.attribute_required = *v;
  if (d.kind == DataSource::Kind::synthetic) s.validate();

  if (auto v = f.get_double("split.train")) cfg.split.train = *v;
  if (auto v = f.get_double("split.val")) cfg.split.val = *v;
  if (auto v = f.get_double("split.test")) cfg.split.test = *v;
  if (auto v = f.get_bool("split.balance_eval")) cfg.split.balance_eval = *v;
  if (auto v = f.get_int("split.seed")) {
    cfg.split.seed = static_cast<std::uint64_t>(*v);
    cfg.split_seed_set = true;
  }
  cfg.split.validate();

  SweepSpec& w = cfg.sweep;
  if (auto v = f.get_doubles("sweep.gammas")) w.gammas = *v;
  if (auto v = f.get_doubles("sweep.temperatures")) w.temperatures = *v;
  if (auto v = f.get_doubles("sweep.seeds")) {
    w.seeds.clear();
    for (double x : *v) {
      if (x < 0 || x != static_cast<double>(static_cast<std::uint64_t>(x))) {
        throw ConfigError("field 'sweep.seeds': seeds must be non-negative integers");
      }
      w.seeds.push_back(static_cast<std::uint64_t>(x));
    }
  }
  if (auto v = f.get_int("sweep.workers")) w.workers = static_cast<int>(*v);
  if (auto v = f.get_double("sweep.threshold")) w.threshold = *v;
  if (auto v = f.get_strings("sweep.dto_metrics")) w.dto_metrics = *v;
  if (w.workers < 1) throw ConfigError("field 'sweep.workers' must be >= 1");
  for (const std::string& m : w.dto_metrics) {
    bool known = false;
    for (const std::string& n : fairness_metric_names()) known = known || n == m;
    if (!known || m == "accuracy") {
      throw ConfigError("field 'sweep.dto_metrics': unknown fairness metric '" + m + "'");
    }
  }

  if (auto v = f.get_doubles("probe.fractions")) cfg.probe.fractions = *v;
  if (auto v = f.get_double("probe.learning_rate")) cfg.probe.training.learning_rate = *v;
  if (auto v = f.get_int("probe.batch_size")) {
    cfg.probe.training.batch_size = static_cast<std::size_t>(*v);
  }
  if (auto v = f.get_int("probe.epochs")) cfg.probe.training.epochs = static_cast<int>(*v);
  if (auto v = f.get_int("probe.seed")) cfg.probe.training.seed = static_cast<std::uint64_t>(*v);

  const auto unused = f.unused_keys();
  if (!unused.empty()) throw ConfigError(f.source() + ": unknown field '" + unused.front() + "'");

  if (sweep) {
    TrainConfig probe = t;
    for (double g : w.gammas) {
      for (double temp : w.temperatures) {
        probe.gamma = g;
        probe.temperature = temp;
        probe.validate();
      }
    }
  } else {
    t.validate();
  }
  return cfg;
}

std::string to_config_text(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  std::ostringstream out;
  out << "[experiment]\n"
      << "name = " << cfg.name << '\n'
      << "mode = " << to_string(t.mode) << '\n'
      << "gamma = " << format_double(t.gamma) << '\n'
      << "temperature = " << format_double(t.temperature) << '\n'
      << "seed = " << t.seed << '\n'
      << "epochs = " << t.epochs << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "main_lr = " << format_double(t.main_lr) << '\n'
      << "detector_lr = " << format_double(t.detector_lr) << '\n'
      << "weight_decay = " << format_double(t.weight_decay) << '\n'
      << "hidden_width = " << t.hidden_width << '\n'
      << "depth = " << t.depth << '\n'
      << "jtt_upweight = " << t.jtt_upweight << '\n'
      << "jtt_epoch = " << t.jtt_epoch << '\n'
      << "joint_success_only = " << (t.joint_success_only ? "true" : "false") << '\n'
      << "smoothing = " << format_double(cfg.smoothing) << '\n';

  const DataSource& d = cfg.data;
  const SyntheticSpec& s = d.synthetic;
  out << "\n[data]\n";
  if (d.kind == DataSource::Kind::synthetic) {
    out << "source = synthetic\n"
        << "samples = " << s.samples << '\n'
        << "classes = " << s.num_classes << '\n'
        << "correlation = " << format_double(s.correlation) << '\n'
        << "task_dims = " << s.task_dims << '\n'
        << "task_separation = " << format_double(s.task_separation) << '\n'
        << "task_noise = " << format_double(s.task_noise) << '\n'
        << "demographic_dims = " << s.demographic_dims << '\n'
        << "demographic_separation = " << format_double(s.demographic_separation) << '\n'
        << "demographic_noise = " << format_double(s.demographic_noise) << '\n'
        << "seed = " << s.seed << '\n';
  } else {
    out << "source = file\n"
        << "path = " << d.path.string() << '\n';
    if (!d.schema.feature_columns.empty()) {
      out << "feature_columns = " << join(d.schema.feature_columns) << '\n';
    }
    out << "label_column = " << d.schema.label_column << '\n'
        << "attribute_column = " << d.schema.attribute_column.value_or("none") << '\n'
        << "attribute_required = " << (d.schema.attribute_required ? "true" : "false") << '\n';
    if (d.schema.num_classes) out << "classes = " << *d.schema.num_classes << '\n';
    if (d.schema.num_groups) out << "groups = " << *d.schema.num_groups << '\n';
  }

  out << "\n[split]\n"
      << "train = " << format_double(cfg.split.train) << '\n'
      << "val = " << format_double(cfg.split.val) << '\n'
      << "test = " << format_double(cfg.split.test) << '\n'
      << "balance_eval = " << (cfg.split.balance_eval ? "true" : "false") << '\n';
  if (cfg.split_seed_set) out << "seed = " << cfg.split.seed << '\n';

  const SweepSpec& w = cfg.sweep;
  out << "\n[sweep]\n"
      << "gammas = " << join_numbers(w.gammas) << '\n'
      << "temperatures = " << join_numbers(w.temperatures) << '\n'
      << "seeds = " << join_numbers(w.seeds) << '\n'
      << "workers = " << w.workers << '\n'
      << "threshold = " << format_double(w.threshold) << '\n'
      << "dto_metrics = " << join(w.dto_metrics) << '\n';

  out << "\n[probe]\n"
      << "fractions = " << join_numbers(cfg.probe.fractions) << '\n'
      << "learning_rate = " << format_double(cfg.probe.training.learning_rate) << '\n'
      << "batch_size = " << cfg.probe.training.batch_size << '\n'
      << "epochs = " << cfg.probe.training.epochs << '\n'
      << "seed = " << cfg.probe.training.seed << '\n';
  return out.str();
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace debias
