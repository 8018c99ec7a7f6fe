#include "dodrom/pipeline/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <optional>
#include <set>
#include <sstream>

namespace dodrom::pipeline {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Typed access to one INI tree that remembers which keys were read.
class Reader {
 public:
  explicit Reader(pt::ptree tree) : tree_(std::move(tree)) {}

  bool has(const std::string& key) const { return lookup(key).has_value(); }

  std::string text(const std::string& key) {
    used_.insert(key);
    const auto v = lookup(key);
    if (!v) throw ConfigError("missing key " + key);
    return trim(*v);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    const std::string s = text(key);
    try {
      std::size_t pos = 0;
      if constexpr (std::is_same_v<T, double>) {
        out = std::stod(s, &pos);
      } else if constexpr (std::is_same_v<T, bool>) {
        if (s == "true" || s == "1") out = true;
        else if (s == "false" || s == "0") out = false;
        else throw std::invalid_argument(s);
        pos = s.size();
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
        out = T(std::stoull(s, &pos));
      } else {
        out = T(std::stoll(s, &pos));
      }
      if (pos != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("key " + key + " has an invalid value '" + s + "'");
    }
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (!has(key)) throw ConfigError("seed " + key + " must be set explicitly");
    get(key, out);
  }

  void widths(const std::string& key, std::vector<Index>& out) {
    if (!has(key)) return;
    out.clear();
    for (const auto& item : split_list(text(key))) {
      try {
        std::size_t pos = 0;
        const long long w = std::stoll(item, &pos);
        if (pos != item.size() || w < 1) throw std::invalid_argument(item);
        out.push_back(Index(w));
      } catch (const std::exception&) {
        throw ConfigError("key " + key + " needs positive layer widths, got '" + item + "'");
      }
    }
  }

  void box(const std::string& key, fom::Box& out) {
    if (!has(key)) return;
    const auto items = split_list(text(key));
    try {
      if (items.size() != 2) throw std::invalid_argument("arity");
      out.lo = std::stod(items[0]);
      out.hi = std::stod(items[1]);
    } catch (const std::exception&) {
      throw ConfigError("key " + key + " needs 'lo, hi'");
    }
  }

  std::vector<std::string> sections(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, _] : tree_) {
      if (name.rfind(prefix, 0) == 0) out.push_back(name.substr(prefix.size()));
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) throw ConfigError("key " + section + " outside a section");
      for (const auto& [key, _] : body) {
        const std::string full = section + "." + key;
        if (!used_.count(full)) throw ConfigError("unknown key " + full);
      }
    }
  }

 private:
  // Section names may contain dots ("preset.low"); the key name follows the last one.
  std::optional<std::string> lookup(const std::string& key) const {
    const auto dot = key.rfind('.');
    const auto section = tree_.get_child_optional(pt::ptree::path_type(key.substr(0, dot), '\0'));
    if (!section) return std::nullopt;
    const auto v = section->get_optional<std::string>(pt::ptree::path_type(key.substr(dot + 1), '\0'));
    if (!v) return std::nullopt;
    return *v;
  }

  pt::ptree tree_;
  std::set<std::string> used_;
};

std::string key(const std::string& section, const std::string& name) { return section + "." + name; }

void read_training(Reader& r, const std::string& s, train::TrainConfig& t) {
  r.get(key(s, "lr"), t.lr);
  r.get(key(s, "weight_decay"), t.weight_decay);
  r.get(key(s, "batch_size"), t.batch_size);
  r.get(key(s, "max_epochs"), t.max_epochs);
  r.get(key(s, "patience"), t.plateau.patience);
  r.get(key(s, "factor"), t.plateau.factor);
  r.get(key(s, "threshold"), t.plateau.threshold);
  r.get(key(s, "min_lr"), t.plateau.min_lr);
  r.get(key(s, "omega_h"), t.omega_h);
  r.get(key(s, "alpha"), t.alpha);
  r.seed(key(s, "init_seed"), t.init_seed);
  r.seed(key(s, "shuffle_seed"), t.shuffle_seed);
}

const eval::Preset* find_preset(const std::vector<eval::Preset>& presets, const std::string& name) {
  for (const auto& p : presets) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void check_training(const std::string& s, const train::TrainConfig& t) {
  if (!(t.lr > 0.0)) throw ConfigError(s + ".lr must be positive");
  if (!(t.weight_decay >= 0.0)) throw ConfigError(s + ".weight_decay must be non-negative");
  if (t.batch_size < 1) throw ConfigError(s + ".batch_size must be at least 1");
  if (t.max_epochs < 1) throw ConfigError(s + ".max_epochs must be at least 1");
  if (t.plateau.patience < 0) throw ConfigError(s + ".patience must be non-negative");
  if (!(t.plateau.factor > 0.0 && t.plateau.factor < 1.0)) throw ConfigError(s + ".factor must lie in (0, 1)");
  if (!(t.plateau.min_lr >= 0.0)) throw ConfigError(s + ".min_lr must be non-negative");
  if (!(t.omega_h >= 0.0 && t.omega_h <= 1.0)) throw ConfigError(s + ".omega_h must lie in [0, 1]");
  if (!(t.alpha > 0.0 && t.alpha <= 1.0)) throw ConfigError(s + ".alpha must lie in (0, 1]");
}

void check_box(const std::string& name, const fom::Box& b) {
  if (!(b.lo < b.hi)) throw ConfigError("benchmark." + name + " needs lo < hi");
}

std::string inequality(const std::string& text, Index a, Index b) {
  std::ostringstream os;
  os << "dimension hierarchy violated: " << text << " does not hold (" << a << " vs " << b << ")";
  return os.str();
}

}  // namespace

dod::DodDims RunConfig::dod_dims() const {
  dod::DodDims d;
  d.ell = model.dod_ell;
  d.n_a = dims.n_a;
  d.n_prime = dims.n_prime;
  d.seed_hidden = model.dod_seed_hidden;
  d.head_hidden = model.dod_head_hidden;
  return d;
}

eval::SweepConfig RunConfig::sweep_config() const {
  eval::SweepConfig s;
  s.presets = presets;
  s.dims = dims;
  s.rom_training = training;
  s.dod_training = dod_training;
  s.reps = timing_reps;
  s.fom_seed = fom_seed;
  return s;
}

void RunConfig::validate() const {
  const auto& b = benchmark;
  if (b.nx < 2 || b.ny < 2) throw ConfigError("benchmark grid needs at least 2 x 2 cells");
  if (!(b.final_time > 0.0)) throw ConfigError("benchmark.final_time must be positive");
  if (b.n_t < 1) throw ConfigError("benchmark.n_t must be at least 1");
  if (b.n_geom < 2) throw ConfigError("benchmark.n_geom must be at least 2 (geometries are split for validation)");
  if (b.n_phys < 1) throw ConfigError("benchmark.n_phys must be at least 1");
  if (n_test < 1) throw ConfigError("benchmark.n_test must be at least 1");
  if (b.threads < 1) throw ConfigError("benchmark.threads must be at least 1");
  check_box("mu1", b.ranges.mu1);
  check_box("mu2", b.ranges.mu2);
  check_box("nu1", b.ranges.nu1);
  check_box("nu2", b.ranges.nu2);

  const Index n_h = b.nx * b.ny;
  if (dims.n < 1) throw ConfigError("dims.n must be at least 1");
  if (!(dims.n <= dims.n_prime)) throw ConfigError(inequality("n <= N'", dims.n, dims.n_prime));
  if (!(dims.n_prime < dims.big_n)) throw ConfigError(inequality("N' < N", dims.n_prime, dims.big_n));
  if (!(dims.big_n < dims.n_a)) throw ConfigError(inequality("N < N_A", dims.big_n, dims.n_a));
  if (!(dims.n_a <= n_h)) throw ConfigError(inequality("N_A <= N_h", dims.n_a, n_h));
  const Index n_data = b.n_geom * b.n_phys * b.n_t;
  if (dims.n_a > n_data) {
    std::ostringstream os;
    os << "dims.n_a = " << dims.n_a << " exceeds the number of snapshots " << n_data;
    throw ConfigError(os.str());
  }
  if (model.dod_ell < 1) throw ConfigError("dod.ell must be at least 1");

  check_training("training", training);
  check_training("dod_training", dod_training);
  if (presets.empty()) throw ConfigError("sweep.presets is empty");
  for (const auto& p : presets) {
    if (p.dod_ell < 1) throw ConfigError("preset." + p.name + ".dod_ell must be at least 1");
  }
  if (timing_reps < eval::kMinTimingReps) throw ConfigError("sweep.reps must be at least 20");
}

RunConfig load_config(const fs::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  Reader r(std::move(tree));
  RunConfig cfg;

  auto& b = cfg.benchmark;
  r.get("benchmark.nx", b.nx);
  r.get("benchmark.ny", b.ny);
  r.get("benchmark.final_time", b.final_time);
  r.get("benchmark.n_t", b.n_t);
  r.get("benchmark.n_geom", b.n_geom);
  r.get("benchmark.n_phys", b.n_phys);
  r.get("benchmark.n_test", cfg.n_test);
  r.get("benchmark.threads", b.threads);
  r.box("benchmark.mu1", b.ranges.mu1);
  r.box("benchmark.mu2", b.ranges.mu2);
  r.box("benchmark.nu1", b.ranges.nu1);
  r.box("benchmark.nu2", b.ranges.nu2);
  r.seed("benchmark.seed", b.seed);
  r.seed("benchmark.test_seed", cfg.test_seed);

  r.get("dims.n", cfg.dims.n);
  r.get("dims.n_prime", cfg.dims.n_prime);
  r.get("dims.big_n", cfg.dims.big_n);
  r.get("dims.n_a", cfg.dims.n_a);

  // Named presets: built-in ladder, replaced or extended by [preset.<name>] sections.
  std::vector<eval::Preset> known = eval::default_presets();
  for (const auto& name : r.sections("preset.")) {
    eval::Preset* p = nullptr;
    for (auto& k : known) {
      if (k.name == name) p = &k;
    }
    if (!p) {
      known.push_back({});
      p = &known.back();
      p->name = name;
    }
    const std::string s = "preset." + name;
    r.widths(key(s, "dfnn_hidden"), p->rom.dfnn_hidden);
    r.widths(key(s, "decoder_hidden"), p->rom.decoder_hidden);
    r.get(key(s, "dod_ell"), p->dod_ell);
    r.widths(key(s, "dod_seed_hidden"), p->dod_seed_hidden);
    r.widths(key(s, "dod_head_hidden"), p->dod_head_hidden);
  }
  auto resolve = [&](const std::string& name, const std::string& where) {
    const auto* p = find_preset(known, name);
    if (!p) throw ConfigError(where + " names unknown preset '" + name + "'");
    return *p;
  };

  cfg.model = resolve("medium", "default");
  if (r.has("rom.preset")) {
    const auto p = resolve(r.text("rom.preset"), "rom.preset");
    cfg.model.rom = p.rom;
  }
  if (r.has("dod.preset")) {
    const auto p = resolve(r.text("dod.preset"), "dod.preset");
    cfg.model.dod_ell = p.dod_ell;
    cfg.model.dod_seed_hidden = p.dod_seed_hidden;
    cfg.model.dod_head_hidden = p.dod_head_hidden;
  }
  r.widths("rom.dfnn_hidden", cfg.model.rom.dfnn_hidden);
  r.widths("rom.decoder_hidden", cfg.model.rom.decoder_hidden);
  r.get("dod.ell", cfg.model.dod_ell);
  r.widths("dod.seed_hidden", cfg.model.dod_seed_hidden);
  r.widths("dod.head_hidden", cfg.model.dod_head_hidden);

  read_training(r, "training", cfg.training);
  read_training(r, "dod_training", cfg.dod_training);

  if (r.has("sweep.presets")) {
    cfg.presets.clear();
    for (const auto& name : split_list(r.text("sweep.presets"))) cfg.presets.push_back(resolve(name, "sweep.presets"));
  }
  r.get("sweep.reps", cfg.timing_reps);
  r.seed("sweep.fom_seed", cfg.fom_seed);

  if (r.has("paths.output")) cfg.output = r.text("paths.output");
  fs::path out(cfg.output);
  if (out.is_relative()) out = path.parent_path() / out;
  cfg.output = out.lexically_normal().string();

  r.reject_unknown();
  cfg.validate();
  return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return fs::path(env);
  return fs::path(cfg.output);
}

}  // namespace dodrom::pipeline
