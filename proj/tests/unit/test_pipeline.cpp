#include <doctest.h>

#include "dodrom/io/matrix_store.hpp"
#include "dodrom/pipeline/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace dodrom;
using namespace dodrom::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(DODROM_SOURCE_DIR) / "configs";

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "dodrom_test_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Smoke config with some lines replaced; `edits` maps "section.key" to a new value.
fs::path edited_config(const std::string& name, const std::map<std::string, std::string>& edits) {
  std::ifstream is(kConfigs / "smoke.ini");
  std::ostringstream os;
  std::string line, section;
  std::map<std::string, std::string> pending = edits;
  auto flush = [&] {
    for (auto it = pending.begin(); it != pending.end();) {
      if (it->first.rfind(section + ".", 0) == 0) {
        os << it->first.substr(section.size() + 1) << " = " << it->second << "\n";
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
  };
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] == '[') {
      flush();
      section = line.substr(1, line.find(']') - 1);
    } else if (const auto eq = line.find('='); eq != std::string::npos && line[0] != ';') {
      std::string k = line.substr(0, eq);
      k.erase(k.find_last_not_of(' ') + 1);
      if (const auto it = pending.find(section + "." + k); it != pending.end()) {
        if (it->second != "<erase>") os << k << " = " << it->second << "\n";
        pending.erase(it);
        continue;
      }
    }
    os << line << "\n";
  }
  flush();
  for (const auto& [k, v] : pending) {
    const auto dot = k.rfind('.');
    os << "[" << k.substr(0, dot) << "]\n" << k.substr(dot + 1) << " = " << v << "\n";
  }
  const auto path = scratch("configs_" + name) / "run.ini";
  std::ofstream(path) << os.str();
  return path;
}

std::string config_error(const std::map<std::string, std::string>& edits) {
  try {
    load_config(edited_config("bad", edits));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream is(entry.path(), std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    files[fs::relative(entry.path(), root).string()] = os.str();
  }
  return files;
}

void run_pipeline(const RunConfig& cfg, const Layout& layout, bool timing) {
  cmd_generate(cfg, layout);
  cmd_pod(cfg, layout);
  cmd_train_dod(cfg, layout);
  for (auto v : {roms::Variant::kPodDlRom, roms::Variant::kDodDfnn, roms::Variant::kDodDlRom}) cmd_train_rom(cfg, layout, v);
  cmd_evaluate(cfg, layout, {{}, timing});
  cmd_knw(cfg, layout, 0);
}

}  // namespace

TEST_CASE("config presets load") {
  const auto smoke = load_config(kConfigs / "smoke.ini");
  CHECK(smoke.benchmark.nx == 20);
  CHECK(smoke.presets.size() == 3);
  CHECK(smoke.presets[0].name == "tiny");
  CHECK(smoke.presets[2].name == "low");
  CHECK(smoke.model.rom.dfnn_hidden == std::vector<Index>{8, 8});
  CHECK(smoke.dod_dims().ell == 4);
  CHECK(fs::path(smoke.output).filename() == "smoke");

  const auto t1 = load_config(kConfigs / "table1.ini");
  CHECK(t1.dims.n == 2);
  CHECK(t1.dims.n_prime == 2);
  CHECK(t1.dims.big_n == 8);
  CHECK(t1.dims.n_a == 10);
  CHECK(t1.benchmark.nx * t1.benchmark.ny == 3600);
  CHECK(t1.model.rom.dfnn_hidden == eval::default_presets()[1].rom.dfnn_hidden);
  CHECK(t1.n_test == 20);
}

TEST_CASE("config validation names the violated inequality") {
  CHECK(config_error({{"dims.n", "3"}}).find("n <= N'") != std::string::npos);
  CHECK(config_error({{"dims.n_prime", "4"}}).find("N' < N") != std::string::npos);
  CHECK(config_error({{"dims.big_n", "6"}}).find("N < N_A") != std::string::npos);
  CHECK(config_error({{"benchmark.nx", "2"}, {"benchmark.ny", "2"}}).find("N_A <= N_h") != std::string::npos);
  CHECK(config_error({{"benchmark.seed", "<erase>"}}).find("benchmark.seed") != std::string::npos);
  CHECK(config_error({{"training.init_seed", "<erase>"}}).find("training.init_seed") != std::string::npos);
  CHECK(config_error({{"training.colour", "blue"}}).find("unknown key training.colour") != std::string::npos);
  CHECK(config_error({{"training.lr", "fast"}}).find("training.lr") != std::string::npos);
  CHECK(config_error({{"sweep.presets", "tiny, huge"}}).find("huge") != std::string::npos);
  CHECK(config_error({{"benchmark.mu1", "0.3, 0.1"}}).find("mu1") != std::string::npos);
  CHECK(config_error({{"sweep.reps", "5"}}) != "");
  CHECK(config_error({}) == "");
}

TEST_CASE("output directory override") {
  const auto cfg = load_config(kConfigs / "smoke.ini");
  ::unsetenv(kOutputDirEnv);
  CHECK(output_dir(cfg) == fs::path(cfg.output));
  ::setenv(kOutputDirEnv, "/tmp/elsewhere", 1);
  CHECK(output_dir(cfg) == fs::path("/tmp/elsewhere"));
  ::unsetenv(kOutputDirEnv);
}

TEST_CASE("serial order and fingerprint checks") {
  auto cfg = load_config(kConfigs / "smoke.ini");
  const Layout layout{scratch("serial")};
  std::ostringstream out, err;

  CHECK(run_command([&] { return cmd_pod(cfg, layout); }, out, err) == kExitData);
  cmd_generate(cfg, layout);
  err.str("");
  CHECK(run_command([&] { return cmd_train_rom(cfg, layout, roms::Variant::kDodDlRom); }, out, err) == kExitData);
  CHECK(err.str().find("train-dod") != std::string::npos);
  CHECK(run_command([&] { return cmd_train_dod(cfg, layout); }, out, err) == kExitData);
  CHECK(run_command([&] { return cmd_evaluate(cfg, layout, {}); }, out, err) == kExitData);

  cmd_pod(cfg, layout);
  cmd_train_dod(cfg, layout);
  cmd_train_rom(cfg, layout, roms::Variant::kDodDfnn);

  // A new corpus invalidates every stage built on the old one.
  cfg.benchmark.seed = 99;
  cmd_generate(cfg, layout);
  err.str("");
  CHECK(run_command([&] { return cmd_evaluate(cfg, layout, {{}, false}); }, out, err) == kExitData);
  CHECK(err.str().find("retrain") != std::string::npos);
  CHECK_THROWS_AS(cmd_train_rom(cfg, layout, roms::Variant::kDodDfnn), DataError);
  CHECK_THROWS_AS(cmd_train_dod(cfg, layout), DataError);
}

TEST_CASE("training failures map to exit code 4") {
  auto cfg = load_config(kConfigs / "smoke.ini");
  const Layout layout{scratch("diverge")};
  cmd_generate(cfg, layout);
  cfg.training.lr = 1e300;
  std::ostringstream out, err;
  CHECK(run_command([&] { return cmd_train_rom(cfg, layout, roms::Variant::kPodDlRom); }, out, err) == kExitTraining);
  CHECK(run_command([] () -> std::string { throw ConfigError("x"); }, out, err) == kExitConfig);
}

TEST_CASE("reruns reproduce byte-identical outputs") {
  const auto cfg = load_config(kConfigs / "smoke.ini");
  const Layout a{scratch("rerun_a")}, b{scratch("rerun_b")};
  run_pipeline(cfg, a, false);
  run_pipeline(cfg, b, false);
  const auto fa = read_tree(a.root), fb = read_tree(b.root);
  CHECK(fa.size() > 20);
  REQUIRE(fa.size() == fb.size());
  for (const auto& [name, bytes] : fa) {
    INFO(name);
    REQUIRE(fb.count(name));
    CHECK(bytes == fb.at(name));
  }
  CHECK(fa.count("reports/knw.csv"));
  CHECK(fa.count("reports/projection.csv"));
  CHECK(fa.count("models/dod-dl-rom/manifest.ini"));

  // Rerunning a command in place reproduces it too.
  cmd_train_rom(cfg, a, roms::Variant::kDodDlRom);
  CHECK(read_tree(a.root) == fa);
}

TEST_CASE("evaluate with timing and export") {
  const auto cfg = load_config(kConfigs / "smoke.ini");
  const Layout layout{scratch("export")};
  run_pipeline(cfg, layout, true);
  std::ifstream summary(layout.reports() / "pod-dl-rom_summary.csv");
  std::string text((std::istreambuf_iterator<char>(summary)), {});
  CHECK(text.find("speedup,") != std::string::npos);
  CHECK(text.find("speedup,\n") == std::string::npos);

  const auto csv = (layout.root / "u.csv").string();
  cmd_export(layout.train_store() + ".bin", csv);
  const auto table = io::load_csv(csv);
  CHECK(table.rows.size() == 400);
  CHECK(table.header.size() == 96);
  const auto net_csv = (layout.root / "net.csv").string();
  cmd_export((layout.model_dir(roms::Variant::kPodDlRom) / "dfnn.net").string(), net_csv);
  CHECK(io::load_csv(net_csv).header == std::vector<std::string>{"layer", "kind", "row", "col", "value"});
  CHECK_THROWS_AS(cmd_export((layout.root / "pod" / "provenance.ini").string(), csv), DataError);
}

TEST_CASE("benchmark config generates N_h = 3600") {
  auto cfg = load_config(kConfigs / "table1.ini");
  cfg.benchmark.n_geom = 2;
  cfg.benchmark.n_phys = 1;
  cfg.n_test = 1;
  const Layout layout{scratch("table1")};
  cmd_generate(cfg, layout);
  const auto set = fom::load_snapshots(layout.train_store());
  CHECK(set.n_h() == 3600);
  CHECK(set.n_data() == 2 * cfg.benchmark.n_t);
}
