#include "dodrom/fom/snapshots.hpp"

#include "dodrom/autodiff/mlp.hpp"
#include "dodrom/io/binary.hpp"
#include "dodrom/io/matrix_store.hpp"
#include "dodrom/util/parallel.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <map>
#include <sstream>

namespace dodrom::fom {

namespace {

std::string describe(const GeomParams& mu, const PhysParams& nu) {
  std::ostringstream os;
  os.precision(17);
  os << "(mu1=" << mu.mu1 << ", mu2=" << mu.mu2 << ", nu1=" << nu.nu1 << ", nu2=" << nu.nu2 << ")";
  return os.str();
}

double draw(std::mt19937_64& rng, const Box& box) { return box.lo + box.width() * uniform01(rng); }

}  // namespace

bool SnapshotSet::is_tensor_product() const {
  if (trajectories.size() != geom.size() * phys.size()) return false;
  std::size_t r = 0;
  for (std::size_t j = 0; j < phys.size(); ++j) {
    for (std::size_t i = 0; i < geom.size(); ++i, ++r) {
      if (trajectories[r].geom != Index(i) || trajectories[r].phys != Index(j)) return false;
    }
  }
  return true;
}

void SnapshotSet::check() const {
  if (U.rows() != grid.cells()) throw ParameterError("snapshot rows differ from grid cells");
  if (U.cols() != n_traj() * n_t()) throw ParameterError("snapshot columns differ from trajectories x times");
  for (const auto& t : trajectories) {
    if (t.geom < 0 || t.geom >= Index(geom.size()) || t.phys < 0 || t.phys >= Index(phys.size())) {
      throw ParameterError("trajectory refers to a missing parameter");
    }
  }
}

std::vector<double> time_grid(double final_time, Index n_t) {
  std::vector<double> t(static_cast<std::size_t>(n_t));
  const double dt = final_time / double(n_t);
  for (Index k = 0; k < n_t; ++k) t[std::size_t(k)] = double(k + 1) * dt;
  return t;
}

std::vector<GeomParams> sample_geom(std::mt19937_64& rng, Index n, const ParameterRanges& ranges) {
  std::vector<GeomParams> out;
  for (Index i = 0; i < n; ++i) {
    GeomParams mu;
    mu.mu1 = draw(rng, ranges.mu1);
    mu.mu2 = draw(rng, ranges.mu2);
    out.push_back(mu);
  }
  return out;
}

std::vector<PhysParams> sample_phys(std::mt19937_64& rng, Index n, const ParameterRanges& ranges) {
  std::vector<PhysParams> out;
  for (Index i = 0; i < n; ++i) {
    PhysParams nu;
    nu.nu1 = draw(rng, ranges.nu1);
    nu.nu2 = draw(rng, ranges.nu2);
    out.push_back(nu);
  }
  return out;
}

Eigen::MatrixXd solve_fom(const Grid& grid, const GeomParams& mu, const PhysParams& nu,
                          double final_time, Index n_t, const ParameterRanges& ranges) {
  validate(nu, ranges);
  const FlowField flow = solve_darcy(grid, mu, ranges);
  return solve_transport(grid, flow, mu, nu, final_time, n_t);
}

namespace {

SnapshotSet simulate(const BenchmarkConfig& cfg, std::vector<GeomParams> geom,
                     std::vector<PhysParams> phys, std::vector<TrajectoryRef> trajectories) {
  SnapshotSet set;
  set.grid = Grid(cfg.nx, cfg.ny);
  set.geom = std::move(geom);
  set.phys = std::move(phys);
  set.trajectories = std::move(trajectories);
  set.times = time_grid(cfg.final_time, cfg.n_t);
  set.final_time = cfg.final_time;
  set.ranges = cfg.ranges;
  set.seed = cfg.seed;
  for (const auto& nu : set.phys) validate(nu, cfg.ranges);

  std::vector<FlowField> flows(set.geom.size());
  util::parallel_for(Index(set.geom.size()), cfg.threads, [&](Index i) {
    try {
      flows[std::size_t(i)] = solve_darcy(set.grid, set.geom[std::size_t(i)], cfg.ranges);
    } catch (const std::exception& e) {
      throw SolverError(std::string(e.what()) + " for mu1=" + std::to_string(set.geom[std::size_t(i)].mu1) +
                        ", mu2=" + std::to_string(set.geom[std::size_t(i)].mu2));
    }
  });

  set.U.resize(set.grid.cells(), Index(set.trajectories.size()) * cfg.n_t);
  util::parallel_for(set.n_traj(), cfg.threads, [&](Index r) {
    const auto& ref = set.trajectories[std::size_t(r)];
    const auto& mu = set.geom[std::size_t(ref.geom)];
    const auto& nu = set.phys[std::size_t(ref.phys)];
    try {
      set.U.middleCols(r * cfg.n_t, cfg.n_t) =
          solve_transport(set.grid, flows[std::size_t(ref.geom)], mu, nu, cfg.final_time, cfg.n_t);
    } catch (const std::exception& e) {
      throw SolverError(std::string(e.what()) + " for " + describe(mu, nu));
    }
  });
  return set;
}

}  // namespace

SnapshotSet generate_snapshots(const BenchmarkConfig& cfg) {
  if (cfg.n_geom < 1 || cfg.n_phys < 1) throw ParameterError("need at least one sample per parameter group");
  std::mt19937_64 rng(cfg.seed);
  auto geom = sample_geom(rng, cfg.n_geom, cfg.ranges);
  auto phys = sample_phys(rng, cfg.n_phys, cfg.ranges);
  std::vector<TrajectoryRef> refs;
  for (Index j = 0; j < cfg.n_phys; ++j) {
    for (Index i = 0; i < cfg.n_geom; ++i) refs.push_back({i, j});
  }
  return simulate(cfg, std::move(geom), std::move(phys), std::move(refs));
}

SnapshotSet generate_test_set(const BenchmarkConfig& cfg, Index count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GeomParams> geom;
  std::vector<PhysParams> phys;
  std::vector<TrajectoryRef> refs;
  for (Index r = 0; r < count; ++r) {
    geom.push_back(sample_geom(rng, 1, cfg.ranges).front());
    phys.push_back(sample_phys(rng, 1, cfg.ranges).front());
    refs.push_back({r, r});
  }
  BenchmarkConfig c = cfg;
  c.seed = seed;
  return simulate(c, std::move(geom), std::move(phys), std::move(refs));
}

void save_snapshots(const std::string& base, const SnapshotSet& set) {
  set.check();
  io::save_matrix(base + ".bin", set.U);

  std::vector<std::vector<double>> rows;
  rows.reserve(std::size_t(set.n_data()));
  for (Index r = 0; r < set.n_traj(); ++r) {
    const auto& ref = set.trajectories[std::size_t(r)];
    const auto& mu = set.geom[std::size_t(ref.geom)];
    const auto& nu = set.phys[std::size_t(ref.phys)];
    for (Index k = 0; k < set.n_t(); ++k) {
      rows.push_back({double(set.column(r, k)), mu.mu1, mu.mu2, nu.nu1, nu.nu2, set.times[std::size_t(k)]});
    }
  }
  io::save_csv(base + ".csv", {"col_index", "mu1", "mu2", "nu1", "nu2", "t"}, rows);

  boost::property_tree::ptree pt;
  pt.put("grid.nx", set.grid.nx());
  pt.put("grid.ny", set.grid.ny());
  pt.put("time.final_time", io::format_double(set.final_time));
  pt.put("time.n_t", set.n_t());
  pt.put("sampling.n_geom", set.geom.size());
  pt.put("sampling.n_phys", set.phys.size());
  pt.put("sampling.trajectories", set.trajectories.size());
  pt.put("sampling.tensor_product", set.is_tensor_product());
  pt.put("sampling.seed", set.seed);
  pt.put("ranges.mu1_min", io::format_double(set.ranges.mu1.lo));
  pt.put("ranges.mu1_max", io::format_double(set.ranges.mu1.hi));
  pt.put("ranges.mu2_min", io::format_double(set.ranges.mu2.lo));
  pt.put("ranges.mu2_max", io::format_double(set.ranges.mu2.hi));
  pt.put("ranges.nu1_min", io::format_double(set.ranges.nu1.lo));
  pt.put("ranges.nu1_max", io::format_double(set.ranges.nu1.hi));
  pt.put("ranges.nu2_min", io::format_double(set.ranges.nu2.lo));
  pt.put("ranges.nu2_max", io::format_double(set.ranges.nu2.hi));
  boost::property_tree::write_ini(base + ".ini", pt);
}

SnapshotSet load_snapshots(const std::string& base) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(base + ".ini", pt);
  } catch (const std::exception& e) {
    throw io::FormatError("snapshot descriptor " + base + ".ini: " + e.what());
  }
  SnapshotSet set;
  set.grid = Grid(pt.get<Index>("grid.nx"), pt.get<Index>("grid.ny"));
  set.final_time = pt.get<double>("time.final_time");
  const auto n_t = pt.get<Index>("time.n_t");
  set.times = time_grid(set.final_time, n_t);
  set.seed = pt.get<std::uint64_t>("sampling.seed");
  set.ranges.mu1 = {pt.get<double>("ranges.mu1_min"), pt.get<double>("ranges.mu1_max")};
  set.ranges.mu2 = {pt.get<double>("ranges.mu2_min"), pt.get<double>("ranges.mu2_max")};
  set.ranges.nu1 = {pt.get<double>("ranges.nu1_min"), pt.get<double>("ranges.nu1_max")};
  set.ranges.nu2 = {pt.get<double>("ranges.nu2_min"), pt.get<double>("ranges.nu2_max")};
  const bool tensor = pt.get<bool>("sampling.tensor_product");

  set.U = io::load_matrix(base + ".bin");
  const auto table = io::load_csv(base + ".csv");
  if (Index(table.rows.size()) != set.U.cols()) {
    throw io::FormatError("snapshot metadata has " + std::to_string(table.rows.size()) +
                          " rows for " + std::to_string(set.U.cols()) + " columns");
  }
  if (set.U.cols() % n_t != 0) throw io::FormatError("snapshot columns are not a multiple of n_t");

  // Parameter lists in order of first appearance; exact text round-trips the doubles.
  std::map<std::pair<double, double>, Index> geom_index;
  std::map<std::pair<double, double>, Index> phys_index;
  std::vector<std::pair<Index, Index>> first_seen;
  const Index n_traj = set.U.cols() / n_t;
  for (Index r = 0; r < n_traj; ++r) {
    const auto& row = table.rows[std::size_t(r * n_t)];
    if (row.size() != 6) throw io::FormatError("snapshot metadata row has wrong arity");
    const std::pair<double, double> g{std::stod(row[1]), std::stod(row[2])};
    const std::pair<double, double> p{std::stod(row[3]), std::stod(row[4])};
    auto gi = geom_index.find(g);
    if (tensor ? gi == geom_index.end() : true) {
      gi = geom_index.insert_or_assign(g, Index(set.geom.size())).first;
      set.geom.push_back({g.first, g.second});
    }
    auto pi = phys_index.find(p);
    if (tensor ? pi == phys_index.end() : true) {
      pi = phys_index.insert_or_assign(p, Index(set.phys.size())).first;
      set.phys.push_back({p.first, p.second});
    }
    set.trajectories.push_back({gi->second, pi->second});
  }
  set.check();
  return set;
}

std::uint64_t snapshot_fingerprint(const std::string& base) { return io::fnv1a_file(base + ".bin"); }

}  // namespace dodrom::fom
